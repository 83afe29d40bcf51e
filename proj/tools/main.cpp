#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "qcd/config.hpp"
#include "qcd/experiment.hpp"

namespace {

using Runner = qcd::experiment::RunResult (*)(const nlohmann::json&, const qcd::experiment::Overrides&);

struct SubcommandArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    bool threads_set = false;
    std::string out_dir;
    bool out_set = false;
};

void add_common_flags(CLI::App* cmd, SubcommandArgs& args) {
    cmd->add_option("--config", args.config_path, "Path to the experiment config file")->required();
    cmd->add_option("--seed", args.seed, "Override the config seed")->each([&](const std::string&) {
        args.seed_set = true;
    });
    cmd->add_option("--threads", args.threads, "Worker threads (0 = hardware)")->each([&](const std::string&) {
        args.threads_set = true;
    });
    cmd->add_option("--out", args.out_dir, "Output directory")->each([&](const std::string&) {
        args.out_set = true;
    });
}

int run(const SubcommandArgs& args, Runner runner) {
    qcd::experiment::Overrides overrides;
    if (args.seed_set) overrides.seed = args.seed;
    if (args.threads_set) overrides.threads = args.threads;
    if (args.out_set) overrides.out_dir = args.out_dir;
    const nlohmann::json cfg = qcd::config::load_file(args.config_path);
    const qcd::experiment::RunResult result = runner(cfg, overrides);
    for (const auto& f : result.files) std::printf("wrote %s\n", f.c_str());
    if (result.poisoned) {
        std::fprintf(stderr, "warning: one or more rows were flagged; see the warnings column\n");
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qcd: quickest-change-detection experiments (CuSum / DE-CuSum / Shiryaev families)"};
    app.require_subcommand(1);

    struct Entry {
        const char* name;
        const char* help;
        Runner runner;
    };
    const Entry entries[] = {
        {"simulate", "Run one detector on one stream and write the trace CSV",
         &qcd::experiment::cmd_simulate},
        {"tradeoff", "Generate a delay-vs-false-alarm trade-off curve CSV", &qcd::experiment::cmd_tradeoff},
        {"table2", "Reproduce the PDC simulation-vs-approximation table", &qcd::experiment::cmd_table2},
        {"calibrate", "Pick (D, mu) from FAR/PDC constraints and emit a design JSON",
         &qcd::experiment::cmd_calibrate},
        {"cycle-stats", "Estimate SPRT cycle statistics and bounds, emit JSON",
         &qcd::experiment::cmd_cycle_stats},
    };

    SubcommandArgs args[std::size(entries)];
    for (std::size_t i = 0; i < std::size(entries); ++i)
        add_common_flags(app.add_subcommand(entries[i].name, entries[i].help), args[i]);

    CLI11_PARSE(app, argc, argv);

    try {
        for (std::size_t i = 0; i < std::size(entries); ++i)
            if (app.get_subcommand(entries[i].name)->parsed()) return run(args[i], entries[i].runner);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
