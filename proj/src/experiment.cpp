#include "qcd/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace qcd::experiment {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t row_seed(std::uint64_t base, std::uint64_t row_index) {
    return mix64(base ^ (0x9e3779b97f4a7c15ULL * (row_index + 1)));
}

std::string join_warnings(const std::vector<std::string>& warnings) {
    std::string out;
    for (const auto& w : warnings) {
        if (!out.empty()) out += "; ";
        out += w;
    }
    return out;
}

// Default benchmark pair: N(0,1) vs N(0.75,1).
DistributionPair default_pair() {
    return DistributionPair(DistributionModel::gaussian(0.0, 1.0), DistributionModel::gaussian(0.75, 1.0));
}

struct CsvBuilder {
    std::ostringstream out;

    void comment(const std::string& line) { out << "# " << line << '\n'; }

    void header(const std::vector<std::string>& cols) {
        for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
        out << '\n';
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
        out << '\n';
    }

    std::string str() const { return out.str(); }
};

std::string quote_csv(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += "\"\"";
        else q.push_back(c);
    }
    q += "\"";
    return q;
}

nlohmann::json h_to_json(const Truncation& h) {
    if (h.finite()) return h.h();
    return "inf";
}

Truncation h_from_cursor(const config::Cursor& c) { return Truncation::from_value(c.number_or_inf()); }

struct DeCusumDesign {
    double threshold = 0.0;
    double mu = 0.0;
    int probes = 0;
    std::vector<std::string> warnings;
};

// Decoupled (D, mu) selection with one refinement pass: mu from the PDC
// constraint at D0 = log(1/alpha), the threshold from the FAR constraint, mu
// re-calibrated at the operating threshold (PDC depends mildly on D), and a
// final FAR pass since a larger mu shortens the sleep periods. The refinement
// targets a band slightly inside beta so the last threshold pass cannot push
// PDC over the constraint.
DeCusumDesign design_decusum(const DistributionPair& pair, double alpha, double beta, Truncation h,
                             double tolerance, int budget, const ProbeSettings& far_probe,
                             const ProbeSettings& pdc_probe) {
    DeCusumDesign out;
    const double d0 = threshold_for_far(alpha);
    const CalibrationResult mu0 = calibrate_mu_renewal(pair, h, d0, beta, tolerance, budget, pdc_probe);
    out.probes += mu0.probes;
    const auto family_at = [&h](double m) {
        return [m, &h](double d) -> PolicySpec { return DECuSumSpec{d, m, h}; };
    };
    const CalibrationResult d1 =
        calibrate_threshold(family_at(mu0.value), pair, alpha, tolerance, budget, far_probe);
    out.probes += d1.probes;

    const double beta_inner = beta * (1.0 - tolerance / 4.0);
    const double tol_inner = (beta * (3.0 / 4.0) * tolerance) / beta_inner;
    const CalibrationResult mu1 =
        calibrate_mu_renewal(pair, h, d1.value, beta_inner, tol_inner, budget, pdc_probe);
    out.mu = mu1.value;
    out.probes += mu1.probes;
    out.warnings.insert(out.warnings.end(), mu1.warnings.begin(), mu1.warnings.end());

    const CalibrationResult d2 =
        calibrate_threshold(family_at(out.mu), pair, alpha, tolerance, budget, far_probe);
    out.threshold = d2.value;
    out.probes += d2.probes;
    out.warnings.insert(out.warnings.end(), d2.warnings.begin(), d2.warnings.end());
    return out;
}

}  // namespace

std::string format_full(double v) {
    char buf[64];
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_display(double v) {
    char buf[64];
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string write_atomic(const std::string& dir, const std::string& filename, const std::string& contents) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path final_path = fs::path(dir) / filename;
    const fs::path tmp_path = fs::path(dir) / (filename + ".tmp");
    {
        std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp_path.string());
        out << contents;
    }
    fs::rename(tmp_path, final_path);
    return final_path.string();
}

CommonConfig parse_common(const config::Cursor& root, const nlohmann::json& full,
                          const Overrides& overrides) {
    CommonConfig common;
    common.name = root.at("name").str();
    if (auto seed = root.maybe("seed")) common.seed = static_cast<std::uint64_t>(seed->integer());
    if (auto threads = root.maybe("threads")) common.threads = static_cast<int>(threads->integer());
    if (auto out = root.maybe("out")) common.out_dir = out->str();
    if (overrides.seed) common.seed = *overrides.seed;
    if (overrides.threads) common.threads = *overrides.threads;
    if (overrides.out_dir) common.out_dir = *overrides.out_dir;
    common.hash = config::config_hash(full);
    return common;
}

DistributionPair parse_pair(const config::Cursor& pair_cursor) {
    auto parse_model = [](const config::Cursor& c) -> DistributionModel {
        const std::string kind = c.at("kind").str();
        if (kind == "gaussian") return DistributionModel::gaussian(c.at("mean").number(), c.at("var").number());
        if (kind == "bernoulli") return DistributionModel::bernoulli(c.at("p").number());
        if (kind == "tabular")
            return DistributionModel::tabular(c.at("support").number_array(), c.at("probs").number_array());
        c.fail("unknown distribution kind '" + kind + "' (expected gaussian | bernoulli | tabular)");
    };
    return DistributionPair(parse_model(pair_cursor.at("f0")), parse_model(pair_cursor.at("f1")));
}

ChangePointSpec parse_change(const config::Cursor& c) {
    const std::string kind = c.at("kind").str();
    if (kind == "deterministic") return ChangePointSpec::deterministic(c.at("gamma").number_or_inf());
    if (kind == "geometric") return ChangePointSpec::geometric(c.at("rho").number());
    c.fail("unknown change-point kind '" + kind + "' (expected deterministic | geometric)");
}

PolicySpec parse_policy(const config::Cursor& c) {
    const std::string family = c.at("family").str();
    if (family == "cusum") return CuSumSpec{c.at("D").number()};
    if (family == "de-cusum")
        return DECuSumSpec{c.at("D").number(), c.at("mu").number(), h_from_cursor(c.at("h"))};
    if (family == "shiryaev") return ShiryaevSpec{c.at("A").number(), c.at("rho").number()};
    if (family == "de-shiryaev")
        return DEShiryaevSpec{c.at("A").number(), c.at("B").number(), c.at("rho").number()};
    if (family == "fractional-cusum") return FractionalCuSumSpec{c.at("D").number(), c.at("beta").number()};
    if (family == "fractional-shiryaev")
        return FractionalShiryaevSpec{c.at("A").number(), c.at("rho").number(), c.at("beta").number()};
    c.fail("unknown detector family '" + family + "'");
}

nlohmann::json metric_record(const MetricEstimate& estimate, const std::string& metric,
                             const std::string& config_hash) {
    nlohmann::json j;
    j["metric"] = metric;
    j["value"] = estimate.value;
    j["std_error"] = estimate.std_error;
    j["n_trials"] = estimate.n_trials;
    j["ci95"] = {estimate.ci_lo, estimate.ci_hi};
    j["censored_fraction"] = estimate.censored_fraction;
    j["config_hash"] = config_hash;
    j["warnings"] = estimate.warnings;
    return j;
}

nlohmann::json cycle_stats_to_json(const CycleStats& stats) {
    nlohmann::json j;
    j["mean_lambda_inf"] = stats.mean_lambda_inf;
    j["se_lambda_inf"] = stats.se_lambda_inf;
    j["mean_abs_W"] = stats.mean_abs_W;
    j["se_abs_W"] = stats.se_abs_W;
    j["mean_abs_W_hplus"] = stats.mean_abs_W_hplus;
    j["se_abs_W_hplus"] = stats.se_abs_W_hplus;
    j["p_neg_inf"] = stats.p_neg_inf;
    j["se_p_neg_inf"] = stats.se_p_neg_inf;
    j["p_neg_1"] = stats.p_neg_1;
    j["se_p_neg_1"] = stats.se_p_neg_1;
    j["mean_abs_trunc_llr_neg"] = stats.mean_abs_trunc_llr_neg;
    j["se_abs_trunc_llr_neg"] = stats.se_abs_trunc_llr_neg;
    j["n_trials"] = stats.n_trials;
    j["h"] = h_to_json(stats.h);
    j["terminal_sample"] = stats.terminal_sample;
    return j;
}

CycleStats cycle_stats_from_json(const nlohmann::json& j) {
    CycleStats stats;
    stats.mean_lambda_inf = j.at("mean_lambda_inf").get<double>();
    stats.se_lambda_inf = j.at("se_lambda_inf").get<double>();
    stats.mean_abs_W = j.at("mean_abs_W").get<double>();
    stats.se_abs_W = j.at("se_abs_W").get<double>();
    stats.mean_abs_W_hplus = j.at("mean_abs_W_hplus").get<double>();
    stats.se_abs_W_hplus = j.at("se_abs_W_hplus").get<double>();
    stats.p_neg_inf = j.at("p_neg_inf").get<double>();
    stats.se_p_neg_inf = j.at("se_p_neg_inf").get<double>();
    stats.p_neg_1 = j.at("p_neg_1").get<double>();
    stats.se_p_neg_1 = j.at("se_p_neg_1").get<double>();
    stats.mean_abs_trunc_llr_neg = j.at("mean_abs_trunc_llr_neg").get<double>();
    stats.se_abs_trunc_llr_neg = j.at("se_abs_trunc_llr_neg").get<double>();
    stats.n_trials = j.at("n_trials").get<std::int64_t>();
    const auto& h = j.at("h");
    stats.h = h.is_string() ? Truncation::none() : Truncation::at(h.get<double>());
    stats.terminal_sample = j.at("terminal_sample").get<std::vector<double>>();
    return stats;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

RunResult cmd_simulate(const nlohmann::json& cfg, const Overrides& overrides) {
    const config::Cursor root(cfg, "");
    const CommonConfig common = parse_common(root, cfg, overrides);
    const DistributionPair pair = parse_pair(root.at("pair"));
    const config::Cursor sim = root.at("simulate");
    const ChangePointSpec change = parse_change(sim.at("change"));
    const PolicySpec policy = parse_policy(sim.at("detector"));
    std::uint64_t cap = 100'000;
    if (auto c = sim.maybe("cap")) cap = static_cast<std::uint64_t>(c->integer());

    ObservationStream stream(pair, change, common.seed);
    const Trace trace = run_policy(policy, stream, cap);

    std::ostringstream body;
    body << "# name=" << common.name << " config_hash=" << common.hash << " seed=" << common.seed
         << " censored=" << (trace.censored ? 1 : 0) << '\n';
    trace.write_csv(body);

    RunResult result;
    result.files.push_back(write_atomic(common.out_dir, common.name + "_trace.csv", body.str()));
    result.poisoned = trace.censored;
    return result;
}

// ---------------------------------------------------------------------------
// table2
// ---------------------------------------------------------------------------

RunResult cmd_table2(const nlohmann::json& cfg, const Overrides& overrides) {
    const config::Cursor root(cfg, "");
    const CommonConfig common = parse_common(root, cfg, overrides);
    const DistributionPair pair = root.has("pair") ? parse_pair(root.at("pair")) : default_pair();
    std::int64_t trials = 20'000;
    if (auto t2 = root.maybe("table2"))
        if (auto t = t2->maybe("trials")) trials = t->integer();

    struct Row {
        char part;
        double D;
        double mu;
    };
    std::vector<Row> rows;
    for (double d : {1.0, 2.0, 3.0, 4.0, 6.0}) rows.push_back({'a', d, 0.1});
    for (double mu : {0.01, 0.05, 0.2, 0.3, 0.4, 0.6}) rows.push_back({'b', 6.0, mu});

    CsvBuilder csv;
    csv.comment("name=" + common.name + " config_hash=" + common.hash + " seed=" +
                std::to_string(common.seed) + " h=inf trials=" + std::to_string(trials));
    csv.header({"part", "D", "mu", "pdc_sim", "pdc_sim_se", "pdc_approx", "pdc_sim_disp",
                "pdc_approx_disp", "seed", "warnings"});
    RunResult result;
    std::uint64_t idx = 0;
    for (const Row& row : rows) {
        const std::uint64_t rseed = row_seed(common.seed, idx++);
        std::vector<std::string> warnings;
        double pdc = 0.0, pdc_se = 0.0;
        try {
            const ConditionalCycleMeans cycles = estimate_conditional_cycle_means(
                pair, row.D, Truncation::none(), row.mu, Regime::pre_change, trials, rseed, common.threads);
            pdc = cycles.pdc;
            pdc_se = cycles.pdc_se;
        } catch (const InsufficientDataError& e) {
            warnings.push_back(e.what());
        }
        const double approx = pdc_approx_hinf(pair, row.mu);
        if (!warnings.empty()) result.poisoned = true;
        csv.row({std::string(1, row.part), format_full(row.D), format_full(row.mu), format_full(pdc),
                 format_full(pdc_se), format_full(approx), format_display(pdc), format_display(approx),
                 std::to_string(rseed), quote_csv(join_warnings(warnings))});
    }
    result.files.push_back(write_atomic(common.out_dir, common.name + "_table2.csv", csv.str()));
    return result;
}

// ---------------------------------------------------------------------------
// cycle-stats
// ---------------------------------------------------------------------------

RunResult cmd_cycle_stats(const nlohmann::json& cfg, const Overrides& overrides) {
    const config::Cursor root(cfg, "");
    const CommonConfig common = parse_common(root, cfg, overrides);
    const DistributionPair pair = root.has("pair") ? parse_pair(root.at("pair")) : default_pair();
    std::int64_t trials = 100'000;
    Truncation h = Truncation::none();
    std::vector<double> mus;
    if (auto cs = root.maybe("cycle-stats")) {
        if (auto t = cs->maybe("trials")) trials = t->integer();
        if (auto hc = cs->maybe("h")) h = h_from_cursor(*hc);
        if (auto m = cs->maybe("mu")) mus = m->number_array();
    }

    const CycleStats stats = estimate_cycle_stats(pair, h, trials, common.seed, common.threads);
    nlohmann::json j;
    j["name"] = common.name;
    j["config_hash"] = common.hash;
    j["seed"] = common.seed;
    j["stats"] = cycle_stats_to_json(stats);
    nlohmann::json bounds = nlohmann::json::array();
    for (double mu : mus) {
        bounds.push_back({{"mu", mu},
                          {"T_L_inf", bound_T_L_inf(stats, mu)},
                          {"T_U_inf", bound_T_U_inf(stats, mu)},
                          {"T_U_1", bound_T_U_1(stats, mu)},
                          {"pdc_approx", pdc_approx(stats, mu)}});
    }
    j["bounds"] = bounds;

    RunResult result;
    result.files.push_back(
        write_atomic(common.out_dir, common.name + "_cycle_stats.json", j.dump(2) + "\n"));
    return result;
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

RunResult cmd_calibrate(const nlohmann::json& cfg, const Overrides& overrides) {
    const config::Cursor root(cfg, "");
    const CommonConfig common = parse_common(root, cfg, overrides);
    const DistributionPair pair = root.has("pair") ? parse_pair(root.at("pair")) : default_pair();
    const config::Cursor cal = root.at("calibrate");
    const double alpha = cal.at("alpha").number();
    const double beta = cal.has("beta") ? cal.at("beta").number() : 1.0;
    const Truncation h = cal.has("h") ? h_from_cursor(cal.at("h")) : Truncation::none();
    const double tolerance = cal.has("tolerance") ? cal.at("tolerance").number() : 0.05;
    const int budget = cal.has("budget") ? static_cast<int>(cal.at("budget").integer()) : 20;
    const std::int64_t far_trials = cal.has("far_trials") ? cal.at("far_trials").integer() : 10'000;
    const std::int64_t pdc_trials = cal.has("pdc_trials") ? cal.at("pdc_trials").integer() : 20'000;
    const std::int64_t verify_mult =
        cal.has("verify_multiplier") ? cal.at("verify_multiplier").integer() : 4;
    std::string family = cal.has("family") ? cal.at("family").str() : "de-cusum";
    if (family != "cusum" && family != "de-cusum")
        cal.at("family").fail("calibrate supports the cusum and de-cusum families");

    const DesignSpec design{alpha, beta, h};
    std::vector<std::string> warnings = validate_design(design);

    ProbeSettings far_probe;
    far_probe.n_trials = far_trials;
    far_probe.seed = mix64(common.seed ^ 0xfa12ca11ULL);
    far_probe.threads = common.threads;
    ProbeSettings pdc_probe = far_probe;
    pdc_probe.n_trials = pdc_trials;
    pdc_probe.seed = mix64(common.seed ^ 0x9dcca11bULL);

    int total_probes = 0;
    double D = 0.0;
    double mu = kInf;
    if (family == "cusum" || beta == 1.0) {
        const auto cusum_family = [](double d) -> PolicySpec { return CuSumSpec{d}; };
        const CalibrationResult cal_d =
            calibrate_threshold(cusum_family, pair, alpha, tolerance, budget, far_probe);
        D = cal_d.value;
        total_probes += cal_d.probes;
        warnings.insert(warnings.end(), cal_d.warnings.begin(), cal_d.warnings.end());
        family = "cusum";  // beta = 1 degenerates to CuSum (mu stays the inf sentinel)
    } else {
        const DeCusumDesign design = design_decusum(pair, alpha, beta, h, tolerance, budget, far_probe,
                                                    pdc_probe);
        D = design.threshold;
        mu = design.mu;
        total_probes += design.probes;
        warnings.insert(warnings.end(), design.warnings.begin(), design.warnings.end());
    }

    // Independent verification at a larger trial budget. The binding PDC
    // verification is the renewal expression, which stays well-conditioned at
    // small calibrated thresholds; the direct plateau estimate is recorded
    // alongside with its own diagnostics.
    const std::uint64_t verify_seed = mix64(common.seed ^ 0x7e51f7ULL);
    MetricsEngine verify_engine(verify_seed, common.threads);
    const PolicySpec final_policy =
        family == "cusum" ? PolicySpec(CuSumSpec{D}) : PolicySpec(DECuSumSpec{D, mu, h});
    const MetricEstimate verified_far =
        verify_engine.estimate_far(final_policy, pair, far_trials * verify_mult);
    warnings.insert(warnings.end(), verified_far.warnings.begin(), verified_far.warnings.end());

    MetricEstimate verified_pdc = make_estimate(1.0, 0.0, 0);
    MetricEstimate pdc_direct = make_estimate(1.0, 0.0, 0);
    if (family != "cusum") {
        const ConditionalCycleMeans renewal = estimate_conditional_cycle_means(
            pair, D, h, mu, Regime::pre_change, pdc_trials * verify_mult, verify_seed ^ 0x9d, common.threads);
        verified_pdc = make_estimate(renewal.pdc, renewal.pdc_se, renewal.accepted);
        pdc_direct = verify_engine
                         .estimate_pdc(final_policy, pair, MetricsEngine::default_pdc_grid(),
                                       pdc_trials * verify_mult)
                         .estimate;
        if (!pdc_direct.flagged() &&
            std::abs(pdc_direct.value - verified_pdc.value) >
                3.0 * std::hypot(pdc_direct.std_error, verified_pdc.std_error))
            warnings.push_back("direct PDC plateau disagrees with the renewal verification beyond 3 SE");
    }

    nlohmann::json j;
    j["name"] = common.name;
    j["family"] = family;
    j["alpha"] = alpha;
    j["beta"] = beta;
    j["h"] = h_to_json(h);
    j["D"] = D;
    j["mu"] = mu == kInf ? nlohmann::json("inf") : nlohmann::json(mu);
    j["verified_far"] = verified_far.value;
    j["verified_far_se"] = verified_far.std_error;
    j["verified_pdc"] = verified_pdc.value;
    j["verified_pdc_se"] = verified_pdc.std_error;
    j["probes"] = total_probes;
    j["seeds"] = {{"base", common.seed},
                  {"far_probe", far_probe.seed},
                  {"pdc_probe", pdc_probe.seed},
                  {"verify", verify_seed}};
    j["records"] = {{"far", metric_record(verified_far, "FAR", common.hash)},
                    {"pdc", metric_record(verified_pdc, "PDC", common.hash)},
                    {"pdc_direct", metric_record(pdc_direct, "PDC(direct plateau)", common.hash)}};
    j["config_hash"] = common.hash;
    j["warnings"] = warnings;

    RunResult result;
    result.poisoned = !warnings.empty();
    result.files.push_back(write_atomic(common.out_dir, common.name + "_design.json", j.dump(2) + "\n"));
    return result;
}

// ---------------------------------------------------------------------------
// tradeoff
// ---------------------------------------------------------------------------

namespace {

struct MinimaxPolicyCfg {
    std::string family;  // cusum | de-cusum | fractional-cusum
    double beta = 1.0;
    Truncation h = Truncation::none();
    std::optional<double> fixed_mu;
};

struct BayesPolicyCfg {
    std::string family;  // shiryaev | de-shiryaev | fractional-shiryaev
    std::optional<double> zeta;
    std::optional<double> beta;
    std::optional<double> fixed_lower;  // B
};

RunResult run_minimax_tradeoff(const CommonConfig& common, const DistributionPair& pair,
                               const config::Cursor& t) {
    std::vector<MinimaxPolicyCfg> policies;
    const config::Cursor pol = t.at("policies");
    for (std::size_t i = 0; i < pol.size(); ++i) {
        const config::Cursor p = pol.index(i);
        MinimaxPolicyCfg c;
        c.family = p.at("family").str();
        if (c.family == "de-cusum" || c.family == "fractional-cusum") c.beta = p.at("beta").number();
        if (c.family == "de-cusum") {
            if (auto h = p.maybe("h")) c.h = h_from_cursor(*h);
            if (auto m = p.maybe("mu")) c.fixed_mu = m->number();
        } else if (c.family != "cusum" && c.family != "fractional-cusum") {
            p.fail("minimax tradeoff supports cusum | de-cusum | fractional-cusum");
        }
        policies.push_back(c);
    }

    std::vector<double> thresholds;
    std::vector<double> alphas;
    if (t.has("thresholds")) thresholds = t.at("thresholds").number_array();
    else if (t.has("alphas")) alphas = t.at("alphas").number_array();
    else t.fail("tradeoff needs a 'thresholds' or 'alphas' array");
    std::sort(thresholds.begin(), thresholds.end());
    std::sort(alphas.rbegin(), alphas.rend());  // descending alpha = ascending D

    const std::int64_t far_trials = t.has("far_trials") ? t.at("far_trials").integer() : 10'000;
    const std::int64_t cadd_trials = t.has("cadd_trials") ? t.at("cadd_trials").integer() : 20'000;
    const int cadd_n_max = t.has("cadd_n_max") ? static_cast<int>(t.at("cadd_n_max").integer()) : 20;
    const std::int64_t pdc_trials = t.has("pdc_trials") ? t.at("pdc_trials").integer() : 20'000;
    const double tolerance = t.has("tolerance") ? t.at("tolerance").number() : 0.05;
    const int budget = t.has("budget") ? static_cast<int>(t.at("budget").integer()) : 20;
    const std::uint64_t cap = t.has("cap") ? static_cast<std::uint64_t>(t.at("cap").integer()) : 10'000'000;

    CsvBuilder csv;
    csv.comment("name=" + common.name + " config_hash=" + common.hash + " seed=" +
                std::to_string(common.seed) + " domain=minimax");
    csv.header({"family", "beta", "target_alpha", "D", "mu", "far", "far_se", "cadd", "cadd_se",
                "cadd_argmax_n", "pdc", "pdc_se", "far_disp", "cadd_disp", "pdc_disp", "seed", "warnings"});

    RunResult result;
    std::uint64_t idx = 0;
    const std::size_t n_points = thresholds.empty() ? alphas.size() : thresholds.size();
    for (const MinimaxPolicyCfg& pc : policies) {
        for (std::size_t k = 0; k < n_points; ++k) {
            const std::uint64_t rseed = row_seed(common.seed, idx++);
            std::vector<std::string> warnings;
            MetricsEngine engine(rseed, common.threads);
            ProbeSettings probe;
            probe.n_trials = far_trials;
            probe.cap = cap;
            probe.seed = mix64(rseed ^ 0xca11b7a7eULL);
            probe.threads = common.threads;

            double target_alpha = std::numeric_limits<double>::quiet_NaN();
            double D = 0.0;
            double mu = kInf;
            try {
                ProbeSettings pdc_probe = probe;
                pdc_probe.n_trials = pdc_trials;
                if (!thresholds.empty()) {
                    D = thresholds[k];
                    if (pc.family == "de-cusum" && !pc.fixed_mu) {
                        // Renewal-route calibration: valid at thresholds where
                        // conditioning on {tau >= n} would starve the direct probe.
                        const CalibrationResult cal =
                            calibrate_mu_renewal(pair, pc.h, D, pc.beta, tolerance, budget, pdc_probe);
                        mu = cal.value;
                        warnings.insert(warnings.end(), cal.warnings.begin(), cal.warnings.end());
                    } else if (pc.fixed_mu) {
                        mu = *pc.fixed_mu;
                    }
                } else {
                    target_alpha = alphas[k];
                    if (pc.family == "de-cusum" && !pc.fixed_mu) {
                        const DeCusumDesign design = design_decusum(pair, target_alpha, pc.beta, pc.h,
                                                                    tolerance, budget, probe, pdc_probe);
                        D = design.threshold;
                        mu = design.mu;
                        warnings.insert(warnings.end(), design.warnings.begin(), design.warnings.end());
                    } else {
                        ThresholdFamily family;
                        if (pc.family == "de-cusum") {
                            mu = *pc.fixed_mu;
                            family = [&](double d) -> PolicySpec { return DECuSumSpec{d, mu, pc.h}; };
                        } else if (pc.family == "fractional-cusum") {
                            family = [&](double d) -> PolicySpec { return FractionalCuSumSpec{d, pc.beta}; };
                        } else {
                            family = [](double d) -> PolicySpec { return CuSumSpec{d}; };
                        }
                        const CalibrationResult cal_d =
                            calibrate_threshold(family, pair, target_alpha, tolerance, budget, probe);
                        D = cal_d.value;
                        warnings.insert(warnings.end(), cal_d.warnings.begin(), cal_d.warnings.end());
                    }
                }

                PolicySpec policy = CuSumSpec{D};
                if (pc.family == "de-cusum") policy = DECuSumSpec{D, mu, pc.h};
                if (pc.family == "fractional-cusum") policy = FractionalCuSumSpec{D, pc.beta};

                const MetricEstimate far = engine.estimate_far(policy, pair, far_trials, cap);
                const CaddProfile cadd = engine.estimate_cadd(policy, pair, cadd_n_max, cadd_trials, cap);
                MetricEstimate pdc;
                if (pc.family == "cusum") {
                    pdc = make_estimate(1.0, 0.0, 0);
                } else if (pc.family == "de-cusum") {
                    // Verified PDC through the renewal expression at the final
                    // (D, mu) operating point.
                    const ConditionalCycleMeans renewal = estimate_conditional_cycle_means(
                        pair, D, pc.h, mu, Regime::pre_change, pdc_trials, mix64(rseed ^ 0x60d), common.threads);
                    pdc = make_estimate(renewal.pdc, renewal.pdc_se, renewal.accepted);
                } else {
                    // Fractional sampling: the control is an independent coin,
                    // so the duty cycle is beta by construction. Cross-check
                    // against the direct estimator whenever it is healthy.
                    pdc = make_estimate(pc.beta, 0.0, 0);
                    const MetricEstimate direct =
                        engine.estimate_pdc(policy, pair, MetricsEngine::default_pdc_grid(), pdc_trials, cap)
                            .estimate;
                    if (!direct.flagged() &&
                        std::abs(direct.value - pc.beta) > 3.0 * std::max(direct.std_error, 1e-12))
                        warnings.push_back("direct PDC estimate disagrees with the coin marginal beta");
                }
                warnings.insert(warnings.end(), far.warnings.begin(), far.warnings.end());
                warnings.insert(warnings.end(), cadd.warnings.begin(), cadd.warnings.end());
                warnings.insert(warnings.end(), pdc.warnings.begin(), pdc.warnings.end());

                csv.row({pc.family, format_full(pc.beta),
                         std::isnan(target_alpha) ? "" : format_full(target_alpha), format_full(D),
                         pc.family == "de-cusum" ? format_full(mu) : "", format_full(far.value),
                         format_full(far.std_error), format_full(cadd.sup_value),
                         format_full(cadd.sup_std_error), std::to_string(cadd.argmax_n),
                         format_full(pdc.value), format_full(pdc.std_error), format_display(far.value),
                         format_display(cadd.sup_value), format_display(pdc.value), std::to_string(rseed),
                         quote_csv(join_warnings(warnings))});
            } catch (const std::runtime_error& e) {
                warnings.push_back(e.what());
                csv.row({pc.family, format_full(pc.beta),
                         std::isnan(target_alpha) ? "" : format_full(target_alpha), format_full(D), "", "",
                         "", "", "", "", "", "", "", "", "", std::to_string(rseed),
                         quote_csv(join_warnings(warnings))});
            }
            if (!warnings.empty()) result.poisoned = true;
        }
    }
    result.files.push_back(write_atomic(common.out_dir, common.name + "_tradeoff.csv", csv.str()));
    return result;
}

RunResult run_bayes_tradeoff(const CommonConfig& common, const DistributionPair& pair,
                             const config::Cursor& t) {
    const double rho = t.at("rho").number();
    std::vector<BayesPolicyCfg> policies;
    const config::Cursor pol = t.at("policies");
    for (std::size_t i = 0; i < pol.size(); ++i) {
        const config::Cursor p = pol.index(i);
        BayesPolicyCfg c;
        c.family = p.at("family").str();
        if (c.family != "shiryaev" && c.family != "de-shiryaev" && c.family != "fractional-shiryaev")
            p.fail("bayes tradeoff supports shiryaev | de-shiryaev | fractional-shiryaev");
        if (auto z = p.maybe("zeta")) c.zeta = z->number();
        if (auto b = p.maybe("beta")) c.beta = b->number();
        if (auto l = p.maybe("B")) c.fixed_lower = l->number();
        if (c.family == "de-shiryaev" && !c.zeta && !c.fixed_lower)
            p.fail("de-shiryaev needs 'zeta' (ANO constraint) or a fixed 'B'");
        if (c.family == "fractional-shiryaev" && !c.zeta && !c.beta)
            p.fail("fractional-shiryaev needs 'zeta' or 'beta'");
        policies.push_back(c);
    }

    std::vector<double> uppers;
    if (t.has("thresholds")) {
        uppers = t.at("thresholds").number_array();
    } else if (t.has("alphas")) {
        for (double a : t.at("alphas").number_array()) uppers.push_back(1.0 - a);
    } else {
        t.fail("tradeoff needs a 'thresholds' (A values) or 'alphas' array");
    }
    std::sort(uppers.begin(), uppers.end());

    const std::int64_t trials = t.has("bayes_trials") ? t.at("bayes_trials").integer() : 20'000;
    const double tolerance = t.has("tolerance") ? t.at("tolerance").number() : 0.05;
    const int budget = t.has("budget") ? static_cast<int>(t.at("budget").integer()) : 20;
    const std::uint64_t cap = t.has("cap") ? static_cast<std::uint64_t>(t.at("cap").integer()) : 10'000'000;

    CsvBuilder csv;
    csv.comment("name=" + common.name + " config_hash=" + common.hash + " seed=" +
                std::to_string(common.seed) + " domain=bayes rho=" + format_full(rho));
    csv.header({"family", "A", "B", "beta", "pfa", "pfa_se", "add", "add_se", "ano", "ano_se", "pfa_disp",
                "add_disp", "ano_disp", "seed", "warnings"});

    RunResult result;
    std::uint64_t idx = 0;
    for (const BayesPolicyCfg& pc : policies) {
        // B depends on the ANO constraint, not on A; tune it once at the
        // most stringent A and reuse it along the curve.
        double lower = pc.fixed_lower.value_or(0.0);
        std::vector<std::string> policy_warnings;
        if (pc.family == "de-shiryaev" && !pc.fixed_lower) {
            ProbeSettings probe;
            probe.n_trials = trials;
            probe.cap = cap;
            probe.seed = mix64(common.seed ^ 0xb7a11ca1ULL ^ idx);
            probe.threads = common.threads;
            const CalibrationResult cal = calibrate_shiryaev_lower(pair, uppers.back(), rho, *pc.zeta,
                                                                   tolerance, budget, probe);
            lower = cal.value;
            policy_warnings.insert(policy_warnings.end(), cal.warnings.begin(), cal.warnings.end());
        }
        double beta = pc.beta.value_or(1.0);
        if (pc.family == "fractional-shiryaev" && !pc.beta) {
            // Spend the ANO budget uniformly: beta = zeta / E[Gamma - 1].
            beta = std::min(1.0, *pc.zeta * rho / (1.0 - rho));
        }

        for (double upper : uppers) {
            const std::uint64_t rseed = row_seed(common.seed, idx++);
            std::vector<std::string> warnings = policy_warnings;
            MetricsEngine engine(rseed, common.threads);
            PolicySpec policy = ShiryaevSpec{upper, rho};
            if (pc.family == "de-shiryaev") policy = DEShiryaevSpec{upper, lower, rho};
            if (pc.family == "fractional-shiryaev") policy = FractionalShiryaevSpec{upper, rho, beta};
            const BayesEstimates est = engine.estimate_bayes(policy, pair, rho, trials, cap);
            warnings.insert(warnings.end(), est.add.warnings.begin(), est.add.warnings.end());
            warnings.insert(warnings.end(), est.pfa.warnings.begin(), est.pfa.warnings.end());
            warnings.insert(warnings.end(), est.ano.warnings.begin(), est.ano.warnings.end());
            if (!warnings.empty()) result.poisoned = true;
            csv.row({pc.family, format_full(upper),
                     pc.family == "de-shiryaev" ? format_full(lower) : "",
                     pc.family == "fractional-shiryaev" ? format_full(beta) : "",
                     format_full(est.pfa.value), format_full(est.pfa.std_error),
                     format_full(est.add.value), format_full(est.add.std_error),
                     format_full(est.ano.value), format_full(est.ano.std_error),
                     format_display(est.pfa.value), format_display(est.add.value),
                     format_display(est.ano.value), std::to_string(rseed),
                     quote_csv(join_warnings(warnings))});
        }
    }
    result.files.push_back(write_atomic(common.out_dir, common.name + "_tradeoff.csv", csv.str()));
    return result;
}

}  // namespace

RunResult cmd_tradeoff(const nlohmann::json& cfg, const Overrides& overrides) {
    const config::Cursor root(cfg, "");
    const CommonConfig common = parse_common(root, cfg, overrides);
    const DistributionPair pair = root.has("pair") ? parse_pair(root.at("pair")) : default_pair();
    const config::Cursor t = root.at("tradeoff");
    const std::string domain = t.has("domain") ? t.at("domain").str() : "minimax";
    if (domain == "minimax") return run_minimax_tradeoff(common, pair, t);
    if (domain == "bayes") return run_bayes_tradeoff(common, pair, t);
    t.at("domain").fail("domain must be minimax or bayes");
}

}  // namespace qcd::experiment
