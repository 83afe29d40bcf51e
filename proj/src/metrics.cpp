#include "qcd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qcd/parallel.hpp"
#include "qcd/renewal.hpp"

namespace qcd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Moments {
    double mean = 0.0;
    double se = 0.0;
    std::int64_t n = 0;
};

Moments moments(const std::vector<double>& v) {
    Moments m;
    m.n = static_cast<std::int64_t>(v.size());
    if (m.n == 0) return m;
    double sum = 0.0;
    for (double x : v) sum += x;
    m.mean = sum / static_cast<double>(m.n);
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.se = m.n > 1 ? std::sqrt(ss / static_cast<double>(m.n - 1) / static_cast<double>(m.n)) : 0.0;
    return m;
}

}  // namespace

MetricEstimate make_estimate(double value, double std_error, std::int64_t n_trials,
                             double censored_fraction) {
    MetricEstimate e;
    e.value = value;
    e.std_error = std_error;
    e.n_trials = n_trials;
    e.ci_lo = value - 1.96 * std_error;
    e.ci_hi = value + 1.96 * std_error;
    e.censored_fraction = censored_fraction;
    return e;
}

MetricEstimate MetricsEngine::estimate_far(const PolicySpec& policy, const DistributionPair& pair,
                                           std::int64_t n_trials, std::uint64_t cap) const {
    if (n_trials < 2) throw std::invalid_argument("estimate_far: n_trials must be >= 2");
    std::vector<double> tau(static_cast<std::size_t>(n_trials));
    std::vector<std::uint8_t> censored(static_cast<std::size_t>(n_trials));
    const ChangePointSpec no_change = ChangePointSpec::deterministic(kInf);
    parallel_for_trials(n_trials, threads_, [&](std::int64_t i) {
        ObservationStream stream(pair, no_change, trial_seed(seed_, static_cast<std::uint64_t>(i)));
        const RunOutcome out = run_policy_outcome(policy, stream, cap);
        tau[static_cast<std::size_t>(i)] = static_cast<double>(out.tau);
        censored[static_cast<std::size_t>(i)] = out.censored ? 1 : 0;
    });
    const Moments m = moments(tau);
    const double far = 1.0 / m.mean;
    const double se = m.se / (m.mean * m.mean);  // delta method for 1/mean
    std::int64_t n_censored = 0;
    for (auto c : censored) n_censored += c;
    const double cfrac = static_cast<double>(n_censored) / static_cast<double>(n_trials);
    MetricEstimate e = make_estimate(far, se, n_trials, cfrac);
    if (n_censored > 0)
        e.warnings.push_back("censored trials counted at cap; FAR biased conservatively upward");
    if (cfrac > 0.01) e.warnings.push_back("unreliable: censored fraction exceeds 1%");
    return e;
}

CaddProfile MetricsEngine::estimate_cadd(const PolicySpec& policy, const DistributionPair& pair,
                                         int n_max, std::int64_t trials_per_n, std::uint64_t cap) const {
    if (n_max < 1) throw std::invalid_argument("estimate_cadd: n_max must be >= 1");
    if (trials_per_n < 2) throw std::invalid_argument("estimate_cadd: trials_per_n must be >= 2");
    CaddProfile profile;
    profile.per_n.reserve(static_cast<std::size_t>(n_max));
    bool any_censored = false;
    for (int n = 1; n <= n_max; ++n) {
        std::vector<double> delay(static_cast<std::size_t>(trials_per_n),
                                  std::numeric_limits<double>::quiet_NaN());
        std::vector<std::uint8_t> censored(static_cast<std::size_t>(trials_per_n), 0);
        const ChangePointSpec change = ChangePointSpec::deterministic(static_cast<double>(n));
        // Per-point seed domain: criterion estimates at different n stay
        // independent while the whole profile is reproducible.
        const std::uint64_t point_seed = mix64(seed_ ^ (0x9e3779b97f4a7c15ULL * std::uint64_t(n)));
        parallel_for_trials(trials_per_n, threads_, [&](std::int64_t i) {
            ObservationStream stream(pair, change, trial_seed(point_seed, static_cast<std::uint64_t>(i)));
            const RunOutcome out = run_policy_outcome(policy, stream, cap);
            if (out.tau >= static_cast<std::uint64_t>(n)) {
                delay[static_cast<std::size_t>(i)] = static_cast<double>(out.tau) - static_cast<double>(n);
                censored[static_cast<std::size_t>(i)] = out.censored ? 1 : 0;
            }
        });
        std::vector<double> accepted;
        accepted.reserve(delay.size());
        for (std::size_t i = 0; i < delay.size(); ++i) {
            if (!std::isnan(delay[i])) accepted.push_back(delay[i]);
            any_censored = any_censored || censored[i];
        }
        const Moments m = moments(accepted);
        CaddPoint point;
        point.n = n;
        point.value = m.mean;
        point.std_error = m.se;
        point.accepted = m.n;
        point.trials = trials_per_n;
        profile.per_n.push_back(point);
        const double rate = static_cast<double>(m.n) / static_cast<double>(trials_per_n);
        if (rate < 0.10)
            profile.warnings.push_back("acceptance below 10% at n=" + std::to_string(n) +
                                       " (threshold too low for this horizon)");
    }
    if (any_censored) profile.warnings.push_back("some trials censored at cap");
    const auto best = std::max_element(profile.per_n.begin(), profile.per_n.end(),
                                       [](const CaddPoint& a, const CaddPoint& b) { return a.value < b.value; });
    profile.argmax_n = best->n;
    profile.sup_value = best->value;
    profile.sup_std_error = best->std_error;
    return profile;
}

MetricEstimate MetricsEngine::estimate_wadd_decusum(const DECuSumSpec& policy, const DistributionPair& pair,
                                                    std::int64_t n_trials, std::uint64_t cap) const {
    if (!policy.h.finite())
        throw std::invalid_argument("estimate_wadd_decusum: WADD is infinite when h = inf");
    if (n_trials < 2) throw std::invalid_argument("estimate_wadd_decusum: n_trials must be >= 2");
    std::vector<double> tau(static_cast<std::size_t>(n_trials));
    std::vector<std::uint8_t> censored(static_cast<std::size_t>(n_trials));
    const ChangePointSpec at_one = ChangePointSpec::deterministic(1.0);
    const PolicySpec spec = policy;
    parallel_for_trials(n_trials, threads_, [&](std::int64_t i) {
        ObservationStream stream(pair, at_one, trial_seed(seed_, static_cast<std::uint64_t>(i)));
        const RunOutcome out = run_policy_outcome(spec, stream, cap);
        tau[static_cast<std::size_t>(i)] = static_cast<double>(out.tau);
        censored[static_cast<std::size_t>(i)] = out.censored ? 1 : 0;
    });
    const Moments m = moments(tau);
    const double offset = static_cast<double>(sojourn_length(-policy.h.h(), policy.mu));
    std::int64_t n_censored = 0;
    for (auto c : censored) n_censored += c;
    MetricEstimate e = make_estimate(offset + m.mean, m.se, n_trials,
                                     static_cast<double>(n_censored) / static_cast<double>(n_trials));
    if (n_censored > 0) e.warnings.push_back("some trials censored at cap");
    return e;
}

std::vector<int> MetricsEngine::default_pdc_grid() {
    return {100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
}

PdcEstimate MetricsEngine::estimate_pdc(const PolicySpec& policy, const DistributionPair& pair,
                                        const std::vector<int>& n_grid, std::int64_t trials_per_point,
                                        std::uint64_t cap) const {
    if (n_grid.empty() || !std::is_sorted(n_grid.begin(), n_grid.end()) || n_grid.front() < 2)
        throw std::invalid_argument("estimate_pdc: n_grid must be increasing with entries >= 2");
    if (n_grid.back() < 500)
        throw std::invalid_argument("estimate_pdc: max grid point must be >= 500");
    if (trials_per_point < 2) throw std::invalid_argument("estimate_pdc: trials_per_point must be >= 2");
    (void)cap;

    const int horizon = n_grid.back() - 1;  // pre-change steps needed
    const std::size_t g = n_grid.size();
    // Per trial: observation counts at each checkpoint n-1, NaN once stopped.
    std::vector<double> counts(static_cast<std::size_t>(trials_per_point) * g,
                               std::numeric_limits<double>::quiet_NaN());
    const ChangePointSpec no_change = ChangePointSpec::deterministic(kInf);
    parallel_for_trials(trials_per_point, threads_, [&](std::int64_t i) {
        ObservationStream stream(pair, no_change, trial_seed(seed_, static_cast<std::uint64_t>(i)));
        PolicyRun run(policy, pair, stream.seed());
        std::uint64_t observations = 0;
        std::size_t next_cp = 0;
        for (int n = 1; n <= horizon && next_cp < g; ++n) {
            const bool take = run.next_control();
            const double x = stream.next();
            run.step(take, x);
            observations += take ? 1 : 0;
            if (run.stopped()) return;  // tau <= n < all remaining grid points
            while (next_cp < g && n == n_grid[next_cp] - 1) {
                counts[static_cast<std::size_t>(i) * g + next_cp] = static_cast<double>(observations);
                ++next_cp;
            }
        }
    });

    PdcEstimate result;
    result.grid.reserve(g);
    for (std::size_t j = 0; j < g; ++j) {
        std::vector<double> vals;
        vals.reserve(static_cast<std::size_t>(trials_per_point));
        // Normalized by the n-1 pre-change decision slots: exact for
        // always-observing policies at finite n, same limit as 1/n.
        for (std::int64_t i = 0; i < trials_per_point; ++i) {
            const double c = counts[static_cast<std::size_t>(i) * g + j];
            if (!std::isnan(c)) vals.push_back(c / static_cast<double>(n_grid[j] - 1));
        }
        const Moments m = moments(vals);
        result.grid.push_back({n_grid[j], m.mean, m.se, m.n});
    }

    const PdcGridPoint& last = result.grid.back();
    MetricEstimate e = make_estimate(last.value, last.std_error, last.accepted);
    const double acc_rate = static_cast<double>(last.accepted) / static_cast<double>(trials_per_point);
    if (acc_rate < 0.10)
        e.warnings.push_back("conditioning acceptance below 10% at the last grid point");
    if (result.grid.size() >= 2) {
        const PdcGridPoint& prev = result.grid[result.grid.size() - 2];
        const double combined =
            std::sqrt(last.std_error * last.std_error + prev.std_error * prev.std_error);
        if (std::abs(last.value - prev.value) > 3.0 * combined)
            e.warnings.push_back("non-convergence: last two grid points differ by more than 3 SE");
    }
    result.estimate = e;
    return result;
}

BayesEstimates MetricsEngine::estimate_bayes(const PolicySpec& policy, const DistributionPair& pair,
                                             double rho, std::int64_t n_trials, std::uint64_t cap) const {
    if (!is_shiryaev_family(policy))
        throw std::invalid_argument("estimate_bayes: policy must be Shiryaev-family");
    if (policy_rho(policy) != rho)
        throw std::invalid_argument("estimate_bayes: rho must match the policy prior");
    if (n_trials < 2) throw std::invalid_argument("estimate_bayes: n_trials must be >= 2");

    struct TrialRow {
        double add;
        double pfa;
        double ano;
        std::uint8_t censored;
    };
    std::vector<TrialRow> rows(static_cast<std::size_t>(n_trials));
    const ChangePointSpec change = ChangePointSpec::geometric(rho);
    parallel_for_trials(n_trials, threads_, [&](std::int64_t i) {
        ObservationStream stream(pair, change, trial_seed(seed_, static_cast<std::uint64_t>(i)));
        const double gamma = stream.change_point();
        PolicyRun run(policy, pair, stream.seed());
        std::uint64_t pre_change_observations = 0;
        std::uint64_t n = 0;
        bool stopped = false;
        while (n < cap) {
            ++n;
            const bool take = run.next_control();
            const double x = stream.next();
            run.step(take, x);
            if (take && static_cast<double>(n) <= gamma - 1.0) ++pre_change_observations;
            if (run.stopped()) {
                stopped = true;
                break;
            }
        }
        const double tau = static_cast<double>(n);
        rows[static_cast<std::size_t>(i)] = {std::max(0.0, tau - gamma), tau < gamma ? 1.0 : 0.0,
                                             static_cast<double>(pre_change_observations),
                                             static_cast<std::uint8_t>(!stopped)};
    });

    std::vector<double> add(rows.size()), pfa(rows.size()), ano(rows.size());
    std::int64_t n_censored = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        add[i] = rows[i].add;
        pfa[i] = rows[i].pfa;
        ano[i] = rows[i].ano;
        n_censored += rows[i].censored;
    }
    const double cfrac = static_cast<double>(n_censored) / static_cast<double>(n_trials);
    const Moments ma = moments(add), mp = moments(pfa), mo = moments(ano);
    BayesEstimates out;
    out.add = make_estimate(ma.mean, ma.se, n_trials, cfrac);
    out.pfa = make_estimate(mp.mean, mp.se, n_trials, cfrac);
    out.ano = make_estimate(mo.mean, mo.se, n_trials, cfrac);
    if (n_censored > 0)
        for (auto* e : {&out.add, &out.pfa, &out.ano})
            e->warnings.push_back("some trials censored at cap");
    return out;
}

}  // namespace qcd
