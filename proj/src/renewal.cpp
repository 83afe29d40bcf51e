#include "qcd/renewal.hpp"

#include <cmath>
#include <limits>

#include "qcd/parallel.hpp"

namespace qcd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::int64_t kTerminalSampleCap = 100'000;

struct MeanVar {
    double mean = 0.0;
    double se = 0.0;
};

// Mean and standard error over a strided view of per-trial values.
template <typename Get>
MeanVar mean_se(std::int64_t n, Get&& get) {
    if (n <= 0) return {};
    double sum = 0.0;
    for (std::int64_t i = 0; i < n; ++i) sum += get(i);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double d = get(i) - mean;
        ss += d * d;
    }
    const double var = n > 1 ? ss / static_cast<double>(n - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace

std::int64_t sojourn_length(double x, double mu) {
    if (!(mu > 0.0) || !std::isfinite(mu)) throw std::invalid_argument("sojourn_length: mu must be > 0");
    if (std::isnan(x) || x > 0.0) throw std::domain_error("sojourn_length: x must be <= 0");
    if (x == 0.0) return 0;
    if (x == -kInf) throw std::domain_error("sojourn_length: x must be finite");
    // Start from the ceiling estimate and settle on the exact first k with
    // x + k*mu >= 0; the float division can be off by one either way.
    std::int64_t k = static_cast<std::int64_t>(std::ceil(-x / mu)) - 2;
    if (k < 0) k = 0;
    while (x + static_cast<double>(k) * mu < 0.0) ++k;
    return k;
}

SprtCycleOutcome simulate_sprt_cycle(const DistributionPair& pair, double threshold, Regime regime,
                                     Rng& rng, std::uint64_t cap) {
    if (std::isnan(threshold) || threshold <= 0.0)
        throw std::invalid_argument("simulate_sprt_cycle: threshold must be > 0 (or +inf)");
    const DistributionModel& model = regime == Regime::pre_change ? pair.f0() : pair.f1();
    double W = 0.0;
    for (std::uint64_t n = 1; n <= cap; ++n) {
        W += pair.log_likelihood_ratio(model.sample(rng));
        if (W < 0.0 || W > threshold)
            return {static_cast<std::int64_t>(n), W, W > threshold};
    }
    throw InsufficientDataError("simulate_sprt_cycle: cycle censored at cap");
}

CycleStats estimate_cycle_stats(const DistributionPair& pair, Truncation h, std::int64_t n_trials,
                                std::uint64_t seed, int threads) {
    if (n_trials < 1000) throw std::invalid_argument("estimate_cycle_stats: n_trials must be >= 1000");

    struct TrialRow {
        double lambda;
        double abs_W;
        double abs_W_hplus;
        double terminal;
        double first_llr;
        std::uint8_t first_neg;
        std::uint8_t f1_neg;
    };
    std::vector<TrialRow> rows(static_cast<std::size_t>(n_trials));

    parallel_for_trials(n_trials, threads, [&](std::int64_t i) {
        Rng rng(trial_seed(seed, static_cast<std::uint64_t>(i)));
        double W = 0.0;
        double first = 0.0;
        std::int64_t steps = 0;
        while (true) {
            const double llr = pair.log_likelihood_ratio(pair.f0().sample(rng));
            ++steps;
            if (steps == 1) first = llr;
            W += llr;
            if (W < 0.0) break;
            if (steps >= 10'000'000)
                throw InsufficientDataError("estimate_cycle_stats: lambda_inf cycle censored at cap");
        }
        const double x1 = pair.f1().sample(rng);
        rows[static_cast<std::size_t>(i)] = {
            static_cast<double>(steps),          std::abs(W), std::abs(h.apply(W)), W, first,
            static_cast<std::uint8_t>(first < 0.0),
            static_cast<std::uint8_t>(pair.log_likelihood_ratio(x1) < 0.0)};
    });

    CycleStats stats;
    stats.n_trials = n_trials;
    stats.h = h;

    auto lam = mean_se(n_trials, [&](std::int64_t i) { return rows[i].lambda; });
    auto absw = mean_se(n_trials, [&](std::int64_t i) { return rows[i].abs_W; });
    auto abswh = mean_se(n_trials, [&](std::int64_t i) { return rows[i].abs_W_hplus; });
    auto pneg = mean_se(n_trials, [&](std::int64_t i) { return double(rows[i].first_neg); });
    auto pneg1 = mean_se(n_trials, [&](std::int64_t i) { return double(rows[i].f1_neg); });
    stats.mean_lambda_inf = lam.mean;
    stats.se_lambda_inf = lam.se;
    stats.mean_abs_W = absw.mean;
    stats.se_abs_W = absw.se;
    stats.mean_abs_W_hplus = abswh.mean;
    stats.se_abs_W_hplus = abswh.se;
    stats.p_neg_inf = pneg.mean;
    stats.se_p_neg_inf = pneg.se;
    stats.p_neg_1 = pneg1.mean;
    stats.se_p_neg_1 = pneg1.se;

    std::vector<double> neg_llrs;
    for (const auto& r : rows)
        if (r.first_neg) neg_llrs.push_back(std::abs(h.apply(r.first_llr)));
    auto trunc = mean_se(static_cast<std::int64_t>(neg_llrs.size()),
                         [&](std::int64_t i) { return neg_llrs[static_cast<std::size_t>(i)]; });
    stats.mean_abs_trunc_llr_neg = trunc.mean;
    stats.se_abs_trunc_llr_neg = trunc.se;

    const std::int64_t keep = std::min<std::int64_t>(n_trials, kTerminalSampleCap);
    stats.terminal_sample.reserve(static_cast<std::size_t>(keep));
    for (std::int64_t i = 0; i < keep; ++i)
        stats.terminal_sample.push_back(rows[static_cast<std::size_t>(i)].terminal);

    // Wald identity cross-check: E_inf[|W_{lambda_inf}|] = D(f0||f1) E_inf[lambda_inf].
    const double kl = pair.kl_f0_f1();
    const double gap = std::abs(stats.mean_abs_W - kl * stats.mean_lambda_inf);
    const double combined = std::sqrt(stats.se_abs_W * stats.se_abs_W +
                                      kl * kl * stats.se_lambda_inf * stats.se_lambda_inf);
    if (gap > 5.0 * combined)
        throw DiagnosticError("estimate_cycle_stats: Wald identity violated beyond 5 SE; "
                              "log-likelihood-ratio implementation suspect");
    return stats;
}

double bound_T_L_inf(const CycleStats& stats, double mu) {
    if (!(mu > 0.0)) throw std::invalid_argument("bound_T_L_inf: mu must be > 0");
    return stats.mean_abs_trunc_llr_neg / mu * stats.p_neg_inf;
}

double bound_T_U_inf(const CycleStats& stats, double mu) {
    if (!(mu > 0.0)) throw std::invalid_argument("bound_T_U_inf: mu must be > 0");
    return stats.mean_abs_W_hplus / (mu * stats.p_neg_inf) + 1.0;
}

double bound_T_U_1(const CycleStats& stats, double mu) {
    if (!(mu > 0.0)) throw std::invalid_argument("bound_T_U_1: mu must be > 0");
    return stats.mean_abs_W_hplus / (mu * stats.p_neg_1) + 1.0;
}

double pdc_renewal(double lambda_cond_mean, double sojourn_cond_mean) {
    if (!(lambda_cond_mean > 0.0)) throw std::invalid_argument("pdc_renewal: lambda mean must be > 0");
    if (sojourn_cond_mean < 0.0) throw std::invalid_argument("pdc_renewal: sojourn mean must be >= 0");
    return lambda_cond_mean / (lambda_cond_mean + sojourn_cond_mean);
}

ConditionalCycleMeans estimate_conditional_cycle_means(const DistributionPair& pair, double threshold,
                                                       Truncation h, double mu, Regime regime,
                                                       std::int64_t n_trials, std::uint64_t seed,
                                                       int threads, std::uint64_t cap) {
    if (n_trials < 1) throw std::invalid_argument("estimate_conditional_cycle_means: n_trials must be >= 1");
    struct TrialRow {
        double lambda;
        double sojourn;
        std::uint8_t below;
    };
    std::vector<TrialRow> rows(static_cast<std::size_t>(n_trials));
    parallel_for_trials(n_trials, threads, [&](std::int64_t i) {
        Rng rng(trial_seed(seed, static_cast<std::uint64_t>(i)));
        const SprtCycleOutcome out = simulate_sprt_cycle(pair, threshold, regime, rng, cap);
        TrialRow row{static_cast<double>(out.lambda), 0.0, 0};
        if (!out.crossed_upper) {
            row.below = 1;
            row.sojourn = static_cast<double>(sojourn_length(h.apply(out.terminal_W), mu));
        }
        rows[static_cast<std::size_t>(i)] = row;
    });

    ConditionalCycleMeans result;
    result.n_trials = n_trials;
    auto all = mean_se(n_trials, [&](std::int64_t i) { return rows[i].lambda; });
    result.lambda_all_mean = all.mean;
    result.lambda_all_se = all.se;
    auto below = mean_se(n_trials, [&](std::int64_t i) { return double(rows[i].below); });
    result.p_below = below.mean;
    result.p_below_se = below.se;

    std::vector<double> lam, soj;
    for (const auto& r : rows) {
        if (!r.below) continue;
        lam.push_back(r.lambda);
        soj.push_back(r.sojourn);
    }
    result.accepted = static_cast<std::int64_t>(lam.size());
    if (result.accepted < 200)
        throw InsufficientDataError(
            "estimate_conditional_cycle_means: fewer than 200 cycles exited below 0");

    const std::int64_t m = result.accepted;
    auto lamc = mean_se(m, [&](std::int64_t i) { return lam[static_cast<std::size_t>(i)]; });
    auto sojc = mean_se(m, [&](std::int64_t i) { return soj[static_cast<std::size_t>(i)]; });
    result.lambda_mean = lamc.mean;
    result.lambda_se = lamc.se;
    result.sojourn_mean = sojc.mean;
    result.sojourn_se = sojc.se;

    // Delta-method SE for PDC = a/(a+b), with the sample covariance of
    // (lambda, T) over accepted cycles.
    const double a = lamc.mean, b = sojc.mean, s = a + b;
    double cov = 0.0;
    for (std::int64_t i = 0; i < m; ++i)
        cov += (lam[static_cast<std::size_t>(i)] - a) * (soj[static_cast<std::size_t>(i)] - b);
    cov = m > 1 ? cov / static_cast<double>(m - 1) / static_cast<double>(m) : 0.0;
    const double va = lamc.se * lamc.se, vb = sojc.se * sojc.se;
    const double ga = b / (s * s), gb = -a / (s * s);
    result.pdc = pdc_renewal(a, b);
    result.pdc_se = std::sqrt(std::max(0.0, ga * ga * va + gb * gb * vb + 2.0 * ga * gb * cov));
    return result;
}

}  // namespace qcd
