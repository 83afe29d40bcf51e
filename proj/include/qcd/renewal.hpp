#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qcd/detectors.hpp"
#include "qcd/distributions.hpp"

namespace qcd {

struct InsufficientDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DiagnosticError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic sojourn T(x, 0, mu) = ceil(-x/mu): the exact number of
// W' = min(W + mu, 0) steps from x back to 0, under the same recompute-from-
// origin arithmetic the DE-CuSum skip ramp uses. Requires x <= 0. The
// general T(x, y, mu) with y != 0 is not needed anywhere and stays
// unimplemented/untested.
std::int64_t sojourn_length(double x, double mu);

enum class Regime { pre_change, post_change };

struct SprtCycleOutcome {
    std::int64_t lambda = 0;   // cycle length lambda_D
    double terminal_W = 0.0;   // W at lambda_D
    bool crossed_upper = false;  // terminal_W > D; otherwise terminal_W < 0
};

// One SPRT cycle from W = 0 with boundaries 0 and D (exit strictly outside
// [0, D]). D = +inf is the lower-boundary-only lambda_inf cycle. No
// truncation is applied inside the cycle. Throws InsufficientDataError if the
// cycle exceeds cap steps.
SprtCycleOutcome simulate_sprt_cycle(const DistributionPair& pair, double threshold, Regime regime,
                                     Rng& rng, std::uint64_t cap = 10'000'000);

// Monte Carlo moments of the lambda_inf cycle and of the first-step LLR sign,
// with standard errors. Carries the raw terminal-value sample (capped at 1e5)
// so ceiling expectations can be re-evaluated for any (h, mu) later.
struct CycleStats {
    double mean_lambda_inf = 0.0, se_lambda_inf = 0.0;    // E_inf[lambda_inf]
    double mean_abs_W = 0.0, se_abs_W = 0.0;              // E_inf[|W_{lambda_inf}|]
    double mean_abs_W_hplus = 0.0, se_abs_W_hplus = 0.0;  // E_inf[|W^{h+}_{lambda_inf}|]
    double p_neg_inf = 0.0, se_p_neg_inf = 0.0;           // P_inf(log L(X_1) < 0)
    double p_neg_1 = 0.0, se_p_neg_1 = 0.0;               // P_1(log L(X_1) < 0)
    double mean_abs_trunc_llr_neg = 0.0, se_abs_trunc_llr_neg = 0.0;
    std::int64_t n_trials = 0;
    Truncation h = Truncation::none();
    std::vector<double> terminal_sample;  // raw W_{lambda_inf}, untruncated
};

// Simulates n_trials lambda_inf cycles under f0 (plus one f1 draw per trial
// for P_1(log L < 0)). Throws DiagnosticError if the Wald identity
// E_inf[|W|] = D(f0||f1) E_inf[lambda_inf] fails beyond 5 combined SE.
CycleStats estimate_cycle_stats(const DistributionPair& pair, Truncation h, std::int64_t n_trials,
                                std::uint64_t seed, int threads = 1);

// Closed-form bounds on the conditional sojourn mean; all ratios on the log scale.
double bound_T_L_inf(const CycleStats& stats, double mu);
double bound_T_U_inf(const CycleStats& stats, double mu);
double bound_T_U_1(const CycleStats& stats, double mu);

// PDC = lambda / (lambda + T), both means conditioned on {W_{lambda_D} < 0}.
double pdc_renewal(double lambda_cond_mean, double sojourn_cond_mean);

// Rejection estimates of the cycle quantities conditioned on exit below 0:
// E[lambda_D | W < 0] and E[T((W)^{h+}, 0, mu) | W < 0], plus the
// unconditional E[lambda_D] and P(W_{lambda_D} < 0).
struct ConditionalCycleMeans {
    double lambda_mean = 0.0, lambda_se = 0.0;
    double sojourn_mean = 0.0, sojourn_se = 0.0;
    double lambda_all_mean = 0.0, lambda_all_se = 0.0;
    double p_below = 0.0, p_below_se = 0.0;
    double pdc = 0.0, pdc_se = 0.0;  // renewal formula with delta-method SE
    std::int64_t accepted = 0;
    std::int64_t n_trials = 0;
};

// Throws InsufficientDataError when fewer than 200 cycles exit below 0.
ConditionalCycleMeans estimate_conditional_cycle_means(const DistributionPair& pair, double threshold,
                                                       Truncation h, double mu, Regime regime,
                                                       std::int64_t n_trials, std::uint64_t seed,
                                                       int threads = 1, std::uint64_t cap = 10'000'000);

}  // namespace qcd
