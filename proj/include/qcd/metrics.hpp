#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qcd/detectors.hpp"
#include "qcd/distributions.hpp"

namespace qcd {

// Monte Carlo estimate with standard error and a 95% CI. Warnings are never
// dropped: a flagged estimate stays flagged through every consumer.
struct MetricEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t n_trials = 0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double censored_fraction = 0.0;
    std::vector<std::string> warnings;

    bool flagged() const { return !warnings.empty(); }
};

MetricEstimate make_estimate(double value, double std_error, std::int64_t n_trials,
                             double censored_fraction = 0.0);

struct CaddPoint {
    int n = 0;
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t accepted = 0;
    std::int64_t trials = 0;
};

// Conditional-delay profile over change points n = 1..n_max.
struct CaddProfile {
    std::vector<CaddPoint> per_n;
    int argmax_n = 0;
    double sup_value = 0.0;
    double sup_std_error = 0.0;
    std::vector<std::string> warnings;

    bool flagged() const { return !warnings.empty(); }
};

struct PdcGridPoint {
    int n = 0;
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t accepted = 0;
};

// Plateau estimate of PDC with the per-grid-point diagnostics kept.
struct PdcEstimate {
    MetricEstimate estimate;  // last grid point
    std::vector<PdcGridPoint> grid;
};

struct BayesEstimates {
    MetricEstimate add;
    MetricEstimate pfa;
    MetricEstimate ano;
};

// Monte Carlo metric engine. Trials fan out across threads with per-trial
// seeds and merge in trial-index order, so results do not depend on the
// worker count.
class MetricsEngine {
  public:
    explicit MetricsEngine(std::uint64_t seed, int threads = 0) : seed_(seed), threads_(threads) {}

    std::uint64_t seed() const { return seed_; }
    int threads() const { return threads_; }

    // FAR = 1 / E_inf[tau] with delta-method SE. Censored trials count at cap
    // and are flagged; a censored fraction above 1% marks the estimate
    // unreliable.
    MetricEstimate estimate_far(const PolicySpec& policy, const DistributionPair& pair,
                                std::int64_t n_trials, std::uint64_t cap = 10'000'000) const;

    // E_n[tau - n | tau >= n] for n = 1..n_max, plus the supremum.
    CaddProfile estimate_cadd(const PolicySpec& policy, const DistributionPair& pair, int n_max,
                              std::int64_t trials_per_n, std::uint64_t cap = 10'000'000) const;

    // WADD(DE-CuSum) = ceil(h/mu) + E_1[tau_W]; requires finite h.
    MetricEstimate estimate_wadd_decusum(const DECuSumSpec& policy, const DistributionPair& pair,
                                         std::int64_t n_trials, std::uint64_t cap = 10'000'000) const;

    // (1/n) E_n[sum_{k<n} M_k | tau >= n] on an increasing grid; returns the
    // plateau (last grid point) and flags non-convergence or low acceptance.
    PdcEstimate estimate_pdc(const PolicySpec& policy, const DistributionPair& pair,
                             const std::vector<int>& n_grid, std::int64_t trials_per_point,
                             std::uint64_t cap = 10'000'000) const;

    // ADD, PFA, ANO under a geometric change point matching the policy prior.
    BayesEstimates estimate_bayes(const PolicySpec& policy, const DistributionPair& pair, double rho,
                                  std::int64_t n_trials, std::uint64_t cap = 10'000'000) const;

    static std::vector<int> default_pdc_grid();

  private:
    std::uint64_t seed_;
    int threads_;
};

}  // namespace qcd
