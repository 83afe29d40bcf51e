#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qcd/detectors.hpp"
#include "qcd/distributions.hpp"
#include "qcd/metrics.hpp"
#include "qcd/renewal.hpp"

namespace qcd {

struct InfeasibleConstraintError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Constraint triple for a DE-CuSum design.
struct DesignSpec {
    double alpha;  // FAR constraint, in (0, 1)
    double beta;   // PDC constraint, in (0, 1]
    Truncation h;
};

// Validation warnings (beta near 1 with h > 0 may be unreachable).
std::vector<std::string> validate_design(const DesignSpec& spec);

// D = log(1/alpha) meets FAR <= alpha for CuSum and DE-CuSum alike.
double threshold_for_far(double alpha);

// The sufficient mu from the mu* bound: PDC(D, mu*, h) <= beta for every D.
// Conservative by construction; returns +inf when beta = 1 (no constraint).
double mu_star(const CycleStats& stats, double beta);

// PDC approximation E[lambda_inf] / (E[lambda_inf] + E[ceil(|W^{h+}|/mu)]),
// evaluated on the stored terminal sample with the stats' truncation. The
// sample is kept untruncated, so the overload re-evaluates any (h, mu)
// without re-simulation.
double pdc_approx(const CycleStats& stats, double mu);
double pdc_approx(const CycleStats& stats, double mu, Truncation h);

// h = inf simplification: PDC ~ mu / (mu + D(f0||f1)).
double pdc_approx_hinf(const DistributionPair& pair, double mu);

// Inverse of the simplification: mu = beta/(1-beta) * D(f0||f1).
double mu_for_pdc_hinf(const DistributionPair& pair, double beta);

struct CalibrationResult {
    double value = 0.0;        // calibrated D or mu
    double verified = 0.0;     // FAR or PDC at the returned value
    double verified_se = 0.0;
    int probes = 0;
    std::vector<std::string> warnings;
};

// Maps a threshold to a complete policy (the family with D left free).
using ThresholdFamily = std::function<PolicySpec(double threshold)>;

// Probe settings for calibration runs. Common random numbers: every probe in
// one calibration reuses the same seed, so bisection sees a deterministic
// noisy-monotone function.
struct ProbeSettings {
    std::int64_t n_trials = 10'000;
    std::uint64_t cap = 10'000'000;
    std::uint64_t seed = 0;
    int threads = 0;
    std::vector<int> pdc_grid = {};  // empty -> engine default {100..1000}
};

// Bisection on D over [0.5 log(1/alpha), log(1/alpha) + 2]; returns the
// smallest probed D whose estimated FAR is <= alpha (1 + tolerance). Falls
// back to log(1/alpha) with a warning if the budget runs out first.
CalibrationResult calibrate_threshold(const ThresholdFamily& family, const DistributionPair& pair,
                                      double alpha, double tolerance, int budget,
                                      const ProbeSettings& probe);

// Bisection on mu targeting estimated PDC in [beta (1 - tolerance), beta] at
// the given D and h. beta = 1 returns the +inf sentinel (degenerate to
// CuSum-equivalent behavior: no skipping). Throws InfeasibleConstraintError
// when beta is unreachable for this h. Probes the direct conditional-survival
// estimator; use the renewal variant below when E_inf[tau_W] is small against
// the plateau grid.
CalibrationResult calibrate_mu(const DistributionPair& pair, Truncation h, double threshold, double beta,
                               double tolerance, int budget, const ProbeSettings& probe);

// Same target band, but probing the renewal expression
// PDC = E[lambda_D | below] / (E[lambda_D | below] + E[T | below]) from SPRT
// cycle simulation. Valid at any threshold: cycle acceptance does not decay
// with D, so this is the route for thresholds where direct conditioning on
// {tau >= n} starves.
CalibrationResult calibrate_mu_renewal(const DistributionPair& pair, Truncation h, double threshold,
                                       double beta, double tolerance, int budget,
                                       const ProbeSettings& probe);

// Bisection on the lower threshold B of a DE-Shiryaev policy so that the
// estimated ANO lands in [zeta (1 - tolerance), zeta] at the given A and rho.
CalibrationResult calibrate_shiryaev_lower(const DistributionPair& pair, double upper, double rho,
                                           double zeta, double tolerance, int budget,
                                           const ProbeSettings& probe);

}  // namespace qcd
