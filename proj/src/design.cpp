#include "qcd/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qcd {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::vector<std::string> validate_design(const DesignSpec& spec) {
    if (!(spec.alpha > 0.0) || !(spec.alpha < 1.0))
        throw std::invalid_argument("design: alpha must lie in (0, 1)");
    if (!(spec.beta > 0.0) || spec.beta > 1.0)
        throw std::invalid_argument("design: beta must lie in (0, 1]");
    std::vector<std::string> warnings;
    if (spec.beta < 1.0 && spec.beta >= 0.9 && (spec.h.h() > 0.0 || !spec.h.finite()))
        warnings.push_back("beta near 1 with h > 0 may be unreachable: PDC stays strictly below 1");
    return warnings;
}

double threshold_for_far(double alpha) {
    if (!(alpha > 0.0) || !(alpha < 1.0)) throw std::invalid_argument("threshold_for_far: alpha in (0, 1)");
    return std::log(1.0 / alpha);
}

double mu_star(const CycleStats& stats, double beta) {
    if (!(beta > 0.0) || beta > 1.0) throw std::invalid_argument("mu_star: beta must lie in (0, 1]");
    if (beta == 1.0) return kInf;
    return stats.mean_abs_trunc_llr_neg * stats.p_neg_inf * stats.p_neg_inf / stats.mean_lambda_inf *
           beta / (1.0 - beta);
}

double pdc_approx(const CycleStats& stats, double mu) { return pdc_approx(stats, mu, stats.h); }

double pdc_approx(const CycleStats& stats, double mu, Truncation h) {
    if (!(mu > 0.0)) throw std::invalid_argument("pdc_approx: mu must be > 0");
    if (stats.terminal_sample.empty()) throw std::invalid_argument("pdc_approx: stats carry no terminal sample");
    double total = 0.0;
    for (double w : stats.terminal_sample)
        total += static_cast<double>(sojourn_length(h.apply(w), mu));
    const double mean_ceil = total / static_cast<double>(stats.terminal_sample.size());
    return stats.mean_lambda_inf / (stats.mean_lambda_inf + mean_ceil);
}

double pdc_approx_hinf(const DistributionPair& pair, double mu) {
    if (!(mu > 0.0)) throw std::invalid_argument("pdc_approx_hinf: mu must be > 0");
    return mu / (mu + pair.kl_f0_f1());
}

double mu_for_pdc_hinf(const DistributionPair& pair, double beta) {
    if (!(beta > 0.0) || !(beta < 1.0)) throw std::invalid_argument("mu_for_pdc_hinf: beta in (0, 1)");
    return beta / (1.0 - beta) * pair.kl_f0_f1();
}

CalibrationResult calibrate_threshold(const ThresholdFamily& family, const DistributionPair& pair,
                                      double alpha, double tolerance, int budget,
                                      const ProbeSettings& probe) {
    if (!(alpha > 0.0) || !(alpha < 1.0)) throw std::invalid_argument("calibrate_threshold: alpha in (0, 1)");
    if (!(tolerance > 0.0)) throw std::invalid_argument("calibrate_threshold: tolerance must be > 0");
    if (budget < 2) throw std::invalid_argument("calibrate_threshold: budget must be >= 2");

    const double target = alpha * (1.0 + tolerance);
    const double conservative = std::log(1.0 / alpha);
    MetricsEngine engine(probe.seed, probe.threads);
    CalibrationResult result;

    auto probe_far = [&](double threshold) {
        ++result.probes;
        return engine.estimate_far(family(threshold), pair, probe.n_trials, probe.cap);
    };

    // FAR is monotone nonincreasing in D within probe noise. Start at the
    // guaranteed-feasible endpoint log(1/alpha), then bisect below it.
    double lo = 0.5 * conservative;
    double hi = conservative;
    MetricEstimate at_hi = probe_far(hi);
    if (at_hi.value > target) {
        // Noise or an unusual family; fall back to the extended bracket.
        hi = conservative + 2.0;
        at_hi = probe_far(hi);
        if (at_hi.value > target) {
            result.value = conservative;
            result.verified = at_hi.value;
            result.verified_se = at_hi.std_error;
            result.warnings.push_back("budget exhausted before bracket closed; returning log(1/alpha)");
            return result;
        }
    }
    double best = hi;
    MetricEstimate best_est = at_hi;
    while (result.probes < budget && hi - lo > 0.02) {
        const double mid = 0.5 * (lo + hi);
        const MetricEstimate est = probe_far(mid);
        if (est.value <= target) {
            hi = mid;
            best = mid;
            best_est = est;
        } else {
            lo = mid;
        }
    }
    result.value = best;
    result.verified = best_est.value;
    result.verified_se = best_est.std_error;
    for (const auto& w : best_est.warnings) result.warnings.push_back(w);
    return result;
}

namespace {

MetricEstimate probe_pdc(const DistributionPair& pair, const DECuSumSpec& spec,
                         const ProbeSettings& probe) {
    MetricsEngine engine(probe.seed, probe.threads);
    const std::vector<int> grid = probe.pdc_grid.empty() ? MetricsEngine::default_pdc_grid() : probe.pdc_grid;
    return engine.estimate_pdc(spec, pair, grid, probe.n_trials, probe.cap).estimate;
}

}  // namespace

CalibrationResult calibrate_mu(const DistributionPair& pair, Truncation h, double threshold, double beta,
                               double tolerance, int budget, const ProbeSettings& probe) {
    if (!(beta > 0.0) || beta > 1.0) throw std::invalid_argument("calibrate_mu: beta must lie in (0, 1]");
    if (!(tolerance > 0.0)) throw std::invalid_argument("calibrate_mu: tolerance must be > 0");
    if (budget < 2) throw std::invalid_argument("calibrate_mu: budget must be >= 2");
    CalibrationResult result;
    if (beta == 1.0) {
        result.value = kInf;
        result.verified = 1.0;
        return result;
    }

    // Ceiling check: with h > 0, PDC <= E[lambda_inf]/(E[lambda_inf] + P_inf(logL < 0)).
    if (h.h() > 0.0 || !h.finite()) {
        const CycleStats quick = estimate_cycle_stats(pair, h, 20'000, probe.seed ^ 0x5ce11175, probe.threads);
        const double ceiling = quick.mean_lambda_inf / (quick.mean_lambda_inf + quick.p_neg_inf);
        if (beta > ceiling)
            result.warnings.push_back("beta exceeds the h-induced PDC ceiling (~" + std::to_string(ceiling) +
                                      "); constraint is slack for every mu");
    }

    const double lo_band = beta * (1.0 - tolerance);
    double best_in_band = -1.0, best_below = -1.0;
    MetricEstimate best_in_band_est, best_below_est;
    auto probe_at = [&](double mu) {
        ++result.probes;
        const MetricEstimate est = probe_pdc(pair, DECuSumSpec{threshold, mu, h}, probe);
        if (est.value <= beta && mu > best_below) {
            best_below = mu;
            best_below_est = est;
        }
        if (est.value >= lo_band && est.value <= beta && best_in_band < 0.0) {
            best_in_band = mu;
            best_in_band_est = est;
        }
        return est;
    };

    // PDC is increasing in mu. Warm-start the bracket at the h = inf
    // approximation and expand outward until it straddles the target band.
    const double mu0 = mu_for_pdc_hinf(pair, std::min(beta, 0.999));
    double lo = mu0 / 8.0;
    double hi = mu0 * 2.0;
    MetricEstimate est_hi = probe_at(hi);
    while (est_hi.value < lo_band && result.probes < budget) {
        hi *= 2.0;
        if (hi > 1e6 * pair.kl_f0_f1())
            throw InfeasibleConstraintError("calibrate_mu: beta unreachable for this h");
        est_hi = probe_at(hi);
    }
    if (est_hi.value < lo_band)
        throw InfeasibleConstraintError("calibrate_mu: beta unreachable within probe budget");
    MetricEstimate est_lo = probe_at(lo);
    while (est_lo.value > beta && result.probes < budget) {
        lo /= 4.0;
        est_lo = probe_at(lo);
    }

    while (best_in_band < 0.0 && result.probes < budget) {
        const double mid = std::sqrt(lo * hi);  // geometric bisection: mu spans decades
        const MetricEstimate est = probe_at(mid);
        if (est.value > beta)
            hi = mid;
        else if (est.value < lo_band)
            lo = mid;
    }
    if (best_in_band >= 0.0) {
        result.value = best_in_band;
        result.verified = best_in_band_est.value;
        result.verified_se = best_in_band_est.std_error;
        for (const auto& w : best_in_band_est.warnings) result.warnings.push_back(w);
        return result;
    }
    if (best_below < 0.0)
        throw InfeasibleConstraintError("calibrate_mu: no probed mu satisfied PDC <= beta");
    // Band not hit within budget; return the largest probed mu that stayed at
    // or below beta (conservative side of the constraint).
    result.value = best_below;
    result.verified = best_below_est.value;
    result.verified_se = best_below_est.std_error;
    result.warnings.push_back("probe budget exhausted before PDC entered the target band");
    for (const auto& w : best_below_est.warnings) result.warnings.push_back(w);
    return result;
}

CalibrationResult calibrate_mu_renewal(const DistributionPair& pair, Truncation h, double threshold,
                                       double beta, double tolerance, int budget,
                                       const ProbeSettings& probe) {
    if (!(beta > 0.0) || beta > 1.0) throw std::invalid_argument("calibrate_mu_renewal: beta in (0, 1]");
    if (!(tolerance > 0.0)) throw std::invalid_argument("calibrate_mu_renewal: tolerance must be > 0");
    if (budget < 2) throw std::invalid_argument("calibrate_mu_renewal: budget must be >= 2");
    CalibrationResult result;
    if (beta == 1.0) {
        result.value = kInf;
        result.verified = 1.0;
        return result;
    }

    const double lo_band = beta * (1.0 - tolerance);
    double best_in_band = -1.0, best_below = -1.0;
    MetricEstimate best_in_band_est, best_below_est;
    auto probe_at = [&](double mu) {
        ++result.probes;
        // Common random numbers: the same seed reuses the same cycle sample,
        // so across probes only the mu-dependent sojourn term moves.
        const ConditionalCycleMeans mc = estimate_conditional_cycle_means(
            pair, threshold, h, mu, Regime::pre_change, probe.n_trials, probe.seed, probe.threads,
            probe.cap);
        MetricEstimate est = make_estimate(mc.pdc, mc.pdc_se, mc.accepted);
        if (est.value <= beta && mu > best_below) {
            best_below = mu;
            best_below_est = est;
        }
        if (est.value >= lo_band && est.value <= beta && best_in_band < 0.0) {
            best_in_band = mu;
            best_in_band_est = est;
        }
        return est;
    };

    const double mu0 = mu_for_pdc_hinf(pair, std::min(beta, 0.999));
    double lo = mu0 / 8.0;
    double hi = mu0 * 2.0;
    MetricEstimate est_hi = probe_at(hi);
    while (est_hi.value < lo_band && result.probes < budget) {
        hi *= 2.0;
        if (hi > 1e6 * pair.kl_f0_f1())
            throw InfeasibleConstraintError("calibrate_mu_renewal: beta unreachable for this h");
        est_hi = probe_at(hi);
    }
    if (est_hi.value < lo_band)
        throw InfeasibleConstraintError("calibrate_mu_renewal: beta unreachable within probe budget");
    MetricEstimate est_lo = probe_at(lo);
    while (est_lo.value > beta && result.probes < budget) {
        lo /= 4.0;
        est_lo = probe_at(lo);
    }
    while (best_in_band < 0.0 && result.probes < budget) {
        const double mid = std::sqrt(lo * hi);
        const MetricEstimate est = probe_at(mid);
        if (est.value > beta)
            hi = mid;
        else if (est.value < lo_band)
            lo = mid;
    }
    if (best_in_band >= 0.0) {
        result.value = best_in_band;
        result.verified = best_in_band_est.value;
        result.verified_se = best_in_band_est.std_error;
        return result;
    }
    if (best_below < 0.0)
        throw InfeasibleConstraintError("calibrate_mu_renewal: no probed mu satisfied PDC <= beta");
    result.value = best_below;
    result.verified = best_below_est.value;
    result.verified_se = best_below_est.std_error;
    result.warnings.push_back("probe budget exhausted before PDC entered the target band");
    return result;
}

CalibrationResult calibrate_shiryaev_lower(const DistributionPair& pair, double upper, double rho,
                                           double zeta, double tolerance, int budget,
                                           const ProbeSettings& probe) {
    if (!(zeta > 0.0)) throw std::invalid_argument("calibrate_shiryaev_lower: zeta must be > 0");
    if (!(tolerance > 0.0)) throw std::invalid_argument("calibrate_shiryaev_lower: tolerance must be > 0");
    if (budget < 2) throw std::invalid_argument("calibrate_shiryaev_lower: budget must be >= 2");
    MetricsEngine engine(probe.seed, probe.threads);
    CalibrationResult result;

    const double lo_band = zeta * (1.0 - tolerance);
    double best_in_band = -1.0, best_ok = -1.0;
    MetricEstimate best_in_band_est, best_ok_est;
    auto probe_ano = [&](double lower) {
        ++result.probes;
        const MetricEstimate est =
            engine.estimate_bayes(DEShiryaevSpec{upper, lower, rho}, pair, rho, probe.n_trials, probe.cap)
                .ano;
        if (est.value <= zeta && (best_ok < 0.0 || lower < best_ok)) {
            best_ok = lower;
            best_ok_est = est;
        }
        if (est.value >= lo_band && est.value <= zeta && best_in_band < 0.0) {
            best_in_band = lower;
            best_in_band_est = est;
        }
        return est;
    };

    // ANO is decreasing in B (more skipping). B = 0 gives the unconstrained
    // ANO; if that is already within the constraint no skipping is needed.
    const MetricEstimate at_zero = probe_ano(0.0);
    if (at_zero.value <= zeta) {
        result.value = 0.0;
        result.verified = at_zero.value;
        result.verified_se = at_zero.std_error;
        return result;
    }
    double lo = 0.0;
    double hi = upper * (1.0 - 1e-6);
    while (best_in_band < 0.0 && result.probes < budget) {
        const double mid = 0.5 * (lo + hi);
        const MetricEstimate est = probe_ano(mid);
        if (est.value > zeta)
            lo = mid;
        else if (est.value < lo_band)
            hi = mid;
    }
    if (best_in_band >= 0.0) {
        result.value = best_in_band;
        result.verified = best_in_band_est.value;
        result.verified_se = best_in_band_est.std_error;
        for (const auto& w : best_in_band_est.warnings) result.warnings.push_back(w);
        return result;
    }
    if (best_ok < 0.0)
        throw InfeasibleConstraintError("calibrate_shiryaev_lower: no probed B satisfied ANO <= zeta");
    result.value = best_ok;
    result.verified = best_ok_est.value;
    result.verified_se = best_ok_est.std_error;
    result.warnings.push_back("probe budget exhausted before ANO entered the target band");
    for (const auto& w : best_ok_est.warnings) result.warnings.push_back(w);
    return result;
}

}  // namespace qcd
