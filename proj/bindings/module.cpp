#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <limits>
#include <optional>
#include <variant>

#include "qcd/design.hpp"
#include "qcd/detectors.hpp"
#include "qcd/distributions.hpp"
#include "qcd/metrics.hpp"
#include "qcd/renewal.hpp"

namespace py = pybind11;
using namespace qcd;

namespace {

Truncation truncation_from(double h) { return Truncation::from_value(h); }

ChangePointSpec change_from(py::object change, std::optional<double> rho) {
    if (rho) return ChangePointSpec::geometric(*rho);
    if (change.is_none()) return ChangePointSpec::deterministic(std::numeric_limits<double>::infinity());
    return ChangePointSpec::deterministic(py::cast<double>(change));
}

py::dict estimate_to_dict(const MetricEstimate& e) {
    py::dict d;
    d["value"] = e.value;
    d["std_error"] = e.std_error;
    d["n_trials"] = e.n_trials;
    d["ci95"] = py::make_tuple(e.ci_lo, e.ci_hi);
    d["censored_fraction"] = e.censored_fraction;
    d["warnings"] = e.warnings;
    return d;
}

}  // namespace

PYBIND11_MODULE(qcdlab, m) {
    m.doc() = "Quickest change detection: CuSum / DE-CuSum / Shiryaev / DE-Shiryaev detectors, "
              "Monte Carlo metrics, and design tools";

    // ---- distributions -----------------------------------------------------
    py::class_<DistributionModel>(m, "DistributionModel")
        .def_static("gaussian", &DistributionModel::gaussian, py::arg("mean"), py::arg("var"))
        .def_static("bernoulli", &DistributionModel::bernoulli, py::arg("p"))
        .def_static("tabular", &DistributionModel::tabular, py::arg("support"), py::arg("probs"))
        .def("log_density", &DistributionModel::log_density, py::arg("x"))
        .def("mean", &DistributionModel::mean)
        .def("in_support", &DistributionModel::in_support, py::arg("x"));

    m.def("gaussian", &DistributionModel::gaussian, py::arg("mean"), py::arg("var"));
    m.def("bernoulli", &DistributionModel::bernoulli, py::arg("p"));
    m.def("tabular", &DistributionModel::tabular, py::arg("support"), py::arg("probs"));

    py::class_<DistributionPair>(m, "DistributionPair")
        .def(py::init<DistributionModel, DistributionModel>(), py::arg("f0"), py::arg("f1"))
        .def_property_readonly("kl_f1_f0", &DistributionPair::kl_f1_f0)
        .def_property_readonly("kl_f0_f1", &DistributionPair::kl_f0_f1)
        .def("log_likelihood_ratio", &DistributionPair::log_likelihood_ratio, py::arg("x"));

    // ---- policies ----------------------------------------------------------
    // Registered per-family spec classes; functions taking a PolicySpec
    // accept any of them through the variant caster.
    py::class_<CuSumSpec>(m, "CuSumSpec").def_readonly("threshold", &CuSumSpec::threshold);
    py::class_<DECuSumSpec>(m, "DECuSumSpec")
        .def_readonly("threshold", &DECuSumSpec::threshold)
        .def_readonly("mu", &DECuSumSpec::mu);
    py::class_<ShiryaevSpec>(m, "ShiryaevSpec").def_readonly("upper", &ShiryaevSpec::upper);
    py::class_<DEShiryaevSpec>(m, "DEShiryaevSpec")
        .def_readonly("upper", &DEShiryaevSpec::upper)
        .def_readonly("lower", &DEShiryaevSpec::lower);
    py::class_<FractionalCuSumSpec>(m, "FractionalCuSumSpec")
        .def_readonly("threshold", &FractionalCuSumSpec::threshold)
        .def_readonly("beta", &FractionalCuSumSpec::beta);
    py::class_<FractionalShiryaevSpec>(m, "FractionalShiryaevSpec")
        .def_readonly("upper", &FractionalShiryaevSpec::upper)
        .def_readonly("beta", &FractionalShiryaevSpec::beta);

    m.def("cusum", [](double D) { return CuSumSpec{D}; }, py::arg("D"));
    m.def(
        "de_cusum",
        [](double D, double mu, double h) { return DECuSumSpec{D, mu, truncation_from(h)}; },
        py::arg("D"), py::arg("mu"), py::arg("h") = std::numeric_limits<double>::infinity());
    m.def("shiryaev", [](double A, double rho) { return ShiryaevSpec{A, rho}; }, py::arg("A"),
          py::arg("rho"));
    m.def("de_shiryaev", [](double A, double B, double rho) { return DEShiryaevSpec{A, B, rho}; },
          py::arg("A"), py::arg("B"), py::arg("rho"));
    m.def("fractional_cusum", [](double D, double beta) { return FractionalCuSumSpec{D, beta}; },
          py::arg("D"), py::arg("beta"));
    m.def(
        "fractional_shiryaev",
        [](double A, double rho, double beta) { return FractionalShiryaevSpec{A, rho, beta}; },
        py::arg("A"), py::arg("rho"), py::arg("beta"));

    // ---- traces ------------------------------------------------------------
    py::class_<Trace>(m, "Trace")
        .def_readonly("decisions", &Trace::decisions)
        .def_readonly("statistic_path", &Trace::statistic_path)
        .def_readonly("tau", &Trace::tau)
        .def_readonly("censored", &Trace::censored)
        .def_readonly("observations_used", &Trace::observations_used);

    m.def(
        "run_policy",
        [](const PolicySpec& policy, const DistributionPair& pair, py::object change,
           std::optional<double> rho, std::uint64_t seed, std::uint64_t cap) {
            ObservationStream stream(pair, change_from(change, rho), seed);
            return run_policy(policy, stream, cap);
        },
        py::arg("policy"), py::arg("pair"), py::arg("change_point") = py::none(),
        py::arg("geometric_rho") = py::none(), py::arg("seed") = 0, py::arg("cap") = 1'000'000,
        "Drive a policy over a seeded stream; change_point None means no change");

    // ---- renewal -----------------------------------------------------------
    m.def("sojourn_length", &sojourn_length, py::arg("x"), py::arg("mu"));

    py::class_<CycleStats>(m, "CycleStats")
        .def_readonly("mean_lambda_inf", &CycleStats::mean_lambda_inf)
        .def_readonly("se_lambda_inf", &CycleStats::se_lambda_inf)
        .def_readonly("mean_abs_W", &CycleStats::mean_abs_W)
        .def_readonly("se_abs_W", &CycleStats::se_abs_W)
        .def_readonly("mean_abs_W_hplus", &CycleStats::mean_abs_W_hplus)
        .def_readonly("p_neg_inf", &CycleStats::p_neg_inf)
        .def_readonly("p_neg_1", &CycleStats::p_neg_1)
        .def_readonly("mean_abs_trunc_llr_neg", &CycleStats::mean_abs_trunc_llr_neg)
        .def_readonly("n_trials", &CycleStats::n_trials)
        .def_readonly("terminal_sample", &CycleStats::terminal_sample);

    m.def(
        "estimate_cycle_stats",
        [](const DistributionPair& pair, double h, std::int64_t n_trials, std::uint64_t seed, int threads) {
            return estimate_cycle_stats(pair, truncation_from(h), n_trials, seed, threads);
        },
        py::arg("pair"), py::arg("h") = std::numeric_limits<double>::infinity(),
        py::arg("n_trials") = 100'000, py::arg("seed") = 0, py::arg("threads") = 0);

    m.def("bound_T_L_inf", &bound_T_L_inf, py::arg("stats"), py::arg("mu"));
    m.def("bound_T_U_inf", &bound_T_U_inf, py::arg("stats"), py::arg("mu"));
    m.def("bound_T_U_1", &bound_T_U_1, py::arg("stats"), py::arg("mu"));
    m.def("pdc_renewal", &pdc_renewal, py::arg("lambda_cond_mean"), py::arg("sojourn_cond_mean"));

    py::class_<ConditionalCycleMeans>(m, "ConditionalCycleMeans")
        .def_readonly("lambda_mean", &ConditionalCycleMeans::lambda_mean)
        .def_readonly("lambda_se", &ConditionalCycleMeans::lambda_se)
        .def_readonly("sojourn_mean", &ConditionalCycleMeans::sojourn_mean)
        .def_readonly("sojourn_se", &ConditionalCycleMeans::sojourn_se)
        .def_readonly("lambda_all_mean", &ConditionalCycleMeans::lambda_all_mean)
        .def_readonly("p_below", &ConditionalCycleMeans::p_below)
        .def_readonly("pdc", &ConditionalCycleMeans::pdc)
        .def_readonly("pdc_se", &ConditionalCycleMeans::pdc_se)
        .def_readonly("accepted", &ConditionalCycleMeans::accepted);

    m.def(
        "conditional_cycle_means",
        [](const DistributionPair& pair, double D, double h, double mu, bool post_change,
           std::int64_t n_trials, std::uint64_t seed, int threads) {
            return estimate_conditional_cycle_means(pair, D, truncation_from(h), mu,
                                                    post_change ? Regime::post_change : Regime::pre_change,
                                                    n_trials, seed, threads);
        },
        py::arg("pair"), py::arg("D"), py::arg("h"), py::arg("mu"), py::arg("post_change") = false,
        py::arg("n_trials") = 20'000, py::arg("seed") = 0, py::arg("threads") = 0);

    // ---- metrics -----------------------------------------------------------
    py::class_<MetricsEngine>(m, "MetricsEngine")
        .def(py::init<std::uint64_t, int>(), py::arg("seed") = 0, py::arg("threads") = 0)
        .def(
            "estimate_far",
            [](const MetricsEngine& e, const PolicySpec& p, const DistributionPair& pair,
               std::int64_t n_trials, std::uint64_t cap) {
                return estimate_to_dict(e.estimate_far(p, pair, n_trials, cap));
            },
            py::arg("policy"), py::arg("pair"), py::arg("n_trials") = 10'000, py::arg("cap") = 10'000'000)
        .def(
            "estimate_cadd",
            [](const MetricsEngine& e, const PolicySpec& p, const DistributionPair& pair, int n_max,
               std::int64_t trials_per_n, std::uint64_t cap) {
                const CaddProfile profile = e.estimate_cadd(p, pair, n_max, trials_per_n, cap);
                py::dict d;
                py::list per_n;
                for (const auto& point : profile.per_n) {
                    py::dict row;
                    row["n"] = point.n;
                    row["value"] = point.value;
                    row["std_error"] = point.std_error;
                    row["accepted"] = point.accepted;
                    per_n.append(row);
                }
                d["per_n"] = per_n;
                d["argmax_n"] = profile.argmax_n;
                d["sup_value"] = profile.sup_value;
                d["sup_std_error"] = profile.sup_std_error;
                d["warnings"] = profile.warnings;
                return d;
            },
            py::arg("policy"), py::arg("pair"), py::arg("n_max") = 20, py::arg("trials_per_n") = 20'000,
            py::arg("cap") = 10'000'000)
        .def(
            "estimate_wadd_decusum",
            [](const MetricsEngine& e, const PolicySpec& p, const DistributionPair& pair,
               std::int64_t n_trials, std::uint64_t cap) {
                const auto* spec = std::get_if<DECuSumSpec>(&p);
                if (!spec) throw std::invalid_argument("estimate_wadd_decusum: policy must be de_cusum");
                return estimate_to_dict(e.estimate_wadd_decusum(*spec, pair, n_trials, cap));
            },
            py::arg("policy"), py::arg("pair"), py::arg("n_trials") = 20'000, py::arg("cap") = 10'000'000)
        .def(
            "estimate_pdc",
            [](const MetricsEngine& e, const PolicySpec& p, const DistributionPair& pair,
               std::vector<int> grid, std::int64_t trials_per_point, std::uint64_t cap) {
                if (grid.empty()) grid = MetricsEngine::default_pdc_grid();
                const PdcEstimate est = e.estimate_pdc(p, pair, grid, trials_per_point, cap);
                py::dict d = estimate_to_dict(est.estimate);
                py::list g;
                for (const auto& point : est.grid) {
                    py::dict row;
                    row["n"] = point.n;
                    row["value"] = point.value;
                    row["std_error"] = point.std_error;
                    row["accepted"] = point.accepted;
                    g.append(row);
                }
                d["grid"] = g;
                return d;
            },
            py::arg("policy"), py::arg("pair"), py::arg("grid") = std::vector<int>{},
            py::arg("trials_per_point") = 20'000, py::arg("cap") = 10'000'000)
        .def(
            "estimate_bayes",
            [](const MetricsEngine& e, const PolicySpec& p, const DistributionPair& pair, double rho,
               std::int64_t n_trials, std::uint64_t cap) {
                const BayesEstimates est = e.estimate_bayes(p, pair, rho, n_trials, cap);
                py::dict d;
                d["add"] = estimate_to_dict(est.add);
                d["pfa"] = estimate_to_dict(est.pfa);
                d["ano"] = estimate_to_dict(est.ano);
                return d;
            },
            py::arg("policy"), py::arg("pair"), py::arg("rho"), py::arg("n_trials") = 20'000,
            py::arg("cap") = 10'000'000);

    // ---- design ------------------------------------------------------------
    m.def("threshold_for_far", &threshold_for_far, py::arg("alpha"));
    m.def("mu_star", &mu_star, py::arg("stats"), py::arg("beta"));
    m.def(
        "pdc_approx",
        [](const CycleStats& stats, double mu, py::object h) {
            if (h.is_none()) return pdc_approx(stats, mu);
            return pdc_approx(stats, mu, truncation_from(py::cast<double>(h)));
        },
        py::arg("stats"), py::arg("mu"), py::arg("h") = py::none());
    m.def("pdc_approx_hinf", &pdc_approx_hinf, py::arg("pair"), py::arg("mu"));
    m.def("mu_for_pdc_hinf", &mu_for_pdc_hinf, py::arg("pair"), py::arg("beta"));

    auto cal_to_dict = [](const CalibrationResult& cal) {
        py::dict d;
        d["value"] = cal.value;
        d["verified"] = cal.verified;
        d["verified_se"] = cal.verified_se;
        d["probes"] = cal.probes;
        d["warnings"] = cal.warnings;
        return d;
    };

    m.def(
        "calibrate_threshold",
        [cal_to_dict](const DistributionPair& pair, double alpha, const std::string& family, double mu,
                      double h, double beta, double tolerance, int budget, std::int64_t n_trials,
                      std::uint64_t seed, int threads) {
            ProbeSettings probe;
            probe.n_trials = n_trials;
            probe.seed = seed;
            probe.threads = threads;
            ThresholdFamily f;
            if (family == "cusum") {
                f = [](double d) -> PolicySpec { return CuSumSpec{d}; };
            } else if (family == "de-cusum") {
                f = [mu, h](double d) -> PolicySpec { return DECuSumSpec{d, mu, truncation_from(h)}; };
            } else if (family == "fractional-cusum") {
                f = [beta](double d) -> PolicySpec { return FractionalCuSumSpec{d, beta}; };
            } else {
                throw std::invalid_argument("family must be cusum | de-cusum | fractional-cusum");
            }
            return cal_to_dict(calibrate_threshold(f, pair, alpha, tolerance, budget, probe));
        },
        py::arg("pair"), py::arg("alpha"), py::arg("family") = "cusum", py::arg("mu") = 0.1,
        py::arg("h") = std::numeric_limits<double>::infinity(), py::arg("beta") = 0.5,
        py::arg("tolerance") = 0.05, py::arg("budget") = 20, py::arg("n_trials") = 10'000,
        py::arg("seed") = 0, py::arg("threads") = 0);

    m.def(
        "calibrate_mu",
        [cal_to_dict](const DistributionPair& pair, double h, double D, double beta, double tolerance,
                      int budget, std::int64_t n_trials, std::uint64_t seed, int threads) {
            ProbeSettings probe;
            probe.n_trials = n_trials;
            probe.seed = seed;
            probe.threads = threads;
            return cal_to_dict(calibrate_mu(pair, truncation_from(h), D, beta, tolerance, budget, probe));
        },
        py::arg("pair"), py::arg("h"), py::arg("D"), py::arg("beta"), py::arg("tolerance") = 0.05,
        py::arg("budget") = 20, py::arg("n_trials") = 20'000, py::arg("seed") = 0, py::arg("threads") = 0);

    m.def(
        "calibrate_shiryaev_lower",
        [cal_to_dict](const DistributionPair& pair, double A, double rho, double zeta, double tolerance,
                      int budget, std::int64_t n_trials, std::uint64_t seed, int threads) {
            ProbeSettings probe;
            probe.n_trials = n_trials;
            probe.seed = seed;
            probe.threads = threads;
            return cal_to_dict(calibrate_shiryaev_lower(pair, A, rho, zeta, tolerance, budget, probe));
        },
        py::arg("pair"), py::arg("A"), py::arg("rho"), py::arg("zeta"), py::arg("tolerance") = 0.1,
        py::arg("budget") = 20, py::arg("n_trials") = 10'000, py::arg("seed") = 0, py::arg("threads") = 0);
}
