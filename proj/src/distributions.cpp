#include "qcd/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace qcd {

namespace {

void check_finite(double x, const char* what) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + " must be finite");
}

double gaussian_log_density(const Gaussian& g, double x) {
    const double d = x - g.mean;
    return -0.5 * std::log(2.0 * std::numbers::pi * g.variance) - d * d / (2.0 * g.variance);
}

// D(Na || Nb) for univariate Gaussians.
double gaussian_kl(const Gaussian& a, const Gaussian& b) {
    const double dm = a.mean - b.mean;
    return 0.5 * (std::log(b.variance / a.variance) + (a.variance + dm * dm) / b.variance - 1.0);
}

double bernoulli_kl(double p, double q) {
    return p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
}

double tabular_kl(const Tabular& a, const Tabular& b) {
    double kl = 0.0;
    for (std::size_t i = 0; i < a.probabilities.size(); ++i)
        kl += a.probabilities[i] * std::log(a.probabilities[i] / b.probabilities[i]);
    return kl;
}

}  // namespace

DistributionModel::DistributionModel(std::variant<Gaussian, Bernoulli, Tabular> spec)
    : spec_(std::move(spec)) {
    if (const auto* t = std::get_if<Tabular>(&spec_)) {
        cumulative_.reserve(t->probabilities.size());
        double c = 0.0;
        for (double p : t->probabilities) cumulative_.push_back(c += p);
        cumulative_.back() = 1.0;
    }
}

DistributionModel DistributionModel::gaussian(double mean, double variance) {
    check_finite(mean, "gaussian mean");
    check_finite(variance, "gaussian variance");
    if (variance <= 0.0) throw std::invalid_argument("gaussian variance must be > 0");
    return DistributionModel(Gaussian{mean, variance});
}

DistributionModel DistributionModel::bernoulli(double p) {
    check_finite(p, "bernoulli p");
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("bernoulli p must lie in (0, 1)");
    return DistributionModel(Bernoulli{p});
}

DistributionModel DistributionModel::tabular(std::vector<double> support, std::vector<double> probabilities) {
    if (support.empty() || support.size() != probabilities.size())
        throw std::invalid_argument("tabular support/probabilities must be non-empty and equal-length");
    double total = 0.0;
    for (double p : probabilities) {
        check_finite(p, "tabular probability");
        if (p <= 0.0) throw std::invalid_argument("tabular probabilities must be > 0");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("tabular probabilities must sum to 1 within 1e-12");
    for (double s : support) check_finite(s, "tabular support value");
    auto sorted = support;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("tabular support values must be distinct");
    return DistributionModel(Tabular{std::move(support), std::move(probabilities)});
}

bool DistributionModel::in_support(double x) const {
    return std::visit(
        [x](const auto& s) -> bool {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Gaussian>) {
                return std::isfinite(x);
            } else if constexpr (std::is_same_v<T, Bernoulli>) {
                return x == 0.0 || x == 1.0;
            } else {
                for (double v : s.support)
                    if (v == x) return true;
                return false;
            }
        },
        spec_);
}

double DistributionModel::log_density(double x) const {
    return std::visit(
        [&](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Gaussian>) {
                if (!std::isfinite(x)) throw std::domain_error("gaussian log_density: x must be finite");
                return gaussian_log_density(s, x);
            } else if constexpr (std::is_same_v<T, Bernoulli>) {
                if (x == 1.0) return std::log(s.p);
                if (x == 0.0) return std::log(1.0 - s.p);
                throw std::domain_error("bernoulli log_density: x outside support {0, 1}");
            } else {
                for (std::size_t i = 0; i < s.support.size(); ++i)
                    if (s.support[i] == x) return std::log(s.probabilities[i]);
                throw std::domain_error("tabular log_density: x outside support");
            }
        },
        spec_);
}

double DistributionModel::sample(Rng& rng) const {
    return std::visit(
        [&](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Gaussian>) {
                return s.mean + std::sqrt(s.variance) * rng.standard_normal();
            } else if constexpr (std::is_same_v<T, Bernoulli>) {
                return rng.bernoulli(s.p) ? 1.0 : 0.0;
            } else {
                const double u = rng.uniform();
                const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
                const auto idx = std::min<std::size_t>(it - cumulative_.begin(), s.support.size() - 1);
                return s.support[idx];
            }
        },
        spec_);
}

double DistributionModel::mean() const {
    return std::visit(
        [](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Gaussian>) {
                return s.mean;
            } else if constexpr (std::is_same_v<T, Bernoulli>) {
                return s.p;
            } else {
                double m = 0.0;
                for (std::size_t i = 0; i < s.support.size(); ++i) m += s.support[i] * s.probabilities[i];
                return m;
            }
        },
        spec_);
}

namespace {

// KL divergences in closed form (Gaussian) or exact summation (Bernoulli,
// Tabular). Mixed-kind pairs are rejected: their likelihood ratio is not a
// density ratio over a common support.
std::pair<double, double> pair_kl(const DistributionModel& f0, const DistributionModel& f1) {
    const auto& s0 = f0.spec();
    const auto& s1 = f1.spec();
    if (const auto* g0 = std::get_if<Gaussian>(&s0)) {
        const auto* g1 = std::get_if<Gaussian>(&s1);
        if (!g1) throw std::invalid_argument("distribution pair: f0 and f1 must have the same kind");
        return {gaussian_kl(*g1, *g0), gaussian_kl(*g0, *g1)};
    }
    if (const auto* b0 = std::get_if<Bernoulli>(&s0)) {
        const auto* b1 = std::get_if<Bernoulli>(&s1);
        if (!b1) throw std::invalid_argument("distribution pair: f0 and f1 must have the same kind");
        return {bernoulli_kl(b1->p, b0->p), bernoulli_kl(b0->p, b1->p)};
    }
    const auto* t0 = std::get_if<Tabular>(&s0);
    const auto* t1 = std::get_if<Tabular>(&s1);
    if (!t1) throw std::invalid_argument("distribution pair: f0 and f1 must have the same kind");
    if (t0->support != t1->support)
        throw std::invalid_argument("distribution pair: tabular models must share the same support");
    return {tabular_kl(*t1, *t0), tabular_kl(*t0, *t1)};
}

}  // namespace

DistributionPair::DistributionPair(DistributionModel f0, DistributionModel f1)
    : f0_(std::move(f0)), f1_(std::move(f1)) {
    auto [k10, k01] = pair_kl(f0_, f1_);
    kl_f1_f0_ = k10;
    kl_f0_f1_ = k01;
    if (!(kl_f1_f0_ > 0.0) || !std::isfinite(kl_f1_f0_) || !(kl_f0_f1_ > 0.0) || !std::isfinite(kl_f0_f1_))
        throw std::invalid_argument("distribution pair: KL divergences must be positive and finite (f0 != f1)");
}

double DistributionPair::log_likelihood_ratio(double x) const {
    if (!f0_.in_support(x)) throw std::domain_error("log_likelihood_ratio: x outside support of f0");
    if (!f1_.in_support(x)) throw std::domain_error("log_likelihood_ratio: x outside support of f1");
    return f1_.log_density(x) - f0_.log_density(x);
}

double log_likelihood_ratio(const DistributionPair& pair, double x) { return pair.log_likelihood_ratio(x); }

double kl_divergence(const DistributionPair& pair, KlDirection direction) {
    return direction == KlDirection::f1_vs_f0 ? pair.kl_f1_f0() : pair.kl_f0_f1();
}

ChangePointSpec ChangePointSpec::deterministic(double gamma) {
    if (std::isnan(gamma) || gamma < 1.0) throw std::invalid_argument("change point gamma must be >= 1 (or inf)");
    if (std::isfinite(gamma) && gamma != std::floor(gamma))
        throw std::invalid_argument("change point gamma must be an integer (or inf)");
    ChangePointSpec s;
    s.gamma_ = gamma;
    return s;
}

ChangePointSpec ChangePointSpec::geometric(double rho) {
    if (!(rho > 0.0) || !(rho < 1.0)) throw std::invalid_argument("geometric rho must lie strictly in (0, 1)");
    ChangePointSpec s;
    s.geometric_ = true;
    s.rho_ = rho;
    return s;
}

ObservationStream::ObservationStream(const DistributionPair& pair, const ChangePointSpec& change,
                                     std::uint64_t seed)
    : pair_(&pair), rng_(seed), seed_(seed) {
    gamma_ = change.is_geometric() ? static_cast<double>(rng_.geometric(change.rho())) : change.gamma();
}

double ObservationStream::next() {
    ++position_;
    const bool post = static_cast<double>(position_) >= gamma_;
    return (post ? pair_->f1() : pair_->f0()).sample(rng_);
}

}  // namespace qcd
