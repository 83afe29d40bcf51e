#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "qcd/rng.hpp"

namespace qcd {

struct Gaussian {
    double mean;
    double variance;
    bool operator==(const Gaussian&) const = default;
};

struct Bernoulli {
    double p;
    bool operator==(const Bernoulli&) const = default;
};

struct Tabular {
    std::vector<double> support;
    std::vector<double> probabilities;
    bool operator==(const Tabular&) const = default;
};

// One observation model: log-density, sampler, mean. Immutable after
// construction; safe to share across threads.
class DistributionModel {
  public:
    static DistributionModel gaussian(double mean, double variance);
    static DistributionModel bernoulli(double p);
    static DistributionModel tabular(std::vector<double> support, std::vector<double> probabilities);

    double log_density(double x) const;  // throws std::domain_error outside support
    bool in_support(double x) const;
    double sample(Rng& rng) const;
    double mean() const;

    const std::variant<Gaussian, Bernoulli, Tabular>& spec() const { return spec_; }
    bool operator==(const DistributionModel& other) const { return spec_ == other.spec_; }

  private:
    explicit DistributionModel(std::variant<Gaussian, Bernoulli, Tabular> spec);

    std::variant<Gaussian, Bernoulli, Tabular> spec_;
    std::vector<double> cumulative_;  // tabular inverse-CDF table
};

enum class KlDirection { f1_vs_f0, f0_vs_f1 };

// Pre/post-change pair with both KL divergences precomputed. Construction
// rejects pairs whose KL divergences are not both finite and positive.
class DistributionPair {
  public:
    DistributionPair(DistributionModel f0, DistributionModel f1);

    const DistributionModel& f0() const { return f0_; }
    const DistributionModel& f1() const { return f1_; }
    double kl_f1_f0() const { return kl_f1_f0_; }
    double kl_f0_f1() const { return kl_f0_f1_; }

    // log f1(x) - log f0(x); throws std::domain_error naming the density for
    // which x is out of support.
    double log_likelihood_ratio(double x) const;

  private:
    DistributionModel f0_;
    DistributionModel f1_;
    double kl_f1_f0_;
    double kl_f0_f1_;
};

double log_likelihood_ratio(const DistributionPair& pair, double x);
double kl_divergence(const DistributionPair& pair, KlDirection direction);

// Change point: a fixed gamma >= 1 (possibly infinite) or geometric(rho).
class ChangePointSpec {
  public:
    static ChangePointSpec deterministic(double gamma);  // gamma >= 1 or +inf
    static ChangePointSpec geometric(double rho);        // rho in (0, 1)

    bool is_geometric() const { return geometric_; }
    double gamma() const { return gamma_; }
    double rho() const { return rho_; }

  private:
    ChangePointSpec() = default;
    bool geometric_ = false;
    double gamma_ = 0.0;
    double rho_ = 0.0;
};

// Seeded stream of observations: X_n ~ f0 for n < gamma, X_n ~ f1 for
// n >= gamma. A geometric change point is realized once at construction.
// Single-owner mutable state; never shared between threads.
class ObservationStream {
  public:
    ObservationStream(const DistributionPair& pair, const ChangePointSpec& change, std::uint64_t seed);

    double next();
    std::uint64_t position() const { return position_; }
    std::uint64_t seed() const { return seed_; }
    double change_point() const { return gamma_; }
    const DistributionPair& pair() const { return *pair_; }

  private:
    const DistributionPair* pair_;
    Rng rng_;
    std::uint64_t seed_;
    double gamma_;
    std::uint64_t position_ = 0;
};

}  // namespace qcd
