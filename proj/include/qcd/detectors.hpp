#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <variant>
#include <vector>

#include "qcd/distributions.hpp"
#include "qcd/rng.hpp"

namespace qcd {

// Undershoot truncation floor: (x)^{h+} = max(x, -h), with h = +inf meaning
// no truncation. Held as an explicit variant rather than a large float so the
// h = inf semantics and the ceil(h/mu) bound stay exact.
class Truncation {
  public:
    static Truncation none() { return Truncation(false, 0.0); }
    static Truncation at(double h);
    static Truncation from_value(double h);  // +inf -> none(), else at(h)

    bool finite() const { return finite_; }
    double h() const { return h_; }
    double value() const;  // h as double, +inf when not finite

    // (x)^{h+} with -0.0 canonicalized to +0.0 so truncated paths stay
    // bitwise comparable to clamped ones.
    double apply(double x) const {
        double r = (finite_ && x < -h_) ? -h_ : x;
        return r == 0.0 ? 0.0 : r;
    }

    bool operator==(const Truncation&) const = default;

  private:
    Truncation(bool finite, double h) : finite_(finite), h_(h) {}
    bool finite_;
    double h_;
};

// ---------------------------------------------------------------------------
// Detector states. Plain values: single-owner, stepped in place, never shared.
// Stopping is strict (statistic > threshold); observation control uses
// W >= 0 and p >= B.
// ---------------------------------------------------------------------------

struct CuSumState {
    double C = 0.0;
    double D;

    explicit CuSumState(double threshold);
    bool stopped() const { return C > D; }
};

// C' = (C + log L(x))^+
CuSumState cusum_step(CuSumState state, double x, const DistributionPair& pair);

class DECuSumState {
  public:
    DECuSumState(double threshold, double mu, Truncation h, double w0 = 0.0);

    double W() const { return W_; }
    double D() const { return D_; }
    double mu() const { return mu_; }
    const Truncation& truncation() const { return h_; }
    bool stopped() const { return W_ > D_; }

    // Skip: W' = min(W + mu, 0); observe: W' = (W + log L(x))^{h+}.
    // The skip ramp is recomputed from the sojourn origin (W_k = x0 + k*mu)
    // instead of accumulating, so the sojourn length equals T(x0, 0, mu)
    // exactly and the ceil(h/mu) skip-run bound holds without drift.
    void step(std::optional<double> x, const DistributionPair& pair);

  private:
    double W_;
    double D_;
    double mu_;
    Truncation h_;
    double sojourn_origin_;
    std::int64_t sojourn_steps_ = 0;
};

// M_{n+1}: 0 iff W_n < 0.
inline bool decusum_control(const DECuSumState& state) { return !(state.W() < 0.0); }

DECuSumState decusum_step(DECuSumState state, std::optional<double> x, const DistributionPair& pair);

// One Shiryaev posterior update in p-space. Skip (no logL): p' = p + (1-p)rho;
// observe: p' = pt L / (pt L + 1 - pt) with pt = p + (1-p)rho.
double shiryaev_update(double p, double rho, std::optional<double> log_l);

namespace detail {
// The update above, on the log-odds scale used internally by the states.
double shiryaev_logodds_update(double log_odds, double log_rho, double log1m_rho,
                               std::optional<double> log_l);
double logistic(double log_odds);
double logit(double p);
}  // namespace detail

// Posterior-probability detector; the statistic is kept as log-odds to avoid
// cancellation near p -> 1 and exposed as p by the logistic transform.
class ShiryaevState {
  public:
    ShiryaevState(double upper, double rho);

    double p() const { return detail::logistic(log_odds_); }
    double one_minus_p() const { return detail::logistic(-log_odds_); }
    double log_odds() const { return log_odds_; }
    double upper() const { return A_; }
    double rho() const { return rho_; }
    bool stopped() const { return log_odds_ > logit_A_; }

    void step(std::optional<double> log_l);

  private:
    double log_odds_;
    double A_;
    double rho_;
    double logit_A_;
    double log_rho_;
    double log1m_rho_;
};

class DEShiryaevState {
  public:
    DEShiryaevState(double upper, double lower, double rho);

    double p() const { return detail::logistic(log_odds_); }
    double one_minus_p() const { return detail::logistic(-log_odds_); }
    double log_odds() const { return log_odds_; }
    double upper() const { return A_; }
    double lower() const { return B_; }
    double rho() const { return rho_; }
    bool stopped() const { return log_odds_ > logit_A_; }
    bool take_observation() const { return !(log_odds_ < logit_B_); }  // p >= B

    void step(std::optional<double> log_l);

  private:
    double log_odds_;
    double A_;
    double B_;
    double rho_;
    double logit_A_;
    double logit_B_;
    double log_rho_;
    double log1m_rho_;
};

// ---------------------------------------------------------------------------
// Policy specifications: parameters only, cheap to copy across trials.
// ---------------------------------------------------------------------------

struct CuSumSpec {
    double threshold;
};

struct DECuSumSpec {
    double threshold;
    double mu;
    Truncation h;
};

struct ShiryaevSpec {
    double upper;  // A
    double rho;
};

struct DEShiryaevSpec {
    double upper;  // A
    double lower;  // B
    double rho;
};

// Coin-toss sampling around a CuSum base: the statistic is frozen on skips.
struct FractionalCuSumSpec {
    double threshold;
    double beta;
};

// Coin-toss sampling around a Shiryaev base: skips apply the prior-only
// posterior update.
struct FractionalShiryaevSpec {
    double upper;
    double rho;
    double beta;
};

using PolicySpec = std::variant<CuSumSpec, DECuSumSpec, ShiryaevSpec, DEShiryaevSpec,
                                FractionalCuSumSpec, FractionalShiryaevSpec>;

bool is_shiryaev_family(const PolicySpec& spec);
double policy_rho(const PolicySpec& spec);  // throws unless Shiryaev-family

// Live detector for one run. next_control() must be called exactly once per
// time step (fractional policies consume their coin stream there).
class PolicyRun {
  public:
    PolicyRun(const PolicySpec& spec, const DistributionPair& pair, std::uint64_t stream_seed);

    bool next_control();
    void step(bool took, double x);
    double statistic() const;
    bool stopped() const;

  private:
    struct FractionalCuSumState {
        CuSumState base;
        double beta;
        Rng coin;
    };
    struct FractionalShiryaevState {
        ShiryaevState base;
        double beta;
        Rng coin;
    };

    const DistributionPair* pair_;
    std::variant<CuSumState, DECuSumState, ShiryaevState, DEShiryaevState, FractionalCuSumState,
                 FractionalShiryaevState>
        state_;
};

// Per-step record of one run: decisions M_n, statistic path, stopping time.
struct Trace {
    std::vector<std::uint8_t> decisions;
    std::vector<double> statistic_path;
    std::uint64_t tau = 0;  // steps executed; the stopping time unless censored
    bool censored = false;
    std::uint64_t observations_used = 0;

    // CSV columns: n, M, statistic, stopped
    void write_csv(std::ostream& os) const;
};

// Drives a policy over a stream until it stops or cap steps have elapsed.
// The stream advances every step; skipped observations are drawn and
// discarded, so different policies on one seed share the same sample path.
Trace run_policy(const PolicySpec& spec, ObservationStream& stream, std::uint64_t cap);

// Trace-free variant for metric loops.
struct RunOutcome {
    std::uint64_t tau = 0;
    bool censored = false;
    std::uint64_t observations_used = 0;
};
RunOutcome run_policy_outcome(const PolicySpec& spec, ObservationStream& stream, std::uint64_t cap);

}  // namespace qcd
