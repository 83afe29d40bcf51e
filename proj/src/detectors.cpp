#include "qcd/detectors.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace qcd {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Truncation Truncation::at(double h) {
    if (std::isnan(h) || h < 0.0) throw std::invalid_argument("truncation h must be >= 0");
    if (std::isinf(h)) return none();
    return Truncation(true, h);
}

Truncation Truncation::from_value(double h) { return at(h); }

double Truncation::value() const { return finite_ ? h_ : kInf; }

CuSumState::CuSumState(double threshold) : D(threshold) {
    if (!(threshold > 0.0)) throw std::invalid_argument("cusum threshold D must be > 0");
}

CuSumState cusum_step(CuSumState state, double x, const DistributionPair& pair) {
    state.C = std::max(0.0, state.C + pair.log_likelihood_ratio(x));
    return state;
}

DECuSumState::DECuSumState(double threshold, double mu, Truncation h, double w0)
    : W_(w0), D_(threshold), mu_(mu), h_(h), sojourn_origin_(w0) {
    if (!(threshold > 0.0)) throw std::invalid_argument("de-cusum threshold D must be > 0");
    if (!(mu > 0.0) || !std::isfinite(mu)) throw std::invalid_argument("de-cusum mu must be > 0 and finite");
}

void DECuSumState::step(std::optional<double> x, const DistributionPair& pair) {
    const bool observe = decusum_control(*this);
    if (observe) {
        if (!x) throw std::logic_error("de-cusum step: observation missing on an observe step (W >= 0)");
        W_ = h_.apply(W_ + pair.log_likelihood_ratio(*x));
        if (W_ < 0.0) {
            sojourn_origin_ = W_;
            sojourn_steps_ = 0;
        }
    } else {
        if (x) throw std::logic_error("de-cusum step: observation supplied on a skip step (W < 0)");
        ++sojourn_steps_;
        const double w = sojourn_origin_ + static_cast<double>(sojourn_steps_) * mu_;
        W_ = w < 0.0 ? w : 0.0;
    }
}

DECuSumState decusum_step(DECuSumState state, std::optional<double> x, const DistributionPair& pair) {
    state.step(x, pair);
    return state;
}

namespace detail {

namespace {
double logaddexp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    if (a == kInf || b == kInf) return kInf;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}
}  // namespace

double logistic(double log_odds) {
    if (log_odds == -kInf) return 0.0;
    if (log_odds == kInf) return 1.0;
    if (log_odds >= 0.0) return 1.0 / (1.0 + std::exp(-log_odds));
    const double e = std::exp(log_odds);
    return e / (1.0 + e);
}

double logit(double p) {
    if (p == 0.0) return -kInf;
    if (p == 1.0) return kInf;
    return std::log(p) - std::log1p(-p);
}

double shiryaev_logodds_update(double log_odds, double log_rho, double log1m_rho,
                               std::optional<double> log_l) {
    // Prior tilt: odds' = (odds + rho) / (1 - rho).
    double l = logaddexp(log_odds, log_rho) - log1m_rho;
    if (log_l) l += *log_l;
    return l;
}

}  // namespace detail

double shiryaev_update(double p, double rho, std::optional<double> log_l) {
    if (!(rho > 0.0) || !(rho < 1.0)) throw std::invalid_argument("shiryaev rho must lie in (0, 1)");
    if (std::isnan(p) || p < 0.0 || p > 1.0) throw std::invalid_argument("shiryaev p must lie in [0, 1]");
    const double l = detail::shiryaev_logodds_update(detail::logit(p), std::log(rho), std::log1p(-rho), log_l);
    return detail::logistic(l);
}

namespace {
void check_shiryaev_params(double upper, double rho) {
    if (!(upper > 0.0) || !(upper < 1.0)) throw std::invalid_argument("shiryaev threshold A must lie in (0, 1)");
    if (!(rho > 0.0) || !(rho < 1.0)) throw std::invalid_argument("shiryaev rho must lie in (0, 1)");
}
}  // namespace

ShiryaevState::ShiryaevState(double upper, double rho)
    : log_odds_(-kInf),
      A_(upper),
      rho_(rho),
      logit_A_(detail::logit(upper)),
      log_rho_(std::log(rho)),
      log1m_rho_(std::log1p(-rho)) {
    check_shiryaev_params(upper, rho);
}

void ShiryaevState::step(std::optional<double> log_l) {
    log_odds_ = detail::shiryaev_logodds_update(log_odds_, log_rho_, log1m_rho_, log_l);
}

DEShiryaevState::DEShiryaevState(double upper, double lower, double rho)
    : log_odds_(-kInf),
      A_(upper),
      B_(lower),
      rho_(rho),
      logit_A_(detail::logit(upper)),
      logit_B_(detail::logit(lower)),
      log_rho_(std::log(rho)),
      log1m_rho_(std::log1p(-rho)) {
    check_shiryaev_params(upper, rho);
    if (std::isnan(lower) || lower < 0.0 || lower >= upper)
        throw std::invalid_argument("de-shiryaev threshold B must lie in [0, A)");
}

void DEShiryaevState::step(std::optional<double> log_l) {
    const bool observe = take_observation();
    if (observe != log_l.has_value())
        throw std::logic_error(observe ? "de-shiryaev step: observation missing on an observe step (p >= B)"
                                       : "de-shiryaev step: observation supplied on a skip step (p < B)");
    log_odds_ = detail::shiryaev_logodds_update(log_odds_, log_rho_, log1m_rho_, log_l);
}

bool is_shiryaev_family(const PolicySpec& spec) {
    return std::holds_alternative<ShiryaevSpec>(spec) || std::holds_alternative<DEShiryaevSpec>(spec) ||
           std::holds_alternative<FractionalShiryaevSpec>(spec);
}

double policy_rho(const PolicySpec& spec) {
    if (const auto* s = std::get_if<ShiryaevSpec>(&spec)) return s->rho;
    if (const auto* s = std::get_if<DEShiryaevSpec>(&spec)) return s->rho;
    if (const auto* s = std::get_if<FractionalShiryaevSpec>(&spec)) return s->rho;
    throw std::invalid_argument("policy_rho: policy is not Shiryaev-family");
}

namespace {
void check_beta(double beta) {
    if (!(beta > 0.0) || beta > 1.0) throw std::invalid_argument("fractional-sampling beta must lie in (0, 1]");
}
}  // namespace

PolicyRun::PolicyRun(const PolicySpec& spec, const DistributionPair& pair, std::uint64_t stream_seed)
    : pair_(&pair),
      state_(std::visit(
          [&](const auto& s) -> decltype(state_) {
              using T = std::decay_t<decltype(s)>;
              if constexpr (std::is_same_v<T, CuSumSpec>) {
                  return CuSumState(s.threshold);
              } else if constexpr (std::is_same_v<T, DECuSumSpec>) {
                  return DECuSumState(s.threshold, s.mu, s.h);
              } else if constexpr (std::is_same_v<T, ShiryaevSpec>) {
                  return ShiryaevState(s.upper, s.rho);
              } else if constexpr (std::is_same_v<T, DEShiryaevSpec>) {
                  return DEShiryaevState(s.upper, s.lower, s.rho);
              } else if constexpr (std::is_same_v<T, FractionalCuSumSpec>) {
                  check_beta(s.beta);
                  return FractionalCuSumState{CuSumState(s.threshold), s.beta,
                                              Rng(stream_seed ^ kCoinStreamTag)};
              } else {
                  check_beta(s.beta);
                  return FractionalShiryaevState{ShiryaevState(s.upper, s.rho), s.beta,
                                                 Rng(stream_seed ^ kCoinStreamTag)};
              }
          },
          spec)) {}

bool PolicyRun::next_control() {
    return std::visit(
        [](auto& s) -> bool {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, DECuSumState>) {
                return decusum_control(s);
            } else if constexpr (std::is_same_v<T, DEShiryaevState>) {
                return s.take_observation();
            } else if constexpr (std::is_same_v<T, FractionalCuSumState> ||
                                 std::is_same_v<T, FractionalShiryaevState>) {
                return s.coin.bernoulli(s.beta);
            } else {
                return true;
            }
        },
        state_);
}

void PolicyRun::step(bool took, double x) {
    std::visit(
        [&](auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, CuSumState>) {
                s = cusum_step(s, x, *pair_);
            } else if constexpr (std::is_same_v<T, DECuSumState>) {
                s.step(took ? std::optional<double>(x) : std::nullopt, *pair_);
            } else if constexpr (std::is_same_v<T, ShiryaevState>) {
                s.step(pair_->log_likelihood_ratio(x));
            } else if constexpr (std::is_same_v<T, DEShiryaevState>) {
                s.step(took ? std::optional<double>(pair_->log_likelihood_ratio(x)) : std::nullopt);
            } else if constexpr (std::is_same_v<T, FractionalCuSumState>) {
                if (took) s.base = cusum_step(s.base, x, *pair_);
                // skipped: the CuSum statistic has no skip dynamics
            } else {
                s.base.step(took ? std::optional<double>(pair_->log_likelihood_ratio(x)) : std::nullopt);
            }
        },
        state_);
}

double PolicyRun::statistic() const {
    return std::visit(
        [](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, CuSumState>) {
                return s.C;
            } else if constexpr (std::is_same_v<T, DECuSumState>) {
                return s.W();
            } else if constexpr (std::is_same_v<T, ShiryaevState> || std::is_same_v<T, DEShiryaevState>) {
                return s.p();
            } else if constexpr (std::is_same_v<T, FractionalCuSumState>) {
                return s.base.C;
            } else {
                return s.base.p();
            }
        },
        state_);
}

bool PolicyRun::stopped() const {
    return std::visit(
        [](const auto& s) -> bool {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, FractionalCuSumState> ||
                          std::is_same_v<T, FractionalShiryaevState>) {
                return s.base.stopped();
            } else {
                return s.stopped();
            }
        },
        state_);
}

namespace {

template <typename OnStep>
RunOutcome drive_policy(const PolicySpec& spec, ObservationStream& stream, std::uint64_t cap,
                        OnStep&& on_step) {
    PolicyRun run(spec, stream.pair(), stream.seed());
    RunOutcome out;
    for (std::uint64_t n = 1; n <= cap; ++n) {
        const bool take = run.next_control();
        const double x = stream.next();  // the world advances even on skips
        run.step(take, x);
        out.observations_used += take ? 1 : 0;
        const bool stopped = run.stopped();
        on_step(n, take, run.statistic(), stopped);
        if (stopped) {
            out.tau = n;
            return out;
        }
    }
    out.tau = cap;
    out.censored = true;
    return out;
}

}  // namespace

Trace run_policy(const PolicySpec& spec, ObservationStream& stream, std::uint64_t cap) {
    if (cap < 1) throw std::invalid_argument("run_policy: cap must be >= 1");
    Trace trace;
    trace.decisions.reserve(256);
    trace.statistic_path.reserve(256);
    const RunOutcome out =
        drive_policy(spec, stream, cap, [&](std::uint64_t, bool take, double stat, bool) {
            trace.decisions.push_back(take ? 1 : 0);
            trace.statistic_path.push_back(stat);
        });
    trace.tau = out.tau;
    trace.censored = out.censored;
    trace.observations_used = out.observations_used;
    return trace;
}

RunOutcome run_policy_outcome(const PolicySpec& spec, ObservationStream& stream, std::uint64_t cap) {
    if (cap < 1) throw std::invalid_argument("run_policy: cap must be >= 1");
    return drive_policy(spec, stream, cap, [](std::uint64_t, bool, double, bool) {});
}

void Trace::write_csv(std::ostream& os) const {
    os << "n,M,statistic,stopped\n";
    char buf[64];
    for (std::size_t i = 0; i < statistic_path.size(); ++i) {
        const bool stop_row = !censored && i + 1 == tau;
        std::snprintf(buf, sizeof buf, "%.17g", statistic_path[i]);
        os << (i + 1) << ',' << int(decisions[i]) << ',' << buf << ',' << (stop_row ? 1 : 0) << '\n';
    }
}

}  // namespace qcd
