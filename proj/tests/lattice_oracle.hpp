#pragma once

// Exact absorbing-Markov-chain computations for detectors driven by a
// two-valued log-likelihood ratio (Bernoulli pairs). States are the exact
// double values produced by the same floating-point updates the simulators
// perform, so chain results and Monte Carlo runs see identical boundaries.
// Test-only oracle: independent of the Monte Carlo estimation paths it
// cross-checks.

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "qcd/detectors.hpp"
#include "qcd/distributions.hpp"
#include "qcd/renewal.hpp"

namespace lattice {

struct Chain {
    // Dense transient-state system: row-stochastic transitions among
    // transients plus per-state absorption data.
    std::vector<std::vector<double>> P;     // P[i][j]
    std::vector<double> absorb_below_prob;  // immediate absorption below, per state
    std::vector<double> absorb_value;       // expected absorbed payoff, per state
    int start = 0;
};

// Solves (I - P) x = b by Gaussian elimination.
inline std::vector<double> solve_linear(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a[i][j] = (i == j ? 1.0 : 0.0) - a[i][j];
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[piv], a[col]);
        std::swap(b[piv], b[col]);
        if (a[col][col] == 0.0) throw std::runtime_error("lattice oracle: singular system");
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t i = 0; i < n; ++i) b[i] /= a[i][i];
    return b;
}

struct SprtExact {
    double e_lambda;         // E[lambda_D]
    double p_below;          // P(W_{lambda_D} < 0)
    double e_lambda_below;   // E[lambda_D | W < 0]
    double e_sojourn_below;  // E[T((W)^{h+}, 0, mu) | W < 0]
    double pdc;              // renewal formula from the two conditional means
};

// SPRT cycle from W = 0, exits strictly outside [0, D]; up/down increments
// are the pair's LLR at x = 1 / x = 0, with up-probability p_up under the
// chosen regime.
inline SprtExact sprt_exact(const qcd::DistributionPair& pair, double threshold, qcd::Truncation h,
                            double mu, double p_up, std::size_t max_states = 20000) {
    const double l1 = pair.log_likelihood_ratio(1.0);
    const double l0 = pair.log_likelihood_ratio(0.0);

    std::map<double, int> index;
    std::vector<double> values;
    std::vector<double> frontier{0.0};
    index[0.0] = 0;
    values.push_back(0.0);
    while (!frontier.empty()) {
        const double v = frontier.back();
        frontier.pop_back();
        for (const double child : {v + l1, v + l0}) {
            if (child < 0.0 || child > threshold) continue;  // absorbing
            if (index.emplace(child, static_cast<int>(values.size())).second) {
                values.push_back(child);
                frontier.push_back(child);
                if (values.size() > max_states)
                    throw std::runtime_error("lattice oracle: state space too large; use a smaller D");
            }
        }
    }

    const std::size_t n = values.size();
    std::vector<std::vector<double>> P(n, std::vector<double>(n, 0.0));
    std::vector<double> ones(n, 1.0), q_imm(n, 0.0), t_imm(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = values[i];
        const double children[2] = {v + l1, v + l0};
        const double probs[2] = {p_up, 1.0 - p_up};
        for (int k = 0; k < 2; ++k) {
            const double c = children[k];
            if (c < 0.0) {
                q_imm[i] += probs[k];
                t_imm[i] += probs[k] * static_cast<double>(qcd::sojourn_length(h.apply(c), mu));
            } else if (c > threshold) {
                // absorbed above: zero payoff
            } else {
                P[i][static_cast<std::size_t>(index.at(c))] += probs[k];
            }
        }
    }

    // q = (I-P)^-1 q_imm ; E[lambda] = (I-P)^-1 1 ;
    // E[lambda 1{below}] = (I-P)^-1 q ; E[T 1{below}] = (I-P)^-1 t_imm.
    const auto q = solve_linear(P, q_imm);
    const auto e_lambda = solve_linear(P, ones);
    const auto m = solve_linear(P, q);
    const auto e_t = solve_linear(P, t_imm);

    SprtExact out;
    out.e_lambda = e_lambda[0];
    out.p_below = q[0];
    out.e_lambda_below = m[0] / q[0];
    out.e_sojourn_below = e_t[0] / q[0];
    out.pdc = out.e_lambda_below / (out.e_lambda_below + out.e_sojourn_below);
    return out;
}

// E[tau_C] for the CuSum recursion C' = max(0, C + llr) with strict > D
// stopping, from C = 0, under up-probability p_up.
inline double cusum_mean_stopping_time(const qcd::DistributionPair& pair, double threshold, double p_up,
                                       std::size_t max_states = 20000) {
    const double l1 = pair.log_likelihood_ratio(1.0);
    const double l0 = pair.log_likelihood_ratio(0.0);

    std::map<double, int> index;
    std::vector<double> values;
    std::vector<double> frontier{0.0};
    index[0.0] = 0;
    values.push_back(0.0);
    auto clamp = [](double x) { return std::max(0.0, x); };
    while (!frontier.empty()) {
        const double v = frontier.back();
        frontier.pop_back();
        for (const double raw : {v + l1, v + l0}) {
            if (raw > threshold) continue;  // absorbing
            const double child = clamp(raw);
            if (index.emplace(child, static_cast<int>(values.size())).second) {
                values.push_back(child);
                frontier.push_back(child);
                if (values.size() > max_states)
                    throw std::runtime_error("lattice oracle: state space too large; use a smaller D");
            }
        }
    }

    const std::size_t n = values.size();
    std::vector<std::vector<double>> P(n, std::vector<double>(n, 0.0));
    std::vector<double> ones(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = values[i];
        const double children[2] = {v + l1, v + l0};
        const double probs[2] = {p_up, 1.0 - p_up};
        for (int k = 0; k < 2; ++k) {
            if (children[k] > threshold) continue;
            P[i][static_cast<std::size_t>(index.at(clamp(children[k])))] += probs[k];
        }
    }
    return solve_linear(P, ones)[0];
}

}  // namespace lattice
