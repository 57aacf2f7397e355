#ifndef IRTCL_ABILITY_HPP
#define IRTCL_ABILITY_HPP

#include "irt_core.hpp"

#include <cmath>
#include <cstdint>
#include <span>

/**
 * @file ability.hpp
 * @brief Maximum-likelihood scoring of a single responder against known item difficulties.
 */

namespace irtcl {

struct AbilityBounds {
    double lo = -4.0;
    double hi = 4.0;
};

struct AbilityEstimate {
    double theta = 0.0;
    /// True when the estimate sits on a bound because the likelihood has no interior maximum in range.
    bool clamped = false;
    int iterations = 0;
};

namespace detail {

inline void check_pattern(std::span<const std::int8_t> z, std::span<const double> bs) {
    require(!z.empty(), "ability: empty response pattern");
    require(z.size() == bs.size(), "ability: response and difficulty lengths differ");
}

} // namespace detail

/// Log-likelihood of pattern `z` at ability `theta`; missing cells are skipped.
inline double ability_log_likelihood(double theta, std::span<const std::int8_t> z, std::span<const double> bs) {
    detail::check_pattern(z, bs);
    double ll = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] != ResponseMatrix::kMissing) {
            ll += response_log_probability(z[i] == 1, theta, bs[i]);
        }
    }
    return ll;
}

/// d/dtheta of the log-likelihood: sum of residuals z_i - p_i.
inline double ability_score_derivative(double theta, std::span<const std::int8_t> z, std::span<const double> bs) {
    detail::check_pattern(z, bs);
    double g = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] != ResponseMatrix::kMissing) {
            g += z[i] - stable_sigmoid(theta - bs[i]);
        }
    }
    return g;
}

/**
 * Unique maximizer of the response log-likelihood over `[bounds.lo, bounds.hi]`.
 *
 * The log-likelihood is strictly concave in theta, so the score derivative has at most one
 * root. Newton steps are taken inside a shrinking bisection bracket; a step that leaves the
 * bracket is replaced by the midpoint. If the derivative does not change sign across the
 * bounds the estimate is clamped.
 */
inline AbilityEstimate estimate_ability(std::span<const std::int8_t> z, std::span<const double> bs, AbilityBounds bounds = {}) {
    detail::check_pattern(z, bs);
    detail::require(bounds.lo < bounds.hi, "estimate_ability: lower bound must be below upper bound");
    for (double b : bs) {
        detail::require(std::isfinite(b), "estimate_ability: non-finite difficulty");
    }

    double lo = bounds.lo;
    double hi = bounds.hi;
    if (ability_score_derivative(lo, z, bs) <= 0.0) {
        return {lo, true, 0};
    }
    if (ability_score_derivative(hi, z, bs) >= 0.0) {
        return {hi, true, 0};
    }

    constexpr double tol = 1e-10;
    double theta = 0.5 * (lo + hi);
    int it = 0;
    for (; it < 200; ++it) {
        double g = 0.0;
        double info = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            if (z[i] == ResponseMatrix::kMissing) {
                continue;
            }
            const double p = stable_sigmoid(theta - bs[i]);
            g += z[i] - p;
            info += p * (1.0 - p);
        }
        if (g > 0.0) {
            lo = theta;
        } else if (g < 0.0) {
            hi = theta;
        } else {
            break;
        }

        double next = info > 0.0 ? theta + g / info : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) {
            next = 0.5 * (lo + hi);
        }
        const double step = std::abs(next - theta);
        theta = next;
        if (step < tol || hi - lo < tol) {
            break;
        }
    }
    return {theta, false, it + 1};
}

inline AbilityEstimate estimate_ability(const std::vector<std::int8_t>& z, const std::vector<double>& bs, AbilityBounds bounds = {}) {
    return estimate_ability(std::span<const std::int8_t>(z), std::span<const double>(bs), bounds);
}

} // namespace irtcl

#endif
