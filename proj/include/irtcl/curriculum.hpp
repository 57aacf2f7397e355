#ifndef IRTCL_CURRICULUM_HPP
#define IRTCL_CURRICULUM_HPP

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

/**
 * @file curriculum.hpp
 * @brief Training-data selection policies.
 *
 * Competence schedules give the fraction of easiest examples available at a step; the
 * ability-threshold policy admits every example whose difficulty does not exceed the
 * current ability estimate.
 */

namespace irtcl {

enum class StrategyKind { FullySupervised, CBLinear, CBRoot, DDaCLAE };
enum class DifficultySource { Learned, LengthHeuristic };

inline std::string_view to_string(StrategyKind k) {
    switch (k) {
    case StrategyKind::FullySupervised: return "full";
    case StrategyKind::CBLinear: return "cb-linear";
    case StrategyKind::CBRoot: return "cb-root";
    case StrategyKind::DDaCLAE: return "ddaclae";
    }
    return "?";
}

inline std::string_view to_string(DifficultySource s) {
    return s == DifficultySource::Learned ? "learned" : "length";
}

inline std::optional<StrategyKind> parse_strategy_kind(std::string_view s) {
    if (s == "full") return StrategyKind::FullySupervised;
    if (s == "cb-linear") return StrategyKind::CBLinear;
    if (s == "cb-root") return StrategyKind::CBRoot;
    if (s == "ddaclae") return StrategyKind::DDaCLAE;
    return std::nullopt;
}

inline std::optional<DifficultySource> parse_difficulty_source(std::string_view s) {
    if (s == "learned") return DifficultySource::Learned;
    if (s == "length") return DifficultySource::LengthHeuristic;
    return std::nullopt;
}

struct CurriculumStrategy {
    StrategyKind kind = StrategyKind::FullySupervised;
    double c0 = 0.01;
    /// Step at which competence reaches 1. Unset means num_epochs / 2.
    std::optional<std::size_t> T;
    std::size_t probe_size = 1000;
    DifficultySource difficulty_source = DifficultySource::Learned;

    void validate() const {
        detail::require(c0 > 0.0 && c0 <= 1.0, "CurriculumStrategy: c0 must be in (0, 1]");
        detail::require(!T || *T >= 1, "CurriculumStrategy: T must be >= 1");
        detail::require(probe_size >= 1, "CurriculumStrategy: probe_size must be >= 1");
        detail::require(kind != StrategyKind::DDaCLAE || difficulty_source == DifficultySource::Learned,
                        "CurriculumStrategy: ddaclae requires learned difficulties");
    }

    /// Short label such as "cb-root(learned)", used to group runs.
    std::string label() const {
        std::string s(to_string(kind));
        if (kind == StrategyKind::CBLinear || kind == StrategyKind::CBRoot) {
            s += "(";
            s += to_string(difficulty_source);
            s += ")";
        }
        return s;
    }
};

namespace detail {

inline void check_schedule_args(double t, double T, double c0) {
    require(t >= 0.0, "competence schedule: t must be >= 0");
    require(T >= 1.0, "competence schedule: T must be >= 1");
    require(c0 > 0.0 && c0 <= 1.0, "competence schedule: c0 must be in (0, 1]");
}

} // namespace detail

/// Linear competence: min(1, t (1 - c0) / T + c0).
inline double cb_linear(double t, double T, double c0 = 0.01) {
    detail::check_schedule_args(t, T, c0);
    if (t >= T) {
        return 1.0;
    }
    return std::min(1.0, t * (1.0 - c0) / T + c0);
}

/// Root competence: min(1, sqrt(t (1 - c0^2) / T + c0^2)).
inline double cb_root(double t, double T, double c0 = 0.01) {
    detail::check_schedule_args(t, T, c0);
    if (t >= T) {
        return 1.0;
    }
    return std::min(1.0, std::sqrt(t * (1.0 - c0 * c0) / T + c0 * c0));
}

/// Number of examples admitted at competence `c` out of `n`: max(1, round(c n)).
inline std::size_t proportion_count(double c, std::size_t n) {
    const auto k = static_cast<std::size_t>(std::llround(c * static_cast<double>(n)));
    return std::clamp<std::size_t>(k, 1, n);
}

/// Indices of `difficulties` sorted easiest first, ties by ascending index.
inline std::vector<std::size_t> easiest_first(std::span<const double> difficulties) {
    std::vector<std::size_t> order(difficulties.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return difficulties[a] < difficulties[b]; });
    return order;
}

/**
 * The `max(1, round(c N))` easiest indices, returned in ascending index order.
 * Ties in difficulty are broken by ascending index.
 */
inline std::vector<std::size_t> select_by_proportion(std::span<const double> difficulties, double c) {
    detail::require(!difficulties.empty(), "select_by_proportion: empty input");
    detail::require(c > 0.0 && c <= 1.0, "select_by_proportion: c must be in (0, 1]");
    auto order = easiest_first(difficulties);
    order.resize(proportion_count(c, difficulties.size()));
    std::sort(order.begin(), order.end());
    return order;
}

/// Every index whose difficulty is <= theta_hat. May be empty.
inline std::vector<std::size_t> select_by_ability(std::span<const double> difficulties, double theta_hat) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < difficulties.size(); ++i) {
        if (difficulties[i] <= theta_hat) {
            out.push_back(i);
        }
    }
    return out;
}

/// Text of one example: a single sentence or a sentence pair.
struct TextExample {
    std::string first;
    std::string second;
};

struct LengthHeuristicResult {
    std::vector<double> difficulties;
    std::vector<std::string> warnings;
};

inline std::size_t whitespace_token_count(std::string_view s) {
    std::size_t n = 0;
    bool in_token = false;
    for (char ch : s) {
        const bool space = ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\f' || ch == '\v';
        if (!space && !in_token) {
            ++n;
        }
        in_token = !space;
    }
    return n;
}

/// Token count of the first sentence of each example. Empty text scores 0 and is reported.
inline LengthHeuristicResult heuristic_difficulty_length(std::span<const TextExample> examples) {
    LengthHeuristicResult res;
    res.difficulties.reserve(examples.size());
    for (std::size_t k = 0; k < examples.size(); ++k) {
        const auto n = whitespace_token_count(examples[k].first);
        if (n == 0) {
            res.warnings.push_back("example " + std::to_string(k) + " has empty text; difficulty set to 0");
        }
        res.difficulties.push_back(static_cast<double>(n));
    }
    return res;
}

} // namespace irtcl

#endif
