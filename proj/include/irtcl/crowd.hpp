#ifndef IRTCL_CROWD_HPP
#define IRTCL_CROWD_HPP

#include "dataset.hpp"
#include "irt_core.hpp"
#include "learner.hpp"
#include "parallel.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

/**
 * @file crowd.hpp
 * @brief Artificial crowds: an ensemble of learners trained on subsampled, label-flipped
 * copies of the training data, each graded on every example.
 */

namespace irtcl {

/// `count` values spaced evenly in log scale from `lo` to `hi` inclusive.
inline std::vector<double> log_spaced(double lo, double hi, std::size_t count) {
    detail::require(lo > 0.0 && hi >= lo && count >= 1, "log_spaced: bad range");
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = hi;
        return out;
    }
    const double a = std::log(lo), b = std::log(hi);
    for (std::size_t k = 0; k < count; ++k) {
        out[k] = std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(count - 1));
    }
    out.back() = hi;
    return out;
}

struct CrowdConfig {
    std::size_t ensemble_size = 100;
    /// Assigned round-robin across members.
    std::vector<double> subsample_fractions = log_spaced(0.01, 1.0, 10);
    /// Each member draws its flip probability uniformly from this interval.
    std::pair<double, double> flip_prob_range{0.0, 0.4};
    /// If non-empty, explicit flip probabilities assigned round-robin instead of the range.
    std::vector<double> flip_probs;
    std::uint64_t seed = 0;
    LearnerSpec learner{};
    std::size_t epochs = 10;
    double lr = 0.1;

    void validate() const {
        detail::require(ensemble_size >= 2, "CrowdConfig: ensemble_size must be >= 2");
        detail::require(!subsample_fractions.empty(), "CrowdConfig: need at least one subsample fraction");
        for (double f : subsample_fractions) {
            detail::require(f > 0.0 && f <= 1.0, "CrowdConfig: subsample fractions must be in (0, 1]");
        }
        const auto [lo, hi] = flip_prob_range;
        detail::require(lo >= 0.0 && lo <= hi && hi <= 0.5, "CrowdConfig: flip probability range must lie within [0, 0.5]");
        for (double p : flip_probs) {
            detail::require(p >= 0.0 && p <= 0.5, "CrowdConfig: flip probabilities must lie within [0, 0.5]");
        }
        detail::require(epochs >= 1, "CrowdConfig: epochs must be >= 1");
        detail::require(lr > 0.0, "CrowdConfig: lr must be positive");
    }
};

/**
 * Replace each label, independently with probability `flip_prob`, by a uniformly chosen
 * different label from [0, n_classes).
 */
inline std::vector<int> corrupt_labels(std::span<const int> labels, std::size_t n_classes, double flip_prob, Rng& rng) {
    detail::require(flip_prob >= 0.0 && flip_prob <= 0.5, "corrupt_labels: flip_prob must be in [0, 0.5]");
    detail::require(n_classes >= 2 || flip_prob == 0.0, "corrupt_labels: cannot flip labels with a single-symbol alphabet");
    std::vector<int> out(labels.begin(), labels.end());
    if (flip_prob == 0.0) {
        return out;
    }
    for (int& y : out) {
        if (rng.bernoulli(flip_prob)) {
            y = static_cast<int>((static_cast<std::size_t>(y) + 1 + rng.below(n_classes - 1)) % n_classes);
        }
    }
    return out;
}

/// Sorted indices of a uniform sample without replacement of size max(1, round(fraction n)).
inline std::vector<std::size_t> subsample(std::size_t n, double fraction, Rng& rng) {
    detail::require(n >= 1, "subsample: empty dataset");
    detail::require(fraction > 0.0 && fraction <= 1.0, "subsample: fraction must be in (0, 1]");
    auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    k = std::clamp<std::size_t>(k, 1, n);
    return sample_indices(n, k, rng);
}

inline Dataset subsample(const Dataset& data, double fraction, Rng& rng) {
    const auto idx = subsample(data.size(), fraction, rng);
    return data.subset(idx);
}

struct CrowdMember {
    std::string model_id;
    double fraction = 0.0;
    double flip_prob = 0.0;
    std::size_t train_size = 0;
    double accuracy = 0.0;
    std::vector<int> predictions;
};

struct CrowdResult {
    ResponseMatrix responses;
    std::vector<CrowdMember> members;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::optional<CrowdMember> train_member(const Dataset& train, const Dataset& all_examples, const CrowdConfig& cfg,
                                               std::size_t m, std::string& warning) {
    Rng rng(derive_seed(cfg.seed, "crowd.member", m));
    CrowdMember member;
    member.model_id = "member-" + std::to_string(m);
    member.fraction = cfg.subsample_fractions[m % cfg.subsample_fractions.size()];
    member.flip_prob = rng.uniform(cfg.flip_prob_range.first, cfg.flip_prob_range.second);
    if (!cfg.flip_probs.empty()) {
        member.flip_prob = cfg.flip_probs[m % cfg.flip_probs.size()];
    }
    try {
        Dataset sub = subsample(train, member.fraction, rng);
        sub.labels = corrupt_labels(sub.labels, train.n_classes, member.flip_prob, rng);
        member.train_size = sub.size();
        auto learner = make_learner(cfg.learner, train.n_features, train.n_classes, derive_seed(cfg.seed, "crowd.learner", m));
        const auto idx = all_indices(sub);
        for (std::size_t e = 0; e < cfg.epochs; ++e) {
            const double loss = learner->train_epoch(sub, idx, cfg.lr);
            if (!std::isfinite(loss)) {
                throw std::runtime_error("non-finite training loss");
            }
        }
        member.predictions = learner->predict(all_examples);
        member.accuracy = accuracy(member.predictions, all_examples.labels);
    } catch (const std::exception& e) {
        warning = member.model_id + " skipped: " + e.what();
        return std::nullopt;
    }
    return member;
}

} // namespace detail

/**
 * Train `cfg.ensemble_size` members and grade each one on `all_examples` against its labels.
 * Members whose training fails are dropped with a warning; at least two must remain.
 */
inline CrowdResult generate_crowd(const Dataset& train, const Dataset& all_examples, const CrowdConfig& cfg) {
    cfg.validate();
    train.validate();
    all_examples.validate();
    detail::require(!train.empty(), "generate_crowd: empty training set");
    detail::require(!all_examples.empty(), "generate_crowd: nothing to label");
    detail::require(train.n_features == all_examples.n_features, "generate_crowd: feature dimension mismatch");

    std::vector<std::optional<CrowdMember>> slots(cfg.ensemble_size);
    std::vector<std::string> slot_warnings(cfg.ensemble_size);
    parallel_for(cfg.ensemble_size, [&](std::size_t m) {
        slots[m] = detail::train_member(train, all_examples, cfg, m, slot_warnings[m]);
    });

    CrowdResult out;
    for (std::size_t m = 0; m < cfg.ensemble_size; ++m) {
        if (slots[m]) {
            out.members.push_back(std::move(*slots[m]));
        } else {
            out.warnings.push_back(slot_warnings[m]);
        }
    }
    detail::require(out.members.size() >= 2, "generate_crowd: fewer than two members trained successfully");

    std::vector<std::string> model_ids;
    std::vector<std::int8_t> cells;
    cells.reserve(out.members.size() * all_examples.size());
    for (const auto& mem : out.members) {
        model_ids.push_back(mem.model_id);
        const auto row = grade_responses(mem.predictions, all_examples.labels);
        cells.insert(cells.end(), row.begin(), row.end());
    }
    out.responses = ResponseMatrix(std::move(model_ids), all_examples.ids, std::move(cells));
    return out;
}

} // namespace irtcl

#endif
