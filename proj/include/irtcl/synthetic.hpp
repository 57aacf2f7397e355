#ifndef IRTCL_SYNTHETIC_HPP
#define IRTCL_SYNTHETIC_HPP

#include "dataset.hpp"
#include "rng.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace irtcl {

/**
 * Class-conditional isotropic Gaussians with equal priors.
 *
 * Class means lie on the unit circle in the first two feature dimensions (on +-1 of the first
 * axis when there is one feature). Remaining dimensions carry only noise. `margin_decay` is the
 * per-dimension standard deviation around each mean: small values give well-separated classes,
 * large values push many examples toward or across the decision boundary.
 */
struct SynthTaskConfig {
    std::size_t n_train = 1000;
    std::size_t n_dev = 200;
    std::size_t n_test = 500;
    std::size_t n_features = 2;
    std::size_t n_classes = 2;
    double margin_decay = 0.5;
    double noise_rate = 0.0;
    std::uint64_t seed = 0;
    /// Filler text length range; the length is independent of every other column.
    std::size_t min_text_tokens = 1;
    std::size_t max_text_tokens = 30;

    void validate() const {
        detail::require(n_train >= 1 && n_dev >= 1 && n_test >= 1, "SynthTaskConfig: split sizes must be >= 1");
        detail::require(n_features >= 1, "SynthTaskConfig: need at least one feature");
        detail::require(n_classes >= 2, "SynthTaskConfig: need at least two classes");
        detail::require(n_classes == 2 || n_features >= 2, "SynthTaskConfig: more than two classes need two or more features");
        detail::require(margin_decay > 0.0, "SynthTaskConfig: margin_decay must be positive");
        detail::require(noise_rate >= 0.0 && noise_rate <= 0.3, "SynthTaskConfig: noise_rate must be in [0, 0.3]");
        detail::require(min_text_tokens >= 1 && min_text_tokens <= max_text_tokens, "SynthTaskConfig: bad text length range");
    }
};

struct SyntheticTask {
    Dataset train;
    Dataset dev;
    Dataset test;
};

inline std::vector<std::vector<double>> synthetic_class_means(std::size_t n_features, std::size_t n_classes) {
    std::vector<std::vector<double>> means(n_classes, std::vector<double>(n_features, 0.0));
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (n_features == 1) {
            means[c][0] = c == 0 ? 1.0 : -1.0;
        } else {
            const double a = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(n_classes);
            means[c][0] = std::cos(a);
            means[c][1] = std::sin(a);
        }
    }
    return means;
}

/**
 * Signed distance from `x` to the boundary of the Bayes region of class `label`:
 * positive inside the region, negative outside.
 */
inline double planted_margin(std::span<const double> x, int label, const std::vector<std::vector<double>>& means) {
    const auto& mg = means[static_cast<std::size_t>(label)];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < means.size(); ++l) {
        if (static_cast<int>(l) == label) {
            continue;
        }
        const auto& ml = means[l];
        double dot = 0.0, norm2 = 0.0;
        for (std::size_t f = 0; f < x.size(); ++f) {
            const double dir = mg[f] - ml[f];
            dot += (x[f] - 0.5 * (mg[f] + ml[f])) * dir;
            norm2 += dir * dir;
        }
        best = std::min(best, dot / std::sqrt(norm2));
    }
    return best;
}

namespace detail {

inline Dataset sample_split(const SynthTaskConfig& cfg, std::size_t n, const std::string& prefix, Rng& rng,
                            const std::vector<std::vector<double>>& means) {
    Dataset d;
    d.n_features = cfg.n_features;
    d.n_classes = cfg.n_classes;
    d.features.reserve(n * cfg.n_features);
    for (std::size_t k = 0; k < n; ++k) {
        const auto c = static_cast<int>(rng.below(cfg.n_classes));
        std::vector<double> x(cfg.n_features);
        for (std::size_t f = 0; f < cfg.n_features; ++f) {
            x[f] = means[static_cast<std::size_t>(c)][f] + cfg.margin_decay * rng.normal();
        }
        int label = c;
        if (rng.bernoulli(cfg.noise_rate)) {
            label = static_cast<int>((static_cast<std::size_t>(c) + 1 + rng.below(cfg.n_classes - 1)) % cfg.n_classes);
        }
        const std::size_t len = cfg.min_text_tokens + rng.below(cfg.max_text_tokens - cfg.min_text_tokens + 1);
        std::string text;
        for (std::size_t t = 0; t < len; ++t) {
            if (t > 0) {
                text += ' ';
            }
            text += "w" + std::to_string(rng.below(1000));
        }
        d.ids.push_back(prefix + "-" + std::to_string(k));
        d.features.insert(d.features.end(), x.begin(), x.end());
        d.labels.push_back(label);
        d.planted_margin.push_back(planted_margin(x, label, means));
        d.text.push_back({std::move(text), {}});
    }
    return d;
}

} // namespace detail

/**
 * Train/dev/test splits with gold labels, planted margins and filler text.
 * Labels flipped by `noise_rate` keep their new label, so their planted margin is negative.
 */
inline SyntheticTask make_synthetic_task(const SynthTaskConfig& cfg) {
    cfg.validate();
    const auto means = synthetic_class_means(cfg.n_features, cfg.n_classes);
    SyntheticTask task;
    Rng train_rng(derive_seed(cfg.seed, "task.train"));
    Rng dev_rng(derive_seed(cfg.seed, "task.dev"));
    Rng test_rng(derive_seed(cfg.seed, "task.test"));
    task.train = detail::sample_split(cfg, cfg.n_train, "train", train_rng, means);
    task.dev = detail::sample_split(cfg, cfg.n_dev, "dev", dev_rng, means);
    task.test = detail::sample_split(cfg, cfg.n_test, "test", test_rng, means);
    return task;
}

} // namespace irtcl

#endif
