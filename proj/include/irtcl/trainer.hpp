#ifndef IRTCL_TRAINER_HPP
#define IRTCL_TRAINER_HPP

#include "ability.hpp"
#include "curriculum.hpp"
#include "dataset.hpp"
#include "learner.hpp"
#include "rng.hpp"

#include <chrono>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

/**
 * @file trainer.hpp
 * @brief Training loops: fully supervised, competence-based schedules and ability-driven
 * dynamic selection, all with a held-out dev split for early stopping.
 */

namespace irtcl {

struct TrainConfig {
    std::size_t num_epochs = 100;
    double lr = 0.1;
    std::size_t early_stop_patience = 10;
    double dev_fraction = 0.10;
    std::uint64_t seed = 0;
    CurriculumStrategy strategy{};
    AbilityBounds bounds{};

    void validate() const {
        detail::require(num_epochs >= 1, "TrainConfig: num_epochs must be >= 1");
        detail::require(lr > 0.0, "TrainConfig: lr must be positive");
        detail::require(early_stop_patience >= 1, "TrainConfig: early_stop_patience must be >= 1");
        detail::require(dev_fraction > 0.0 && dev_fraction < 0.5, "TrainConfig: dev_fraction must be in (0, 0.5)");
        strategy.validate();
    }

    /// Step at which the competence schedules reach 1.
    std::size_t schedule_T() const {
        return strategy.T ? *strategy.T : std::max<std::size_t>(1, num_epochs / 2);
    }
};

struct EpochRecord {
    std::size_t epoch = 0;
    std::optional<double> theta_hat;
    bool theta_clamped = false;
    std::size_t selected_count = 0;
    bool fallback = false;
    /// Parameter checksum identical before and after the probe forward pass.
    bool probe_pure = true;
    double loss = 0.0;
    double train_acc = 0.0;
    double dev_acc = 0.0;
};

struct TrainResult {
    std::string strategy;
    std::uint64_t seed = 0;
    std::vector<EpochRecord> epochs;
    /// 1-based epoch with the best dev accuracy.
    std::size_t convergence_epoch = 0;
    double best_dev_acc = 0.0;
    double test_acc = 0.0;
    std::size_t train_size = 0;
    std::vector<std::size_t> dev_indices;
    std::vector<std::size_t> probe_indices;
    double wall_time_s = 0.0;
};

/// Called after every epoch with the record and the selected indices into the full train set.
using EpochObserver = std::function<void(const EpochRecord&, std::span<const std::size_t>, const Learner&)>;

/// Sorted uniform sample of min(n, train_size) positions, drawn once before training.
inline std::vector<std::size_t> sample_probe_set(std::size_t train_size, std::size_t n, Rng& rng) {
    detail::require(train_size >= 1, "sample_probe_set: empty training set");
    detail::require(n >= 1, "sample_probe_set: probe size must be >= 1");
    return sample_indices(train_size, std::min(n, train_size), rng);
}

/// Indices of `n` examples split into (train, dev) with round(dev_fraction n) dev examples.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_dev(std::size_t n, double dev_fraction, Rng& rng) {
    detail::require(n >= 2, "split_train_dev: need at least two examples");
    auto n_dev = static_cast<std::size_t>(std::llround(dev_fraction * static_cast<double>(n)));
    n_dev = std::clamp<std::size_t>(n_dev, 1, n - 1);
    auto dev = sample_indices(n, n_dev, rng);
    std::vector<std::size_t> train;
    train.reserve(n - n_dev);
    std::size_t d = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (d < dev.size() && dev[d] == k) {
            ++d;
        } else {
            train.push_back(k);
        }
    }
    return {std::move(train), std::move(dev)};
}

namespace detail {

/// Per-epoch selection of training indices (into the full train set).
using Selector = std::function<std::vector<std::size_t>(std::size_t epoch, const Learner&, EpochRecord&)>;

inline double accuracy_on(const Learner& learner, const Dataset& data, std::span<const std::size_t> idx) {
    if (idx.empty()) {
        return 0.0;
    }
    const auto pred = learner.predict(data, idx);
    std::size_t hit = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        hit += pred[k] == data.labels[idx[k]];
    }
    return static_cast<double>(hit) / static_cast<double>(idx.size());
}

struct SplitState {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> dev_idx;
};

inline SplitState make_split(const Dataset& train, const TrainConfig& cfg) {
    Rng rng(derive_seed(cfg.seed, "trainer.dev_split"));
    auto [tr, dv] = split_train_dev(train.size(), cfg.dev_fraction, rng);
    return {std::move(tr), std::move(dv)};
}

inline TrainResult run_loop(Learner& learner, const Dataset& train, const Dataset& test, const TrainConfig& cfg,
                            const SplitState& split, const Selector& select, const EpochObserver& observer) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult res;
    res.strategy = cfg.strategy.label();
    res.seed = cfg.seed;
    res.train_size = split.train_idx.size();
    res.dev_indices = split.dev_idx;

    std::vector<double> best_params = learner.parameters();
    double best_dev = -1.0;
    std::size_t best_epoch = 0;
    for (std::size_t e = 0; e < cfg.num_epochs; ++e) {
        EpochRecord rec;
        rec.epoch = e;
        const auto selected = select(e, learner, rec);
        rec.selected_count = selected.size();
        rec.loss = learner.train_epoch(train, selected, cfg.lr);
        rec.train_acc = accuracy_on(learner, train, split.train_idx);
        rec.dev_acc = accuracy_on(learner, train, split.dev_idx);
        res.epochs.push_back(rec);
        if (observer) {
            observer(rec, selected, learner);
        }
        if (rec.dev_acc > best_dev) {
            best_dev = rec.dev_acc;
            best_epoch = e;
            best_params = learner.parameters();
        } else if (e - best_epoch >= cfg.early_stop_patience) {
            break;
        }
    }
    learner.set_parameters(best_params);
    res.best_dev_acc = best_dev;
    res.convergence_epoch = best_epoch + 1;
    res.test_acc = test.empty() ? 0.0 : accuracy_on(learner, test, all_indices(test));
    res.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

inline void check_difficulties(const Dataset& train, std::span<const double> difficulties) {
    require(difficulties.size() == train.size(), "trainer: need one difficulty per training example");
    for (double b : difficulties) {
        require(std::isfinite(b), "trainer: non-finite difficulty");
    }
}

} // namespace detail

/// Every epoch trains on the whole training split.
inline TrainResult train_full(Learner& learner, const Dataset& train, const Dataset& test, const TrainConfig& cfg,
                              const EpochObserver& observer = {}) {
    cfg.validate();
    train.validate();
    const auto split = detail::make_split(train, cfg);
    auto select = [&](std::size_t, const Learner&, EpochRecord&) { return split.train_idx; };
    return detail::run_loop(learner, train, test, cfg, split, select, observer);
}

/**
 * Competence-based curriculum: at epoch t, the easiest c(t) fraction of the training split
 * according to `difficulties` (one per example of `train`).
 */
inline TrainResult train_cb(Learner& learner, const Dataset& train, std::span<const double> difficulties, const Dataset& test,
                            const TrainConfig& cfg, const EpochObserver& observer = {}) {
    cfg.validate();
    train.validate();
    detail::check_difficulties(train, difficulties);
    const auto kind = cfg.strategy.kind;
    detail::require(kind == StrategyKind::CBLinear || kind == StrategyKind::CBRoot, "train_cb: strategy must be cb-linear or cb-root");
    const auto split = detail::make_split(train, cfg);
    std::vector<double> split_b;
    for (std::size_t k : split.train_idx) {
        split_b.push_back(difficulties[k]);
    }
    const auto T = static_cast<double>(cfg.schedule_T());
    auto select = [&](std::size_t e, const Learner&, EpochRecord&) {
        const double c = kind == StrategyKind::CBLinear ? cb_linear(static_cast<double>(e), T, cfg.strategy.c0)
                                                        : cb_root(static_cast<double>(e), T, cfg.strategy.c0);
        auto pos = select_by_proportion(split_b, c);
        for (auto& p : pos) {
            p = split.train_idx[p];
        }
        return pos;
    };
    return detail::run_loop(learner, train, test, cfg, split, select, observer);
}

/**
 * Ability-driven dynamic selection. Each epoch: label the fixed probe set without updating the
 * learner, grade it, score the learner's ability against the probe difficulties, then train
 * on every training-split example with difficulty <= that ability. If nothing qualifies, the
 * easiest max(1, round(0.01 n)) examples are used and the epoch is flagged.
 *
 * The dev split is used for early stopping only.
 */
inline TrainResult train_ddaclae(Learner& learner, const Dataset& train, std::span<const double> difficulties, const Dataset& test,
                                 const TrainConfig& cfg, const EpochObserver& observer = {}) {
    cfg.validate();
    train.validate();
    detail::check_difficulties(train, difficulties);
    detail::require(cfg.strategy.kind == StrategyKind::DDaCLAE, "train_ddaclae: strategy must be ddaclae");
    const auto split = detail::make_split(train, cfg);
    std::vector<double> split_b;
    for (std::size_t k : split.train_idx) {
        split_b.push_back(difficulties[k]);
    }

    Rng probe_rng(derive_seed(cfg.seed, "trainer.probe"));
    const auto probe_pos = sample_probe_set(split.train_idx.size(), cfg.strategy.probe_size, probe_rng);
    std::vector<std::size_t> probe_idx;
    std::vector<double> probe_b;
    std::vector<int> probe_gold;
    for (std::size_t p : probe_pos) {
        probe_idx.push_back(split.train_idx[p]);
        probe_b.push_back(split_b[p]);
        probe_gold.push_back(train.labels[split.train_idx[p]]);
    }

    auto select = [&](std::size_t, const Learner& l, EpochRecord& rec) {
        const auto before = parameter_checksum(l);
        const auto predicted = l.predict(train, probe_idx);
        rec.probe_pure = parameter_checksum(l) == before;
        const auto z = grade_responses(predicted, probe_gold);
        const auto est = estimate_ability(z, probe_b, cfg.bounds);
        rec.theta_hat = est.theta;
        rec.theta_clamped = est.clamped;
        auto pos = select_by_ability(split_b, est.theta);
        if (pos.empty()) {
            rec.fallback = true;
            pos = select_by_proportion(split_b, 0.01);
        }
        for (auto& p : pos) {
            p = split.train_idx[p];
        }
        return pos;
    };
    auto res = detail::run_loop(learner, train, test, cfg, split, select, observer);
    res.probe_indices = std::move(probe_idx);
    return res;
}

/// Dispatch on `cfg.strategy.kind`. `difficulties` may be empty for the fully supervised loop.
inline TrainResult train_with_strategy(Learner& learner, const Dataset& train, std::span<const double> difficulties, const Dataset& test,
                                       const TrainConfig& cfg, const EpochObserver& observer = {}) {
    switch (cfg.strategy.kind) {
    case StrategyKind::FullySupervised:
        return train_full(learner, train, test, cfg, observer);
    case StrategyKind::CBLinear:
    case StrategyKind::CBRoot:
        return train_cb(learner, train, difficulties, test, cfg, observer);
    case StrategyKind::DDaCLAE:
        return train_ddaclae(learner, train, difficulties, test, cfg, observer);
    }
    throw InvalidArgument("unknown strategy");
}

} // namespace irtcl

#endif
