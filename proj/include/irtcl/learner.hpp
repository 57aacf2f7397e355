#ifndef IRTCL_LEARNER_HPP
#define IRTCL_LEARNER_HPP

#include "dataset.hpp"
#include "error.hpp"
#include "rng.hpp"

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

/**
 * @file learner.hpp
 * @brief Small trainable classifiers behind one interface.
 *
 * Both built-in learners use softmax cross-entropy, per-example SGD with a constant step and
 * no momentum, and predict the arg-max class with ties going to the lowest class index.
 */

namespace irtcl {

class Learner {
public:
    virtual ~Learner() = default;

    virtual std::string name() const = 0;

    /// Restore a deterministic initial state (parameters and the shuffling stream).
    virtual void reset(std::uint64_t seed) = 0;

    /// One shuffled SGD pass over `indices`; returns the mean pre-update loss.
    virtual double train_epoch(const Dataset& data, std::span<const std::size_t> indices, double lr) = 0;

    /// Arg-max labels for `indices`. Never changes the learner.
    virtual std::vector<int> predict(const Dataset& data, std::span<const std::size_t> indices) const = 0;

    std::vector<int> predict(const Dataset& data) const {
        const auto idx = all_indices(data);
        return predict(data, idx);
    }

    virtual std::vector<double> parameters() const = 0;
    virtual void set_parameters(std::span<const double> p) = 0;

    /// Cross-entropy of one example and its gradient with respect to `parameters()`.
    virtual double loss_and_gradient(std::span<const double> x, int y, std::vector<double>& grad) const = 0;

    virtual std::unique_ptr<Learner> clone() const = 0;
};

/// FNV-1a over the raw bytes of the parameter vector.
inline std::uint64_t parameter_checksum(const Learner& learner) {
    const auto p = learner.parameters();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.data());
    for (std::size_t k = 0; k < p.size() * sizeof(double); ++k) {
        h ^= bytes[k];
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace detail {

/// In-place softmax over `z`; returns log-sum-exp.
inline double softmax_inplace(std::span<double> z) {
    double mx = z[0];
    for (double v : z) {
        mx = std::max(mx, v);
    }
    double s = 0.0;
    for (double& v : z) {
        v = std::exp(v - mx);
        s += v;
    }
    for (double& v : z) {
        v /= s;
    }
    return mx + std::log(s);
}

inline int argmax_lowest(std::span<const double> z) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < z.size(); ++k) {
        if (z[k] > z[best]) {
            best = k;
        }
    }
    return static_cast<int>(best);
}

} // namespace detail

/// Shared SGD machinery over a flat parameter vector.
class SgdLearner : public Learner {
public:
    SgdLearner(std::size_t n_features, std::size_t n_classes) : n_features_(n_features), n_classes_(n_classes) {
        detail::require(n_features >= 1, "learner: need at least one feature");
        detail::require(n_classes >= 2, "learner: need at least two classes");
    }

    using Learner::predict;

    double train_epoch(const Dataset& data, std::span<const std::size_t> indices, double lr) override {
        detail::require(!indices.empty(), "train_epoch: empty training subset");
        detail::require(lr >= 0.0 && std::isfinite(lr), "train_epoch: learning rate must be finite and non-negative");
        check_dims(data);
        std::vector<std::size_t> order(indices.begin(), indices.end());
        rng_.shuffle(order);
        std::vector<double> grad(params_.size());
        double total = 0.0;
        for (std::size_t k : order) {
            detail::require(k < data.size(), "train_epoch: index out of range");
            total += loss_and_gradient(data.row(k), data.labels[k], grad);
            if (lr != 0.0) {
                for (std::size_t p = 0; p < params_.size(); ++p) {
                    params_[p] -= lr * grad[p];
                }
            }
        }
        return total / static_cast<double>(order.size());
    }

    std::vector<int> predict(const Dataset& data, std::span<const std::size_t> indices) const override {
        check_dims(data);
        std::vector<int> out;
        out.reserve(indices.size());
        std::vector<double> logits(n_classes_);
        std::vector<double> scratch;
        for (std::size_t k : indices) {
            detail::require(k < data.size(), "predict: index out of range");
            forward(data.row(k), logits, scratch);
            out.push_back(detail::argmax_lowest(logits));
        }
        return out;
    }

    std::vector<double> parameters() const override { return params_; }

    void set_parameters(std::span<const double> p) override {
        detail::require(p.size() == params_.size(), "set_parameters: size mismatch");
        params_.assign(p.begin(), p.end());
    }

    std::size_t n_features() const { return n_features_; }
    std::size_t n_classes() const { return n_classes_; }

protected:
    /// Logits for one row; `hidden` is scratch for intermediate activations.
    virtual void forward(std::span<const double> x, std::vector<double>& logits, std::vector<double>& hidden) const = 0;

    void check_dims(const Dataset& data) const {
        detail::require(data.n_features == n_features_, "learner: feature dimension mismatch");
    }

    std::size_t n_features_;
    std::size_t n_classes_;
    std::vector<double> params_;
    Rng rng_;
};

/// Multinomial logistic regression, zero-initialized. Layout: W (K x d) row-major, then bias (K).
class LogisticLearner final : public SgdLearner {
public:
    LogisticLearner(std::size_t n_features, std::size_t n_classes, std::uint64_t seed = 0) : SgdLearner(n_features, n_classes) {
        reset(seed);
    }

    std::string name() const override { return "logistic"; }

    void reset(std::uint64_t seed) override {
        params_.assign(n_classes_ * (n_features_ + 1), 0.0);
        rng_ = Rng(derive_seed(seed, "learner.shuffle"));
    }

    double loss_and_gradient(std::span<const double> x, int y, std::vector<double>& grad) const override {
        detail::require(x.size() == n_features_, "loss_and_gradient: feature dimension mismatch");
        std::vector<double> p(n_classes_), scratch;
        forward(x, p, scratch);
        const double logit_y = p[static_cast<std::size_t>(y)];
        const double loss = detail::softmax_inplace(p) - logit_y;
        grad.assign(params_.size(), 0.0);
        const std::size_t bias = n_classes_ * n_features_;
        for (std::size_t c = 0; c < n_classes_; ++c) {
            const double r = p[c] - (static_cast<int>(c) == y ? 1.0 : 0.0);
            for (std::size_t f = 0; f < n_features_; ++f) {
                grad[c * n_features_ + f] = r * x[f];
            }
            grad[bias + c] = r;
        }
        return loss;
    }

    std::unique_ptr<Learner> clone() const override { return std::make_unique<LogisticLearner>(*this); }

protected:
    void forward(std::span<const double> x, std::vector<double>& logits, std::vector<double>&) const override {
        const std::size_t bias = n_classes_ * n_features_;
        for (std::size_t c = 0; c < n_classes_; ++c) {
            double s = params_[bias + c];
            for (std::size_t f = 0; f < n_features_; ++f) {
                s += params_[c * n_features_ + f] * x[f];
            }
            logits[c] = s;
        }
    }
};

/**
 * One hidden tanh layer. Layout: W1 (h x d), b1 (h), W2 (K x h), b2 (K).
 * Weights start uniform in +-sqrt(6 / (fan_in + fan_out)), biases at zero.
 */
class MlpLearner final : public SgdLearner {
public:
    MlpLearner(std::size_t n_features, std::size_t n_classes, std::size_t hidden = 16, std::uint64_t seed = 0)
        : SgdLearner(n_features, n_classes), hidden_(hidden) {
        detail::require(hidden >= 1, "MlpLearner: hidden width must be >= 1");
        reset(seed);
    }

    std::string name() const override { return "mlp"; }

    void reset(std::uint64_t seed) override {
        const std::size_t d = n_features_, h = hidden_, k = n_classes_;
        params_.assign(h * d + h + k * h + k, 0.0);
        Rng init(derive_seed(seed, "learner.init"));
        const double a1 = std::sqrt(6.0 / static_cast<double>(d + h));
        for (std::size_t p = 0; p < h * d; ++p) {
            params_[p] = init.uniform(-a1, a1);
        }
        const double a2 = std::sqrt(6.0 / static_cast<double>(h + k));
        for (std::size_t p = 0; p < k * h; ++p) {
            params_[w2() + p] = init.uniform(-a2, a2);
        }
        rng_ = Rng(derive_seed(seed, "learner.shuffle"));
    }

    double loss_and_gradient(std::span<const double> x, int y, std::vector<double>& grad) const override {
        detail::require(x.size() == n_features_, "loss_and_gradient: feature dimension mismatch");
        const std::size_t d = n_features_, h = hidden_, k = n_classes_;
        std::vector<double> p(k), act;
        forward(x, p, act);
        const double logit_y = p[static_cast<std::size_t>(y)];
        const double loss = detail::softmax_inplace(p) - logit_y;
        grad.assign(params_.size(), 0.0);
        std::vector<double> dact(h, 0.0);
        for (std::size_t c = 0; c < k; ++c) {
            const double r = p[c] - (static_cast<int>(c) == y ? 1.0 : 0.0);
            for (std::size_t u = 0; u < h; ++u) {
                grad[w2() + c * h + u] = r * act[u];
                dact[u] += r * params_[w2() + c * h + u];
            }
            grad[b2() + c] = r;
        }
        for (std::size_t u = 0; u < h; ++u) {
            const double dz = dact[u] * (1.0 - act[u] * act[u]);
            for (std::size_t f = 0; f < d; ++f) {
                grad[u * d + f] = dz * x[f];
            }
            grad[b1() + u] = dz;
        }
        return loss;
    }

    std::unique_ptr<Learner> clone() const override { return std::make_unique<MlpLearner>(*this); }

    std::size_t hidden() const { return hidden_; }

protected:
    void forward(std::span<const double> x, std::vector<double>& logits, std::vector<double>& act) const override {
        const std::size_t d = n_features_, h = hidden_, k = n_classes_;
        act.resize(h);
        for (std::size_t u = 0; u < h; ++u) {
            double s = params_[b1() + u];
            for (std::size_t f = 0; f < d; ++f) {
                s += params_[u * d + f] * x[f];
            }
            act[u] = std::tanh(s);
        }
        for (std::size_t c = 0; c < k; ++c) {
            double s = params_[b2() + c];
            for (std::size_t u = 0; u < h; ++u) {
                s += params_[w2() + c * h + u] * act[u];
            }
            logits[c] = s;
        }
    }

private:
    std::size_t b1() const { return hidden_ * n_features_; }
    std::size_t w2() const { return b1() + hidden_; }
    std::size_t b2() const { return w2() + n_classes_ * hidden_; }

    std::size_t hidden_;
};

struct LearnerSpec {
    std::string kind = "logistic"; // "logistic" | "mlp"
    std::size_t hidden = 16;
};

inline std::unique_ptr<Learner> make_learner(const LearnerSpec& spec, std::size_t n_features, std::size_t n_classes, std::uint64_t seed) {
    if (spec.kind == "logistic") {
        return std::make_unique<LogisticLearner>(n_features, n_classes, seed);
    }
    if (spec.kind == "mlp") {
        return std::make_unique<MlpLearner>(n_features, n_classes, spec.hidden, seed);
    }
    throw InvalidArgument("unknown learner kind: " + spec.kind);
}

inline double accuracy(std::span<const int> predicted, std::span<const int> gold) {
    detail::require(predicted.size() == gold.size(), "accuracy: length mismatch");
    if (predicted.empty()) {
        return 0.0;
    }
    std::size_t hit = 0;
    for (std::size_t k = 0; k < predicted.size(); ++k) {
        hit += predicted[k] == gold[k];
    }
    return static_cast<double>(hit) / static_cast<double>(predicted.size());
}

} // namespace irtcl

#endif
