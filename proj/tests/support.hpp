#ifndef IRTCL_TESTS_SUPPORT_HPP
#define IRTCL_TESTS_SUPPORT_HPP

// Independent oracles and fixtures shared by the unit tests and the acceptance binary.
// Nothing here calls into the code under test for the quantity being checked.

#include <irtcl/dataset.hpp>
#include <irtcl/learner.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace irtcl::testing {

inline double oracle_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// log p(z | theta, b) summed cell by cell, written without any shared helper.
inline double oracle_log_likelihood(const std::vector<std::vector<int>>& z, const std::vector<double>& thetas,
                                    const std::vector<double>& bs) {
    double s = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
        for (std::size_t i = 0; i < z[j].size(); ++i) {
            if (z[j][i] < 0) {
                continue;
            }
            const double p = oracle_sigmoid(thetas[j] - bs[i]);
            s += z[j][i] == 1 ? std::log(p) : std::log(1.0 - p);
        }
    }
    return s;
}

inline double oracle_ability_loglik(double theta, const std::vector<std::int8_t>& z, const std::vector<double>& bs) {
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double p = oracle_sigmoid(theta - bs[i]);
        s += z[i] ? std::log(p) : std::log1p(-p);
    }
    return s;
}

/// Argmax of the ability log-likelihood over a uniform grid on [lo, hi].
inline double grid_argmax(const std::vector<std::int8_t>& z, const std::vector<double>& bs, double lo = -4.0, double hi = 4.0,
                          double step = 1e-4) {
    const auto n = static_cast<long>(std::llround((hi - lo) / step));
    double best = lo;
    double best_v = -INFINITY;
    for (long k = 0; k <= n; ++k) {
        const double t = lo + static_cast<double>(k) * step;
        const double v = oracle_ability_loglik(t, z, bs);
        if (v > best_v) {
            best_v = v;
            best = t;
        }
    }
    return best;
}

/**
 * Same answer as grid_argmax at the default step, found faster: the log-likelihood is concave,
 * so the fine-grid argmax lies within one coarse step of the coarse-grid argmax.
 */
inline double refined_grid_argmax(const std::vector<std::int8_t>& z, const std::vector<double>& bs, double lo = -4.0, double hi = 4.0) {
    const double fine = 1e-4;
    const double coarse = grid_argmax(z, bs, lo, hi, 1e-2);
    const auto n = std::llround((hi - lo) / fine);
    const auto centre = std::llround((coarse - lo) / fine);
    const auto k0 = std::max<long long>(0, centre - 200);
    const auto k1 = std::min<long long>(n, centre + 200);
    double best = lo + static_cast<double>(k0) * fine;
    double best_v = -INFINITY;
    for (auto k = k0; k <= k1; ++k) {
        const double t = lo + static_cast<double>(k) * fine;
        const double v = oracle_ability_loglik(t, z, bs);
        if (v > best_v) {
            best_v = v;
            best = t;
        }
    }
    return best;
}

/// Brute-force Spearman: average ranks by counting, then Pearson.
inline double oracle_spearman(const std::vector<double>& x, const std::vector<double>& y) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            double less = 0, equal = 0;
            for (double w : v) {
                less += w < v[i];
                equal += w == v[i];
            }
            r[i] = less + (equal + 1.0) / 2.0;
        }
        return r;
    };
    const auto rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i] / n;
        my += ry[i] / n;
    }
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

/// Two Gaussian blobs at (-3, -3) and (3, 3) with unit spread: separable in practice.
inline Dataset make_blobs(std::size_t n, std::uint64_t seed, double spread = 1.0) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> noise(0.0, spread);
    Dataset d;
    d.n_features = 2;
    d.n_classes = 2;
    for (std::size_t k = 0; k < n; ++k) {
        const int y = static_cast<int>(k % 2);
        const double c = y == 0 ? -3.0 : 3.0;
        d.ids.push_back("blob-" + std::to_string(k));
        d.features.push_back(c + noise(gen));
        d.features.push_back(c + noise(gen));
        d.labels.push_back(y);
    }
    return d;
}

/// Sample a J x I response matrix from the 1PL model with the given parameters.
inline std::vector<std::vector<int>> sample_responses(const std::vector<double>& thetas, const std::vector<double>& bs, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<int>> z(thetas.size(), std::vector<int>(bs.size()));
    for (std::size_t j = 0; j < thetas.size(); ++j) {
        for (std::size_t i = 0; i < bs.size(); ++i) {
            z[j][i] = u(gen) < oracle_sigmoid(thetas[j] - bs[i]) ? 1 : 0;
        }
    }
    return z;
}

inline std::vector<double> standard_normals(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) {
        x = nd(gen);
    }
    return v;
}

/// Central finite-difference check of `loss_and_gradient`; returns the worst relative error.
inline double gradient_check(Learner& learner, std::span<const double> x, int y, double h = 1e-6) {
    std::vector<double> grad;
    learner.loss_and_gradient(x, y, grad);
    auto params = learner.parameters();
    double worst = 0.0;
    std::vector<double> scratch;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double orig = params[k];
        params[k] = orig + h;
        learner.set_parameters(params);
        const double up = learner.loss_and_gradient(x, y, scratch);
        params[k] = orig - h;
        learner.set_parameters(params);
        const double down = learner.loss_and_gradient(x, y, scratch);
        params[k] = orig;
        const double fd = (up - down) / (2.0 * h);
        const double err = std::abs(fd - grad[k]) / std::max(1.0, std::max(std::abs(fd), std::abs(grad[k])));
        worst = std::max(worst, err);
    }
    learner.set_parameters(params);
    return worst;
}

/**
 * Learner whose behaviour is scripted instead of learned. After `e` calls to train_epoch it
 * answers correctly exactly on the examples whose scripted difficulty is <= thresholds[e]
 * (the last threshold repeats). Its only state is the epoch counter and a running sum of the
 * selection sizes it was trained on.
 */
class ScriptedLearner final : public Learner {
public:
    ScriptedLearner(std::vector<double> difficulty, std::vector<int> gold, std::size_t n_classes, std::vector<double> thresholds)
        : difficulty_(std::move(difficulty)), gold_(std::move(gold)), n_classes_(n_classes), thresholds_(std::move(thresholds)) {}

    std::string name() const override { return "scripted"; }
    void reset(std::uint64_t) override { params_ = {0.0, 0.0}; }

    double train_epoch(const Dataset&, std::span<const std::size_t> indices, double) override {
        entry_checksums.push_back(parameter_checksum(*this));
        params_[0] += 1.0;
        params_[1] += static_cast<double>(indices.size());
        exit_checksums.push_back(parameter_checksum(*this));
        return 0.0;
    }

    std::vector<int> predict(const Dataset&, std::span<const std::size_t> indices) const override {
        const auto e = static_cast<std::size_t>(params_[0]);
        const double t = thresholds_[std::min(e, thresholds_.size() - 1)];
        std::vector<int> out;
        for (std::size_t k : indices) {
            const bool right = difficulty_[k] <= t;
            out.push_back(right ? gold_[k] : static_cast<int>((static_cast<std::size_t>(gold_[k]) + 1) % n_classes_));
        }
        return out;
    }

    std::vector<double> parameters() const override { return params_; }
    void set_parameters(std::span<const double> p) override { params_.assign(p.begin(), p.end()); }
    double loss_and_gradient(std::span<const double>, int, std::vector<double>& grad) const override {
        grad.assign(params_.size(), 0.0);
        return 0.0;
    }
    std::unique_ptr<Learner> clone() const override { return std::make_unique<ScriptedLearner>(*this); }

    std::vector<std::uint64_t> entry_checksums;
    std::vector<std::uint64_t> exit_checksums;

private:
    std::vector<double> difficulty_;
    std::vector<int> gold_;
    std::size_t n_classes_;
    std::vector<double> thresholds_;
    std::vector<double> params_{0.0, 0.0};
};

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("irtcl-test-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Every regular file under `root` except `skip`, keyed by relative path, with its bytes.
inline std::vector<std::pair<std::string, std::string>> snapshot(const std::filesystem::path& root, const std::string& skip = "timing.json") {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (e.is_regular_file() && e.path().filename() != skip) {
            out.emplace_back(std::filesystem::relative(e.path(), root).string(), slurp(e.path()));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace irtcl::testing

#endif
