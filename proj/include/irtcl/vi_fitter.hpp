#ifndef IRTCL_VI_FITTER_HPP
#define IRTCL_VI_FITTER_HPP

#include "irt_core.hpp"
#include "rng.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

/**
 * @file vi_fitter.hpp
 * @brief Mean-field variational inference for the 1PL model with hierarchical priors.
 *
 * Generative model:
 *
 *     theta_j | m_theta, u_theta ~ N(m_theta, 1 / u_theta)
 *     b_i     | m_b, u_b         ~ N(m_b, 1 / u_b)
 *     m_theta, m_b               ~ N(0, mean_prior_variance)
 *     u_theta, u_b               ~ Gamma(shape, rate)
 *
 * Every latent gets a Gaussian factor; the precisions are handled on the log scale so a single
 * reparameterized gradient path covers all factors. The ELBO is estimated by Monte Carlo with
 * the Gaussian entropy added analytically, and maximized with Adam.
 */

namespace irtcl {

/// Fixed hyperparameters, used in place of the hierarchical layer when set.
struct FixedHyper {
    double ability_mean = 0.0;
    double ability_precision = 1.0;
    double difficulty_mean = 0.0;
    double difficulty_precision = 1.0;
};

struct PriorConfig {
    double mean_prior_variance = 1e6;
    double precision_shape = 1.0;
    double precision_rate = 1.0;
    std::optional<FixedHyper> fixed;
};

/**
 * Gaussian factors stored as flat (mean, log_std) arrays.
 * Layout: J abilities, I difficulties, then m_theta, m_b, log u_theta, log u_b.
 */
struct VariationalParams {
    std::size_t n_models = 0;
    std::size_t n_items = 0;
    std::vector<double> mean;
    std::vector<double> log_std;

    VariationalParams() = default;
    VariationalParams(std::size_t j, std::size_t i)
        : n_models(j), n_items(i), mean(j + i + 4, 0.0), log_std(j + i + 4, 0.0) {}

    std::size_t size() const { return mean.size(); }
    std::size_t ability(std::size_t j) const { return j; }
    std::size_t difficulty(std::size_t i) const { return n_models + i; }
    std::size_t ability_hyper_mean() const { return n_models + n_items; }
    std::size_t difficulty_hyper_mean() const { return n_models + n_items + 1; }
    std::size_t ability_log_precision() const { return n_models + n_items + 2; }
    std::size_t difficulty_log_precision() const { return n_models + n_items + 3; }

    /// Means ~ N(0, 0.1^2), log-stds 0.
    static VariationalParams initial(std::size_t j, std::size_t i, Rng& rng) {
        VariationalParams vp(j, i);
        for (auto& m : vp.mean) {
            m = rng.normal(0.0, 0.1);
        }
        return vp;
    }

    friend bool operator==(const VariationalParams&, const VariationalParams&) = default;
};

struct FitConfig {
    std::size_t max_iterations = 5000;
    double learning_rate = 0.05;
    std::size_t mc_samples = 4;
    std::uint64_t seed = 0;
    double convergence_tol = 1e-5;
    std::size_t convergence_window = 50;
    PriorConfig prior;

    void validate() const {
        detail::require(max_iterations >= 1, "FitConfig: max_iterations must be >= 1");
        detail::require(mc_samples >= 1, "FitConfig: mc_samples must be >= 1");
        detail::require(learning_rate > 0.0, "FitConfig: learning_rate must be positive");
        detail::require(convergence_tol > 0.0, "FitConfig: convergence_tol must be positive");
        detail::require(convergence_window >= 1, "FitConfig: convergence_window must be >= 1");
        detail::require(prior.mean_prior_variance > 0.0 && prior.precision_shape > 0.0 && prior.precision_rate > 0.0,
                        "FitConfig: prior constants must be positive");
    }
};

struct HyperSummary {
    double mean_mean = 0.0;
    double mean_std = 0.0;
    /// Posterior mean of the precision, E[u] = exp(mu + s^2 / 2).
    double precision_mean = 0.0;
};

struct IrtPosterior {
    std::vector<std::string> model_ids;
    std::vector<std::string> item_ids;
    std::vector<double> ability_mean;
    std::vector<double> ability_std;
    std::vector<double> difficulty_mean;
    std::vector<double> difficulty_std;
    HyperSummary ability_hyper;
    HyperSummary difficulty_hyper;
    double final_elbo = 0.0;
    std::size_t iterations_run = 0;
    bool converged = false;
    std::vector<std::string> warnings;
    std::vector<double> elbo_trace;

    friend bool operator==(const IrtPosterior&, const IrtPosterior&) = default;
};

namespace detail {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

inline double normal_logpdf(double x, double mean, double log_precision) {
    const double d = x - mean;
    return 0.5 * log_precision - kHalfLog2Pi - 0.5 * std::exp(log_precision) * d * d;
}

/// Log density of v = log u when u ~ Gamma(shape, rate), including the Jacobian.
inline double log_gamma_on_log_scale(double v, double shape, double rate) {
    return shape * std::log(rate) - std::lgamma(shape) + shape * v - rate * std::exp(v);
}

inline void check_dims(const ResponseMatrix& z, const VariationalParams& vp) {
    require(vp.n_models == z.n_models() && vp.n_items == z.n_items(), "elbo: variational parameters do not match response matrix");
    require(vp.mean.size() == vp.n_models + vp.n_items + 4 && vp.log_std.size() == vp.mean.size(),
            "elbo: malformed variational parameters");
}

/**
 * One reparameterized sample of the log joint. If `grad_mean`/`grad_log_std` are non-null the
 * pathwise gradient (without the entropy term) is accumulated into them.
 */
inline double sample_log_joint(const ResponseMatrix& z, const VariationalParams& vp, const PriorConfig& prior, Rng& rng,
                               std::vector<double>& x, std::vector<double>& eps, std::vector<double>& gx,
                               std::vector<double>* grad_mean, std::vector<double>* grad_log_std) {
    const std::size_t J = vp.n_models;
    const std::size_t I = vp.n_items;
    const std::size_t n = vp.size();
    for (std::size_t k = 0; k < n; ++k) {
        eps[k] = rng.normal();
        x[k] = vp.mean[k] + std::exp(vp.log_std[k]) * eps[k];
    }
    std::fill(gx.begin(), gx.end(), 0.0);

    double lp = 0.0;

    // likelihood
    for (std::size_t j = 0; j < J; ++j) {
        const auto row = z.row(j);
        const double theta = x[j];
        double gtheta = 0.0;
        for (std::size_t i = 0; i < I; ++i) {
            const std::int8_t c = row[i];
            if (c == ResponseMatrix::kMissing) {
                continue;
            }
            const double d = theta - x[J + i];
            const double e = std::exp(-std::abs(d));
            const double l1p = std::log1p(e);
            double p;
            double logp1;
            if (d >= 0.0) {
                p = 1.0 / (1.0 + e);
                logp1 = -l1p;
            } else {
                p = e / (1.0 + e);
                logp1 = d - l1p;
            }
            double r;
            if (c == 1) {
                lp += logp1;
                r = 1.0 - p;
            } else {
                lp += logp1 - d; // log(1 - p) = log p - d
                r = -p;
            }
            gtheta += r;
            gx[J + i] -= r;
        }
        gx[j] += gtheta;
    }

    // priors
    auto group = [&](std::size_t first, std::size_t count, double mean, double log_prec, std::size_t mean_idx, std::size_t prec_idx) {
        const double prec = std::exp(log_prec);
        double ss = 0.0;
        double dmean = 0.0;
        for (std::size_t k = first; k < first + count; ++k) {
            const double d = x[k] - mean;
            ss += d * d;
            gx[k] -= prec * d;
            dmean += prec * d;
        }
        lp += static_cast<double>(count) * (0.5 * log_prec - kHalfLog2Pi) - 0.5 * prec * ss;
        if (!prior.fixed) {
            gx[mean_idx] += dmean;
            gx[prec_idx] += 0.5 * static_cast<double>(count) - 0.5 * prec * ss;
        }
    };

    if (prior.fixed) {
        group(0, J, prior.fixed->ability_mean, std::log(prior.fixed->ability_precision), 0, 0);
        group(J, I, prior.fixed->difficulty_mean, std::log(prior.fixed->difficulty_precision), 0, 0);
    } else {
        const std::size_t mt = vp.ability_hyper_mean(), mb = vp.difficulty_hyper_mean();
        const std::size_t vt = vp.ability_log_precision(), vb = vp.difficulty_log_precision();
        group(0, J, x[mt], x[vt], mt, vt);
        group(J, I, x[mb], x[vb], mb, vb);
        const double log_var = std::log(prior.mean_prior_variance);
        for (std::size_t k : {mt, mb}) {
            lp += normal_logpdf(x[k], 0.0, -log_var);
            gx[k] -= x[k] / prior.mean_prior_variance;
        }
        for (std::size_t k : {vt, vb}) {
            lp += log_gamma_on_log_scale(x[k], prior.precision_shape, prior.precision_rate);
            gx[k] += prior.precision_shape - prior.precision_rate * std::exp(x[k]);
        }
    }

    if (grad_mean != nullptr) {
        const std::size_t active = prior.fixed ? J + I : n;
        for (std::size_t k = 0; k < active; ++k) {
            (*grad_mean)[k] += gx[k];
            (*grad_log_std)[k] += gx[k] * eps[k] * std::exp(vp.log_std[k]);
        }
    }
    return lp;
}

inline double gaussian_entropy(const VariationalParams& vp, const PriorConfig& prior) {
    const std::size_t active = prior.fixed ? vp.n_models + vp.n_items : vp.size();
    double h = 0.0;
    for (std::size_t k = 0; k < active; ++k) {
        h += vp.log_std[k] + 0.5 + kHalfLog2Pi;
    }
    return h;
}

} // namespace detail

/**
 * Monte-Carlo estimate of the evidence lower bound. Deterministic given the state of `rng`.
 * With `prior.fixed` set, the hyper-factors are ignored and the priors on abilities and
 * difficulties are the fixed Gaussians.
 */
inline double elbo(const ResponseMatrix& z, const VariationalParams& vp, std::size_t mc_samples, Rng& rng, const PriorConfig& prior = {}) {
    detail::check_dims(z, vp);
    detail::require(mc_samples >= 1, "elbo: mc_samples must be >= 1");
    std::vector<double> x(vp.size()), eps(vp.size()), gx(vp.size());
    double acc = 0.0;
    for (std::size_t s = 0; s < mc_samples; ++s) {
        acc += detail::sample_log_joint(z, vp, prior, rng, x, eps, gx, nullptr, nullptr);
    }
    return acc / static_cast<double>(mc_samples) + detail::gaussian_entropy(vp, prior);
}

struct ElboGradient {
    double value = 0.0;
    std::vector<double> d_mean;
    std::vector<double> d_log_std;
};

/// ELBO estimate together with its reparameterization gradient (entropy gradient is analytic).
inline ElboGradient elbo_gradient(const ResponseMatrix& z, const VariationalParams& vp, std::size_t mc_samples, Rng& rng,
                                  const PriorConfig& prior = {}) {
    detail::check_dims(z, vp);
    detail::require(mc_samples >= 1, "elbo_gradient: mc_samples must be >= 1");
    ElboGradient g;
    g.d_mean.assign(vp.size(), 0.0);
    g.d_log_std.assign(vp.size(), 0.0);
    std::vector<double> x(vp.size()), eps(vp.size()), gx(vp.size());
    double acc = 0.0;
    for (std::size_t s = 0; s < mc_samples; ++s) {
        acc += detail::sample_log_joint(z, vp, prior, rng, x, eps, gx, &g.d_mean, &g.d_log_std);
    }
    const double inv = 1.0 / static_cast<double>(mc_samples);
    const std::size_t active = prior.fixed ? vp.n_models + vp.n_items : vp.size();
    for (std::size_t k = 0; k < vp.size(); ++k) {
        g.d_mean[k] *= inv;
        g.d_log_std[k] = k < active ? g.d_log_std[k] * inv + 1.0 : 0.0;
    }
    g.value = acc * inv + detail::gaussian_entropy(vp, prior);
    return g;
}

namespace detail {

class Adam {
public:
    Adam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

    /// Ascent step on `params` along `grad`.
    void step(std::vector<double>& params, const std::vector<double>& grad) {
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        for (std::size_t k = 0; k < params.size(); ++k) {
            m_[k] = b1_ * m_[k] + (1.0 - b1_) * grad[k];
            v_[k] = b2_ * v_[k] + (1.0 - b2_) * grad[k] * grad[k];
            params[k] += lr_ * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps_);
        }
    }

private:
    double lr_;
    double b1_ = 0.9;
    double b2_ = 0.999;
    double eps_ = 1e-8;
    std::size_t t_ = 0;
    std::vector<double> m_, v_;
};

} // namespace detail

/**
 * Items whose observed responses are all identical. Their difficulty is identified only
 * through the prior.
 */
inline std::vector<std::size_t> degenerate_items(const ResponseMatrix& z) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < z.n_items(); ++i) {
        bool any0 = false, any1 = false;
        for (std::size_t j = 0; j < z.n_models(); ++j) {
            any0 |= z.at(j, i) == 0;
            any1 |= z.at(j, i) == 1;
        }
        if (!(any0 && any1)) {
            out.push_back(i);
        }
    }
    return out;
}

inline IrtPosterior summarize_posterior(const ResponseMatrix& z, const VariationalParams& vp) {
    IrtPosterior p;
    p.model_ids = z.model_ids();
    p.item_ids = z.item_ids();
    for (std::size_t j = 0; j < vp.n_models; ++j) {
        p.ability_mean.push_back(vp.mean[vp.ability(j)]);
        p.ability_std.push_back(std::exp(vp.log_std[vp.ability(j)]));
    }
    for (std::size_t i = 0; i < vp.n_items; ++i) {
        p.difficulty_mean.push_back(vp.mean[vp.difficulty(i)]);
        p.difficulty_std.push_back(std::exp(vp.log_std[vp.difficulty(i)]));
    }
    auto hyper = [&](std::size_t mean_idx, std::size_t prec_idx) {
        const double s = std::exp(vp.log_std[prec_idx]);
        return HyperSummary{vp.mean[mean_idx], std::exp(vp.log_std[mean_idx]), std::exp(vp.mean[prec_idx] + 0.5 * s * s)};
    };
    p.ability_hyper = hyper(vp.ability_hyper_mean(), vp.ability_log_precision());
    p.difficulty_hyper = hyper(vp.difficulty_hyper_mean(), vp.difficulty_log_precision());
    return p;
}

/**
 * Fit the 1PL model by stochastic gradient ascent on the ELBO.
 *
 * Stops when the mean ELBO of consecutive `convergence_window`-iteration windows changes by
 * less than `convergence_tol` (relative), or after `max_iterations`. Bit-for-bit reproducible
 * given the seed.
 */
inline IrtPosterior fit_1pl(const ResponseMatrix& z, const FitConfig& cfg = {}) {
    cfg.validate();
    detail::require(!z.empty() && z.n_observed() > 0, "fit_1pl: empty response matrix");
    detail::require(z.n_models() >= 2 && z.n_items() >= 2, "fit_1pl: need at least two models and two items");

    std::vector<std::string> warnings;
    for (std::size_t i : degenerate_items(z)) {
        warnings.push_back("item " + z.item_ids()[i] + " has identical responses from every model; difficulty is weakly identified");
    }

    Rng rng(cfg.seed);
    auto vp = VariationalParams::initial(z.n_models(), z.n_items(), rng);
    if (cfg.prior.fixed) {
        const std::size_t base = z.n_models() + z.n_items();
        for (std::size_t k = base; k < vp.size(); ++k) {
            vp.mean[k] = 0.0;
        }
    }
    detail::Adam adam_mean(vp.size(), cfg.learning_rate);
    detail::Adam adam_log_std(vp.size(), cfg.learning_rate);

    // reported parameters are an exponential moving average of the iterates, which damps the
    // step-to-step jitter left by the stochastic gradients
    auto avg = vp;
    const double decay = 1.0 - 1.0 / static_cast<double>(cfg.convergence_window);
    double avg_weight = 0.0;

    std::vector<double> trace;
    trace.reserve(cfg.max_iterations);
    double prev_window = 0.0;
    bool have_prev = false;
    bool converged = false;
    double window_acc = 0.0;
    std::size_t it = 0;
    while (it < cfg.max_iterations) {
        const auto g = elbo_gradient(z, vp, cfg.mc_samples, rng, cfg.prior);
        trace.push_back(g.value);
        window_acc += g.value;
        adam_mean.step(vp.mean, g.d_mean);
        adam_log_std.step(vp.log_std, g.d_log_std);
        avg_weight = decay * avg_weight + (1.0 - decay);
        const double w = (1.0 - decay) / avg_weight;
        for (std::size_t k = 0; k < vp.size(); ++k) {
            avg.mean[k] += w * (vp.mean[k] - avg.mean[k]);
            avg.log_std[k] += w * (vp.log_std[k] - avg.log_std[k]);
        }
        ++it;
        if (it % cfg.convergence_window == 0) {
            const double cur = window_acc / static_cast<double>(cfg.convergence_window);
            window_acc = 0.0;
            if (have_prev && std::abs(cur - prev_window) <= cfg.convergence_tol * std::abs(prev_window)) {
                converged = true;
                break;
            }
            prev_window = cur;
            have_prev = true;
        }
    }

    auto post = summarize_posterior(z, avg);
    post.iterations_run = it;
    post.converged = converged;
    post.warnings = std::move(warnings);
    const std::size_t tail = std::min<std::size_t>(cfg.convergence_window, trace.size());
    double s = 0.0;
    for (std::size_t k = trace.size() - tail; k < trace.size(); ++k) {
        s += trace[k];
    }
    post.final_elbo = s / static_cast<double>(tail);
    post.elbo_trace = std::move(trace);
    return post;
}

/// Posterior means in input order: (abilities, difficulties).
inline std::pair<std::vector<double>, std::vector<double>> posterior_point_estimates(const IrtPosterior& p) {
    return {p.ability_mean, p.difficulty_mean};
}

} // namespace irtcl

#endif
