#include "support.hpp"

#include <irtcl/analysis.hpp>
#include <irtcl/formats.hpp>
#include <irtcl/vi_fitter.hpp>

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace irtcl;
using namespace irtcl::testing;

namespace {

PriorConfig standard_normal_priors() {
    PriorConfig p;
    p.fixed = FixedHyper{};
    return p;
}

double log_std_normal(double x) { return -0.5 * x * x - 0.5 * std::log(2.0 * M_PI); }

/// log of the integral over (theta, b) of sigma(theta - b)^z (1 - sigma)^(1 - z) N(theta) N(b), trapezoid rule.
double quadrature_log_marginal(int z) {
    const double lim = 10.0, h = 0.01;
    const auto n = static_cast<int>(std::lround(2.0 * lim / h));
    double s = 0.0;
    for (int a = 0; a <= n; ++a) {
        const double t = -lim + a * h;
        const double wa = (a == 0 || a == n) ? 0.5 : 1.0;
        for (int c = 0; c <= n; ++c) {
            const double b = -lim + c * h;
            const double wc = (c == 0 || c == n) ? 0.5 : 1.0;
            const double p = oracle_sigmoid(t - b);
            s += wa * wc * (z == 1 ? p : 1.0 - p) * std::exp(log_std_normal(t) + log_std_normal(b));
        }
    }
    return std::log(s * h * h);
}

/// Mean and variance of the single-sample ELBO integrand, from independent draws.
struct McMoments {
    double mean = 0.0;
    double var = 0.0;
};

McMoments oracle_expected_log_joint(double mt, double st, double mb, double sb, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    double s = 0.0, ss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = mt + st * nd(gen), b = mb + sb * nd(gen);
        const double v = std::log(oracle_sigmoid(t - b)) + log_std_normal(t) + log_std_normal(b);
        s += v;
        ss += v * v;
    }
    const double mean = s / static_cast<double>(n);
    return {mean, ss / static_cast<double>(n) - mean * mean};
}

ResponseMatrix recovery_matrix(std::vector<double>& thetas, std::vector<double>& bs) {
    thetas = standard_normals(100, 1001);
    bs = standard_normals(200, 2002);
    return ResponseMatrix::from_rows(sample_responses(thetas, bs, 3003));
}

} // namespace

TEST(Elbo, DeterministicUnderFixedSeed) {
    const auto z = ResponseMatrix::from_rows({{1, 0}, {0, 1}});
    Rng init(3);
    const auto vp = VariationalParams::initial(2, 2, init);
    Rng a(17), b(17);
    EXPECT_EQ(elbo(z, vp, 1, a), elbo(z, vp, 1, b));
}

TEST(Elbo, DimensionMismatchThrows) {
    const auto z = ResponseMatrix::from_rows({{1, 0}, {0, 1}});
    VariationalParams vp(3, 2);
    Rng rng(1);
    EXPECT_THROW(elbo(z, vp, 1, rng), InvalidArgument);
    EXPECT_THROW(elbo_gradient(z, vp, 1, rng), InvalidArgument);
}

TEST(Elbo, BoundedByQuadratureLogMarginal) {
    const double log_z = quadrature_log_marginal(1);
    EXPECT_NEAR(log_z, std::log(0.5), 1e-6);
    const auto z = ResponseMatrix::from_rows({{1}});
    const auto prior = standard_normal_priors();

    std::vector<VariationalParams> candidates;
    for (double mt : {-0.5, 0.0, 0.4}) {
        for (double s : {0.3, 0.9, 1.5}) {
            VariationalParams vp(1, 1);
            vp.mean[0] = mt;
            vp.mean[1] = -mt / 2;
            vp.log_std[0] = std::log(s);
            vp.log_std[1] = std::log(s * 0.8);
            candidates.push_back(vp);
        }
    }
    // the optimum of the bound should sit just under the marginal
    VariationalParams best(1, 1);
    {
        Rng rng(9);
        auto vp = VariationalParams::initial(1, 1, rng);
        detail::Adam am(vp.size(), 0.02), as(vp.size(), 0.02);
        for (int it = 0; it < 4000; ++it) {
            const auto g = elbo_gradient(z, vp, 16, rng, prior);
            am.step(vp.mean, g.d_mean);
            as.step(vp.log_std, g.d_log_std);
        }
        best = vp;
    }
    candidates.push_back(best);

    const std::size_t n = 200000;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const auto& vp = candidates[c];
        Rng rng(100 + c);
        const double value = elbo(z, vp, n, rng, prior);
        const auto mom = oracle_expected_log_joint(vp.mean[0], std::exp(vp.log_std[0]), vp.mean[1], std::exp(vp.log_std[1]), 20000, 7 + c);
        const double se = std::sqrt(mom.var / static_cast<double>(n));
        EXPECT_LE(value, log_z + 3.0 * se) << "candidate " << c;
    }
    Rng rng(55);
    EXPECT_GT(elbo(z, best, n, rng, prior), log_z - 0.05);
}

TEST(Elbo, WideningMatchesLargeSampleOracle) {
    const auto z = ResponseMatrix::from_rows({{1}});
    const auto prior = standard_normal_priors();
    VariationalParams narrow(1, 1);
    narrow.mean[0] = 0.3;
    narrow.mean[1] = -0.2;
    narrow.log_std[0] = std::log(0.8);
    narrow.log_std[1] = std::log(0.5);
    auto wide = narrow;
    wide.log_std[1] = std::log(1.5);

    const std::size_t n = 1000000;
    Rng r1(21), r2(22);
    const double got = elbo(z, wide, n, r2, prior) - elbo(z, narrow, n, r1, prior);

    const auto o_narrow = oracle_expected_log_joint(0.3, 0.8, -0.2, 0.5, n, 31);
    const auto o_wide = oracle_expected_log_joint(0.3, 0.8, -0.2, 1.5, n, 32);
    const double entropy_gain = std::log(1.5) - std::log(0.5);
    const double expected = entropy_gain + (o_wide.mean - o_narrow.mean);
    const double se = std::sqrt(2.0 * (o_narrow.var + o_wide.var) / static_cast<double>(n));
    EXPECT_NEAR(got, expected, 3.0 * se);
}

TEST(ElboGradient, MatchesFiniteDifferencesWithCommonRandomNumbers) {
    const auto z = ResponseMatrix::from_rows({{1, 0, 1, 1}, {0, 0, 1, 0}, {1, 1, 1, 0}});
    for (bool fixed : {false, true}) {
        PriorConfig prior;
        if (fixed) {
            prior.fixed = FixedHyper{0.2, 1.5, -0.1, 0.7};
        }
        Rng init(8);
        auto vp = VariationalParams::initial(3, 4, init);
        for (auto& s : vp.log_std) {
            s = init.uniform(-1.0, 0.3);
        }
        Rng g_rng(77);
        const auto g = elbo_gradient(z, vp, 3, g_rng, prior);
        Rng v_rng(77);
        EXPECT_DOUBLE_EQ(g.value, elbo(z, vp, 3, v_rng, prior));

        const double h = 1e-5;
        const std::size_t active = fixed ? 7 : vp.size();
        for (std::size_t k = 0; k < vp.size(); ++k) {
            for (int which = 0; which < 2; ++which) {
                auto up = vp, down = vp;
                auto& pu = which == 0 ? up.mean : up.log_std;
                auto& pd = which == 0 ? down.mean : down.log_std;
                pu[k] += h;
                pd[k] -= h;
                Rng ru(77), rd(77);
                const double fd = (elbo(z, up, 3, ru, prior) - elbo(z, down, 3, rd, prior)) / (2 * h);
                const double an = which == 0 ? g.d_mean[k] : g.d_log_std[k];
                if (k >= active) {
                    EXPECT_EQ(an, 0.0);
                    continue;
                }
                EXPECT_NEAR(an, fd, 1e-5 * std::max(1.0, std::abs(fd))) << (fixed ? "fixed " : "hier ") << which << " " << k;
            }
        }
    }
}

TEST(Fit, RecoversPlantedParametersAndElboTraceRises) {
    std::vector<double> t, b;
    const auto z = recovery_matrix(t, b);
    FitConfig cfg;
    cfg.seed = 1;
    const auto post = fit_1pl(z, cfg);
    EXPECT_GE(spearman(post.difficulty_mean, b), 0.9);
    EXPECT_GE(spearman(post.ability_mean, t), 0.9);
    ASSERT_EQ(post.difficulty_mean.size(), 200u);
    ASSERT_EQ(post.ability_mean.size(), 100u);
    for (double s : post.difficulty_std) EXPECT_GT(s, 0.0);
    for (double s : post.ability_std) EXPECT_GT(s, 0.0);

    const auto& tr = post.elbo_trace;
    ASSERT_GE(tr.size(), 200u);
    std::vector<double> ma;
    double acc = 0.0;
    for (std::size_t k = 0; k < tr.size(); ++k) {
        acc += tr[k];
        if (k >= 100) {
            acc -= tr[k - 100];
        }
        if (k >= 99) {
            ma.push_back(acc / 100.0);
        }
    }
    const double range = *std::max_element(ma.begin(), ma.end()) - *std::min_element(ma.begin(), ma.end());
    double running_max = ma.front();
    for (double v : ma) {
        running_max = std::max(running_max, v);
        EXPECT_LE(running_max - v, 0.02 * range);
    }
}

TEST(Fit, DeterministicGivenSeed) {
    const auto t = standard_normals(20, 1), b = standard_normals(30, 2);
    const auto z = ResponseMatrix::from_rows(sample_responses(t, b, 3));
    FitConfig cfg;
    cfg.seed = 12;
    cfg.max_iterations = 400;
    const auto p1 = fit_1pl(z, cfg);
    const auto p2 = fit_1pl(z, cfg);
    EXPECT_EQ(p1.difficulty_mean, p2.difficulty_mean);
    EXPECT_EQ(p1.ability_mean, p2.ability_mean);
    EXPECT_EQ(p1.elbo_trace, p2.elbo_trace);
    EXPECT_EQ(p1.iterations_run, p2.iterations_run);
}

TEST(Fit, IdenticalItemsGetMatchingDifficulty) {
    auto rows = sample_responses(standard_normals(80, 4), standard_normals(30, 5), 6);
    for (auto& r : rows) {
        r[1] = r[0];
    }
    FitConfig cfg;
    cfg.seed = 3;
    const auto post = fit_1pl(ResponseMatrix::from_rows(rows), cfg);
    EXPECT_LE(std::abs(post.difficulty_mean[0] - post.difficulty_mean[1]), 0.05);
}

TEST(Fit, AllCorrectModelRanksFirst) {
    auto rows = sample_responses(standard_normals(30, 7), standard_normals(40, 8), 9);
    rows[5].assign(40, 1);
    FitConfig cfg;
    cfg.seed = 2;
    const auto post = fit_1pl(ResponseMatrix::from_rows(rows), cfg);
    const auto best = std::max_element(post.ability_mean.begin(), post.ability_mean.end()) - post.ability_mean.begin();
    EXPECT_EQ(best, 5);
}

TEST(Fit, FlippingAColumnRaisesItsDifficulty) {
    const auto t = standard_normals(50, 10);
    auto b = standard_normals(40, 11);
    b[3] = -2.0;
    auto rows = sample_responses(t, b, 12);
    FitConfig cfg;
    cfg.seed = 5;
    const auto before = fit_1pl(ResponseMatrix::from_rows(rows), cfg);
    int correct = 0;
    for (auto& r : rows) {
        correct += r[3];
        r[3] = 1 - r[3];
    }
    ASSERT_GT(correct, 25);
    const auto after = fit_1pl(ResponseMatrix::from_rows(rows), cfg);
    EXPECT_GT(after.difficulty_mean[3], before.difficulty_mean[3]);
}

TEST(Fit, DegenerateItemsWarnButStay) {
    auto rows = sample_responses(standard_normals(10, 1), standard_normals(6, 2), 3);
    for (auto& r : rows) {
        r[2] = 1;
    }
    FitConfig cfg;
    cfg.max_iterations = 200;
    const auto post = fit_1pl(ResponseMatrix::from_rows(rows), cfg);
    EXPECT_EQ(post.difficulty_mean.size(), 6u);
    ASSERT_FALSE(post.warnings.empty());
    EXPECT_NE(post.warnings.front().find("i2"), std::string::npos);
}

TEST(Fit, RejectsEmptyAndTooSmallMatrices) {
    ResponseMatrix empty({"a", "b"}, {"x", "y"});
    EXPECT_THROW(fit_1pl(empty), InvalidArgument);
    EXPECT_THROW(fit_1pl(ResponseMatrix::from_rows({{1, 0}})), InvalidArgument);
    EXPECT_THROW(fit_1pl(ResponseMatrix::from_rows({{1}, {0}})), InvalidArgument);
    FitConfig bad;
    bad.mc_samples = 0;
    EXPECT_THROW(fit_1pl(ResponseMatrix::from_rows({{1, 0}, {0, 1}}), bad), InvalidArgument);
}

TEST(PointEstimates, ProjectionAndOrder) {
    IrtPosterior p;
    p.item_ids = {"only"};
    p.difficulty_mean = {0.3};
    p.difficulty_std = {0.1};
    const auto [thetas, bs] = posterior_point_estimates(p);
    EXPECT_TRUE(thetas.empty());
    EXPECT_EQ(bs, std::vector<double>{0.3});

    const auto z = ResponseMatrix::from_rows({{1, 0, 1}, {0, 0, 1}, {1, 1, 1}});
    FitConfig cfg;
    cfg.max_iterations = 100;
    const auto post = fit_1pl(z, cfg);
    EXPECT_EQ(post.item_ids, z.item_ids());
    EXPECT_EQ(post.model_ids, z.model_ids());
    const auto [t2, b2] = posterior_point_estimates(post);
    EXPECT_EQ(b2, post.difficulty_mean);
    EXPECT_EQ(t2, post.ability_mean);

    std::stringstream ss;
    write_difficulty_csv(ss, post.item_ids, b2);
    const auto back = read_difficulty_csv(ss);
    ASSERT_EQ(back.ids, post.item_ids);
    for (std::size_t i = 0; i < b2.size(); ++i) {
        EXPECT_NEAR(back.values[i], b2[i], 1e-9);
    }
}
