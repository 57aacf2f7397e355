#include "support.hpp"

#include <irtcl/learner.hpp>
#include <irtcl/synthetic.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace irtcl;
using namespace irtcl::testing;

namespace {

double train_accuracy(const Learner& l, const Dataset& d) { return accuracy(l.predict(d), d.labels); }

} // namespace

TEST(LogisticLearner, SeparableBlobsConverge) {
    const auto train = make_blobs(400, 1);
    const auto test = make_blobs(400, 2);
    LogisticLearner l(2, 2, 7);
    const auto idx = all_indices(train);
    for (int e = 0; e < 50; ++e) {
        const double loss = l.train_epoch(train, idx, 0.1);
        EXPECT_TRUE(std::isfinite(loss));
    }
    EXPECT_GE(train_accuracy(l, train), 0.99);
    EXPECT_GE(train_accuracy(l, test), 0.95);
}

TEST(MlpLearner, SeparableBlobsConverge) {
    const auto train = make_blobs(400, 3);
    MlpLearner l(2, 2, 16, 7);
    const auto idx = all_indices(train);
    for (int e = 0; e < 50; ++e) {
        l.train_epoch(train, idx, 0.1);
    }
    EXPECT_GE(train_accuracy(l, train), 0.99);
}

TEST(Learner, ZeroLearningRateLeavesParametersAlone) {
    const auto d = make_blobs(50, 4);
    for (const char* kind : {"logistic", "mlp"}) {
        auto l = make_learner({kind, 8}, 2, 2, 1);
        const auto before = l->parameters();
        const auto pred = l->predict(d);
        l->train_epoch(d, all_indices(d), 0.0);
        EXPECT_EQ(l->parameters(), before);
        EXPECT_EQ(l->predict(d), pred);
    }
}

TEST(Learner, DeterministicGivenSeed) {
    const auto d = make_blobs(60, 5);
    for (const char* kind : {"logistic", "mlp"}) {
        auto a = make_learner({kind, 8}, 2, 2, 42);
        auto b = make_learner({kind, 8}, 2, 2, 42);
        const std::vector<std::size_t> sub{0, 3, 5, 7, 11, 20, 33};
        a->train_epoch(d, sub, 0.1);
        b->train_epoch(d, sub, 0.1);
        EXPECT_EQ(a->parameters(), b->parameters()) << kind;
        a->reset(42);
        b->reset(42);
        EXPECT_EQ(a->parameters(), b->parameters());
    }
}

TEST(Learner, ResetRestoresInitialState) {
    const auto d = make_blobs(40, 6);
    MlpLearner l(2, 2, 8, 3);
    const auto init = l.parameters();
    l.train_epoch(d, all_indices(d), 0.1);
    EXPECT_NE(l.parameters(), init);
    l.reset(3);
    EXPECT_EQ(l.parameters(), init);
    MlpLearner other(2, 2, 8, 4);
    EXPECT_NE(other.parameters(), init);
}

TEST(LogisticLearner, UntrainedPredictsLowestClass) {
    const auto d = make_blobs(30, 7);
    LogisticLearner l(2, 2);
    for (int p : l.predict(d)) {
        EXPECT_EQ(p, 0);
    }
    LogisticLearner three(2, 3);
    for (int p : three.predict(d)) {
        EXPECT_EQ(p, 0);
    }
}

TEST(Learner, PredictIsPure) {
    const auto d = make_blobs(30, 8);
    MlpLearner l(2, 2, 8, 1);
    l.train_epoch(d, all_indices(d), 0.1);
    const auto sum = parameter_checksum(l);
    const auto p1 = l.predict(d);
    const auto p2 = l.predict(d);
    EXPECT_EQ(p1, p2);
    EXPECT_EQ(parameter_checksum(l), sum);
}

TEST(Learner, InvalidUse) {
    const auto d = make_blobs(10, 9);
    LogisticLearner l(3, 2);
    EXPECT_THROW(l.predict(d), InvalidArgument);
    LogisticLearner ok(2, 2);
    EXPECT_THROW(ok.train_epoch(d, std::vector<std::size_t>{}, 0.1), InvalidArgument);
    EXPECT_THROW(ok.train_epoch(d, std::vector<std::size_t>{0}, -0.1), InvalidArgument);
    EXPECT_THROW(make_learner({"svm", 1}, 2, 2, 0), InvalidArgument);
    EXPECT_THROW(LogisticLearner(2, 1), InvalidArgument);
}

TEST(Learner, GradientsMatchFiniteDifferences) {
    std::mt19937_64 gen(10);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_int_distribution<int> dims(1, 6);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t d = static_cast<std::size_t>(dims(gen));
        const std::size_t k = 2 + static_cast<std::size_t>(rep % 3);
        std::vector<double> x(d);
        for (auto& v : x) {
            v = nd(gen);
        }
        const int y = static_cast<int>(gen() % k);

        LogisticLearner lg(d, k, static_cast<std::uint64_t>(rep));
        auto p = lg.parameters();
        for (auto& v : p) {
            v = 0.5 * nd(gen);
        }
        lg.set_parameters(p);
        EXPECT_LE(gradient_check(lg, x, y), 1e-5) << "logistic " << rep;

        MlpLearner mlp(d, k, 1 + static_cast<std::size_t>(rep % 16), static_cast<std::uint64_t>(rep));
        EXPECT_LE(gradient_check(mlp, x, y), 1e-5) << "mlp " << rep;
    }
}

TEST(Learner, CloneIsIndependent) {
    const auto d = make_blobs(20, 11);
    MlpLearner l(2, 2, 4, 1);
    auto c = l.clone();
    c->train_epoch(d, all_indices(d), 0.1);
    EXPECT_NE(c->parameters(), l.parameters());
}

TEST(SyntheticTask, DeterministicWithPlantedMargins) {
    SynthTaskConfig cfg;
    cfg.seed = 3;
    cfg.n_train = 100;
    const auto a = make_synthetic_task(cfg);
    const auto b = make_synthetic_task(cfg);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    EXPECT_EQ(a.train.size(), 100u);
    EXPECT_EQ(a.dev.size(), 200u);
    EXPECT_EQ(a.test.size(), 500u);
    EXPECT_EQ(a.train.planted_margin.size(), 100u);
    EXPECT_EQ(a.train.text.size(), 100u);
    cfg.seed = 4;
    EXPECT_NE(make_synthetic_task(cfg).train, a.train);
}

TEST(SyntheticTask, NoiseFreeTightBlobsAreBayesSeparable) {
    SynthTaskConfig cfg;
    cfg.margin_decay = 0.1;
    cfg.seed = 5;
    const auto task = make_synthetic_task(cfg);
    // positive planted margin means the example sits on its own label's side of the boundary
    std::size_t right = 0;
    for (double m : task.test.planted_margin) {
        right += m > 0.0;
    }
    EXPECT_GE(static_cast<double>(right) / static_cast<double>(task.test.size()), 0.99);
}

TEST(SyntheticTask, NoiseRateFlipsLabels) {
    SynthTaskConfig cfg;
    cfg.noise_rate = 0.2;
    cfg.margin_decay = 0.05;
    cfg.n_train = 5000;
    cfg.seed = 6;
    const auto task = make_synthetic_task(cfg);
    std::size_t wrong = 0;
    for (double m : task.train.planted_margin) {
        wrong += m < 0.0;
    }
    EXPECT_NEAR(static_cast<double>(wrong) / 5000.0, 0.2, 0.02);
}

TEST(SyntheticTask, MultiClassMarginsAgreeWithNearestMean) {
    SynthTaskConfig cfg;
    cfg.n_classes = 4;
    cfg.n_features = 3;
    cfg.seed = 7;
    const auto task = make_synthetic_task(cfg);
    const auto means = synthetic_class_means(3, 4);
    for (std::size_t k = 0; k < task.train.size(); ++k) {
        const auto x = task.train.row(k);
        std::size_t best = 0;
        double best_d = INFINITY;
        for (std::size_t c = 0; c < 4; ++c) {
            double d = 0.0;
            for (std::size_t f = 0; f < 3; ++f) {
                d += (x[f] - means[c][f]) * (x[f] - means[c][f]);
            }
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        EXPECT_EQ(task.train.planted_margin[k] > 0.0, static_cast<int>(best) == task.train.labels[k]);
    }
}

TEST(SyntheticTask, RejectsBadConfig) {
    SynthTaskConfig cfg;
    cfg.noise_rate = 0.4;
    EXPECT_THROW(make_synthetic_task(cfg), InvalidArgument);
    cfg.noise_rate = 0.0;
    cfg.n_test = 0;
    EXPECT_THROW(make_synthetic_task(cfg), InvalidArgument);
}
