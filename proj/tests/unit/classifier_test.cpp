#include "oracles.hpp"

#include <trafficbench/attack/classifier.hpp>
#include <trafficbench/error.hpp>
#include <trafficbench/random.hpp>

#include <gtest/gtest.h>

#include <numeric>

using namespace trafficbench;

namespace {

struct Blobs {
    Eigen::MatrixXd x;
    std::vector<int> y;
};

/// Three well separated gaussian blobs with class ids 4, 7 and 9.
Blobs blobs(std::uint64_t seed, int per_class)
{
    Rng rng(seed);
    const int ids[] = {4, 7, 9};
    const double cx[] = {0.0, 6.0, 0.0};
    const double cy[] = {0.0, 0.0, 6.0};
    Blobs b;
    b.x.resize(3 * per_class, 3);
    for (int k = 0; k < 3; ++k) {
        for (int i = 0; i < per_class; ++i) {
            const int r = k * per_class + i;
            b.x(r, 0) = cx[k] + rng.normal();
            b.x(r, 1) = cy[k] + rng.normal();
            b.x(r, 2) = rng.normal(); // noise feature
            b.y.push_back(ids[k]);
        }
    }
    return b;
}

double accuracy(const ClassifierModel& m, const Blobs& b)
{
    const auto top = predict_topk(m, b.x, 1);
    int hits = 0;
    for (std::size_t i = 0; i < b.y.size(); ++i) {
        hits += top[i][0] == b.y[i];
    }
    return static_cast<double>(hits) / static_cast<double>(b.y.size());
}

const ClassifierKind kAllKinds[] = {ClassifierKind::LogisticRegression, ClassifierKind::DecisionTree,
                                    ClassifierKind::RandomForest, ClassifierKind::KNearest,
                                    ClassifierKind::NaiveBayes};

} // namespace

TEST(Gini, BestSplitMatchesExhaustiveEnumeration)
{
    Rng rng(21);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(30));
        const int d = 1 + static_cast<int>(rng.below(4));
        const int K = 2 + static_cast<int>(rng.below(3));
        Eigen::MatrixXd x(n, d);
        std::vector<std::vector<double>> rows(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(d)));
        std::vector<int> labels;
        for (int i = 0; i < n; ++i) {
            for (int f = 0; f < d; ++f) {
                // Small integer grid so ties between thresholds are common.
                x(i, f) = static_cast<double>(rng.below(6));
                rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)] = x(i, f);
            }
            labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(K))));
        }
        std::vector<std::size_t> all(static_cast<std::size_t>(n));
        std::iota(all.begin(), all.end(), 0);
        std::vector<int> features(static_cast<std::size_t>(d));
        std::iota(features.begin(), features.end(), 0);
        const auto got = best_gini_split(x, labels, K, all, features);
        const auto want = oracle::best_split(rows, labels, K);
        ASSERT_EQ(got.feature, want.feature) << "trial " << trial;
        if (want.feature >= 0) {
            ASSERT_NEAR(got.threshold, want.threshold, 1e-12);
            ASSERT_NEAR(got.impurity, want.impurity, 1e-12);
        }
    }
}

TEST(Classifier, EveryKindLearnsSeparableBlobs)
{
    const auto train = blobs(1, 40);
    const auto test = blobs(2, 40);
    for (auto kind : kAllKinds) {
        ClassifierHyper h;
        h.n_trees = 25;
        const auto m = train_classifier(kind, train.x, train.y, h, 3);
        EXPECT_EQ(m.classes(), (std::vector<int>{4, 7, 9}));
        EXPECT_GE(accuracy(m, test), 0.9) << to_string(kind);
        const auto p = m.predict_proba(test.x);
        for (Eigen::Index r = 0; r < p.rows(); ++r) {
            ASSERT_NEAR(p.row(r).sum(), 1.0, 1e-9) << to_string(kind);
            ASSERT_GE(p.row(r).minCoeff(), 0.0);
        }
    }
}

TEST(Classifier, SameSeedSameModel)
{
    const auto train = blobs(4, 30);
    ClassifierHyper h;
    h.n_trees = 10;
    const auto a = train_classifier(ClassifierKind::RandomForest, train.x, train.y, h, 99);
    const auto b = train_classifier(ClassifierKind::RandomForest, train.x, train.y, h, 99);
    EXPECT_EQ(a.predict_proba(train.x), b.predict_proba(train.x));
    ASSERT_EQ(a.trees().size(), 10u);
    for (std::size_t t = 0; t < a.trees().size(); ++t) {
        ASSERT_EQ(a.trees()[t].nodes.size(), b.trees()[t].nodes.size());
    }
}

TEST(Classifier, TreeFitsTrainingDataExactly)
{
    const auto train = blobs(5, 30);
    ClassifierHyper h;
    h.max_depth = 64;
    const auto m = train_classifier(ClassifierKind::DecisionTree, train.x, train.y, h, 0);
    EXPECT_DOUBLE_EQ(accuracy(m, train), 1.0);
    ASSERT_EQ(m.trees().size(), 1u);
    // Children follow their parent in preorder.
    for (std::size_t i = 0; i < m.trees()[0].nodes.size(); ++i) {
        const auto& node = m.trees()[0].nodes[i];
        if (node.feature >= 0) {
            EXPECT_EQ(node.left, static_cast<int>(i) + 1);
            EXPECT_GT(node.right, node.left);
        }
    }
}

TEST(Classifier, OneNearestNeighbourRecallsTrainingRows)
{
    const auto train = blobs(6, 20);
    ClassifierHyper h;
    h.k_neighbors = 1;
    const auto m = train_classifier(ClassifierKind::KNearest, train.x, train.y, h, 0);
    EXPECT_DOUBLE_EQ(accuracy(m, train), 1.0);
}

TEST(Classifier, RankingBreaksTiesTowardLowerIndex)
{
    Eigen::MatrixXd p(2, 4);
    p << 0.25, 0.25, 0.25, 0.25, 0.1, 0.4, 0.1, 0.4;
    const auto r = rank_classes(p, 4);
    EXPECT_EQ(r[0], (std::vector<int>{0, 1, 2, 3}));
    EXPECT_EQ(r[1], (std::vector<int>{1, 3, 0, 2}));
    EXPECT_EQ(rank_classes(p, 2)[1].size(), 2u);
}

TEST(Classifier, RejectsBadInput)
{
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 2);
    EXPECT_THROW(train_classifier(ClassifierKind::RandomForest, x, {1, 1, 1, 1}, {}, 0), ContractError);
    EXPECT_THROW(train_classifier(ClassifierKind::RandomForest, x, {1, 2, 1}, {}, 0), ContractError);
    x(0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(train_classifier(ClassifierKind::RandomForest, x, {1, 2, 1, 2}, {}, 0), ContractError);
}

TEST(Classifier, KindNames)
{
    for (auto kind : kAllKinds) {
        EXPECT_EQ(parse_classifier_kind(to_string(kind)), kind);
    }
    EXPECT_THROW(parse_classifier_kind("svm"), ContractError);
}
