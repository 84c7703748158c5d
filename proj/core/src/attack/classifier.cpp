#include "trafficbench/attack/classifier.hpp"

#include "trafficbench/error.hpp"
#include "trafficbench/random.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

namespace trafficbench {

std::string to_string(ClassifierKind k)
{
    switch (k) {
    case ClassifierKind::LogisticRegression:
        return "logreg";
    case ClassifierKind::DecisionTree:
        return "tree";
    case ClassifierKind::RandomForest:
        return "forest";
    case ClassifierKind::KNearest:
        return "knn";
    case ClassifierKind::NaiveBayes:
        return "bayes";
    }
    return "unknown";
}

ClassifierKind parse_classifier_kind(const std::string& text)
{
    std::string s;
    for (char c : text) {
        if (c != '_' && c != '-') {
            s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (s == "logreg" || s == "logisticregression") {
        return ClassifierKind::LogisticRegression;
    }
    if (s == "tree" || s == "decisiontree") {
        return ClassifierKind::DecisionTree;
    }
    if (s == "forest" || s == "randomforest" || s == "rf") {
        return ClassifierKind::RandomForest;
    }
    if (s == "knn" || s == "knearest" || s == "nearestneighbors") {
        return ClassifierKind::KNearest;
    }
    if (s == "bayes" || s == "naivebayes" || s == "nb") {
        return ClassifierKind::NaiveBayes;
    }
    throw ContractError("unknown classifier kind '" + text + "'");
}

namespace {

constexpr double kSplitTolerance = 1e-12;

double gini_of(const std::vector<double>& counts, double n)
{
    double s = 0.0;
    for (double c : counts) {
        s += c * c;
    }
    return 1.0 - s / (n * n);
}

void softmax_rows(Eigen::MatrixXd& m)
{
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double mx = m.row(r).maxCoeff();
        m.row(r) = (m.row(r).array() - mx).exp();
        m.row(r) /= m.row(r).sum();
    }
}

struct TreeBuilder {
    const Eigen::MatrixXd& x;
    const std::vector<int>& y;
    int class_count;
    int max_depth;
    int min_samples_split;
    int max_features; ///< features considered per split; d means all
    Rng* rng;         ///< null for a plain decision tree
    DecisionTreeModel tree;

    std::vector<int> candidates()
    {
        const int d = static_cast<int>(x.cols());
        std::vector<int> all(static_cast<std::size_t>(d));
        std::iota(all.begin(), all.end(), 0);
        if (rng == nullptr || max_features >= d) {
            return all;
        }
        // Partial Fisher-Yates, then scan the chosen features in index order.
        for (int i = 0; i < max_features; ++i) {
            const auto j = static_cast<std::size_t>(i) + rng->below(static_cast<std::uint64_t>(d - i));
            std::swap(all[static_cast<std::size_t>(i)], all[j]);
        }
        all.resize(static_cast<std::size_t>(max_features));
        std::sort(all.begin(), all.end());
        return all;
    }

    int build(const std::vector<std::size_t>& rows, int depth)
    {
        std::vector<double> counts(static_cast<std::size_t>(class_count), 0.0);
        for (std::size_t r : rows) {
            counts[static_cast<std::size_t>(y[r])] += 1.0;
        }
        const auto n = static_cast<double>(rows.size());
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        {
            auto& node = tree.nodes.back();
            node.proba.resize(counts.size());
            for (std::size_t c = 0; c < counts.size(); ++c) {
                node.proba[c] = counts[c] / n;
            }
        }
        const double parent = gini_of(counts, n);
        if (depth >= max_depth || static_cast<int>(rows.size()) < min_samples_split || parent <= 0.0) {
            return id;
        }
        const SplitChoice split = best_gini_split(x, y, class_count, rows, candidates());
        if (split.feature < 0 || !(split.impurity < parent - kSplitTolerance)) {
            return id;
        }
        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (std::size_t r : rows) {
            (x(static_cast<Eigen::Index>(r), split.feature) <= split.threshold ? left : right).push_back(r);
        }
        const int l = build(left, depth + 1);
        const int rr = build(right, depth + 1);
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = rr;
        return id;
    }
};

const std::vector<double>& tree_leaf(const DecisionTreeModel& tree, const Eigen::MatrixXd& x, Eigen::Index row)
{
    int at = 0;
    while (tree.nodes[static_cast<std::size_t>(at)].feature >= 0) {
        const auto& node = tree.nodes[static_cast<std::size_t>(at)];
        at = x(row, node.feature) <= node.threshold ? node.left : node.right;
    }
    return tree.nodes[static_cast<std::size_t>(at)].proba;
}

} // namespace

SplitChoice best_gini_split(const Eigen::MatrixXd& features,
                            const std::vector<int>& class_index,
                            int class_count,
                            const std::vector<std::size_t>& rows,
                            const std::vector<int>& candidate_features)
{
    SplitChoice best;
    best.impurity = std::numeric_limits<double>::infinity();
    const auto n = static_cast<double>(rows.size());
    const auto K = static_cast<std::size_t>(class_count);
    std::vector<std::size_t> order(rows);
    std::vector<double> left(K);
    std::vector<double> right(K);
    for (int f : candidate_features) {
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double va = features(static_cast<Eigen::Index>(a), f);
            const double vb = features(static_cast<Eigen::Index>(b), f);
            return va < vb || (va == vb && a < b);
        });
        std::fill(left.begin(), left.end(), 0.0);
        std::fill(right.begin(), right.end(), 0.0);
        for (std::size_t r : order) {
            right[static_cast<std::size_t>(class_index[r])] += 1.0;
        }
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            const auto c = static_cast<std::size_t>(class_index[order[i]]);
            left[c] += 1.0;
            right[c] -= 1.0;
            const double v = features(static_cast<Eigen::Index>(order[i]), f);
            const double next = features(static_cast<Eigen::Index>(order[i + 1]), f);
            if (!(v < next)) {
                continue;
            }
            const auto nl = static_cast<double>(i + 1);
            const double nr = n - nl;
            const double imp = (nl * gini_of(left, nl) + nr * gini_of(right, nr)) / n;
            if (imp < best.impurity - kSplitTolerance) {
                best.feature = f;
                best.threshold = v + (next - v) / 2.0;
                best.impurity = imp;
            }
        }
    }
    return best;
}

ClassifierModel train_classifier(ClassifierKind kind,
                                 const Eigen::MatrixXd& features,
                                 const std::vector<int>& labels,
                                 const ClassifierHyper& hyper,
                                 std::uint64_t seed)
{
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw ContractError("train_classifier: " + std::to_string(features.rows()) + " rows but " +
                            std::to_string(labels.size()) + " labels");
    }
    if (features.cols() == 0) {
        throw ContractError("train_classifier: no feature columns");
    }
    if (!features.allFinite()) {
        throw ContractError("train_classifier: non-finite feature value");
    }
    ClassifierModel m;
    m.kind_ = kind;
    m.seed_ = seed;
    m.hyper_ = hyper;
    m.dim_ = static_cast<int>(features.cols());
    m.classes_ = labels;
    std::sort(m.classes_.begin(), m.classes_.end());
    m.classes_.erase(std::unique(m.classes_.begin(), m.classes_.end()), m.classes_.end());
    if (m.classes_.size() < 2) {
        throw ContractError("train_classifier: need at least 2 classes, got " + std::to_string(m.classes_.size()));
    }
    const auto K = static_cast<Eigen::Index>(m.classes_.size());
    const Eigen::Index n = features.rows();
    const Eigen::Index d = features.cols();
    std::vector<int> y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        y[i] = static_cast<int>(std::lower_bound(m.classes_.begin(), m.classes_.end(), labels[i]) - m.classes_.begin());
    }

    m.mu_ = features.colwise().mean();
    m.sigma_ = ((features.rowwise() - m.mu_).array().square().colwise().sum() / static_cast<double>(n)).sqrt();
    for (Eigen::Index j = 0; j < d; ++j) {
        if (!(m.sigma_(j) > 1e-12)) {
            m.sigma_(j) = 1.0;
        }
    }

    switch (kind) {
    case ClassifierKind::LogisticRegression: {
        const Eigen::MatrixXd z = (features.rowwise() - m.mu_).array().rowwise() / m.sigma_.array();
        Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, K);
        for (Eigen::Index i = 0; i < n; ++i) {
            onehot(i, y[static_cast<std::size_t>(i)]) = 1.0;
        }
        m.weights_ = Eigen::MatrixXd::Zero(d, K);
        m.bias_ = Eigen::RowVectorXd::Zero(K);
        for (int epoch = 0; epoch < hyper.lr_epochs; ++epoch) {
            Eigen::MatrixXd p = (z * m.weights_).rowwise() + m.bias_;
            softmax_rows(p);
            const Eigen::MatrixXd diff = p - onehot;
            const Eigen::MatrixXd gw = z.transpose() * diff / static_cast<double>(n) + hyper.lr_l2 * m.weights_;
            m.weights_ -= hyper.lr_rate * gw;
            m.bias_ -= hyper.lr_rate * diff.colwise().mean();
        }
        break;
    }
    case ClassifierKind::DecisionTree:
    case ClassifierKind::RandomForest: {
        const bool forest = kind == ClassifierKind::RandomForest;
        int mf = static_cast<int>(d);
        if (forest) {
            mf = hyper.max_features > 0 ? hyper.max_features
                                        : static_cast<int>(std::lround(std::sqrt(static_cast<double>(d))));
            mf = std::clamp(mf, 1, static_cast<int>(d));
        }
        const int n_trees = forest ? std::max(1, hyper.n_trees) : 1;
        for (int t = 0; t < n_trees; ++t) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
            std::vector<std::size_t> rows(static_cast<std::size_t>(n));
            if (forest) {
                for (auto& r : rows) {
                    r = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)));
                }
                std::sort(rows.begin(), rows.end());
            } else {
                std::iota(rows.begin(), rows.end(), std::size_t{0});
            }
            TreeBuilder b{features, y, static_cast<int>(K), hyper.max_depth, hyper.min_samples_split, mf,
                          forest ? &rng : nullptr, {}};
            b.build(rows, 0);
            m.trees_.push_back(std::move(b.tree));
        }
        break;
    }
    case ClassifierKind::KNearest: {
        if (hyper.k_neighbors < 1) {
            throw ContractError("train_classifier: k_neighbors must be >= 1");
        }
        m.train_x_ = (features.rowwise() - m.mu_).array().rowwise() / m.sigma_.array();
        m.train_y_ = y;
        break;
    }
    case ClassifierKind::NaiveBayes: {
        m.nb_mean_ = Eigen::MatrixXd::Zero(K, d);
        m.nb_var_ = Eigen::MatrixXd::Zero(K, d);
        m.nb_log_prior_ = Eigen::RowVectorXd::Zero(K);
        std::vector<double> count(static_cast<std::size_t>(K), 0.0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int c = y[static_cast<std::size_t>(i)];
            m.nb_mean_.row(c) += features.row(i);
            count[static_cast<std::size_t>(c)] += 1.0;
        }
        for (Eigen::Index c = 0; c < K; ++c) {
            m.nb_mean_.row(c) /= count[static_cast<std::size_t>(c)];
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const int c = y[static_cast<std::size_t>(i)];
            m.nb_var_.row(c) += (features.row(i) - m.nb_mean_.row(c)).array().square().matrix();
        }
        const double floor_var = std::max(hyper.var_smoothing * m.sigma_.array().square().maxCoeff(), 1e-300);
        for (Eigen::Index c = 0; c < K; ++c) {
            m.nb_var_.row(c) = (m.nb_var_.row(c) / count[static_cast<std::size_t>(c)]).array() + floor_var;
            m.nb_log_prior_(c) = std::log(count[static_cast<std::size_t>(c)] / static_cast<double>(n));
        }
        break;
    }
    }
    return m;
}

Eigen::MatrixXd ClassifierModel::predict_proba(const Eigen::MatrixXd& features) const
{
    if (features.cols() != dim_) {
        throw ContractError("predict_proba: expected " + std::to_string(dim_) + " features, got " +
                            std::to_string(features.cols()));
    }
    const auto K = static_cast<Eigen::Index>(classes_.size());
    const Eigen::Index n = features.rows();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, K);
    switch (kind_) {
    case ClassifierKind::LogisticRegression: {
        const Eigen::MatrixXd z = (features.rowwise() - mu_).array().rowwise() / sigma_.array();
        out = (z * weights_).rowwise() + bias_;
        softmax_rows(out);
        break;
    }
    case ClassifierKind::DecisionTree:
    case ClassifierKind::RandomForest:
        for (Eigen::Index i = 0; i < n; ++i) {
            for (const auto& t : trees_) {
                const auto& p = tree_leaf(t, features, i);
                for (Eigen::Index c = 0; c < K; ++c) {
                    out(i, c) += p[static_cast<std::size_t>(c)];
                }
            }
            out.row(i) /= static_cast<double>(trees_.size());
        }
        break;
    case ClassifierKind::KNearest: {
        const Eigen::MatrixXd z = (features.rowwise() - mu_).array().rowwise() / sigma_.array();
        const auto k = static_cast<std::size_t>(std::min<Eigen::Index>(hyper_.k_neighbors, train_x_.rows()));
        std::vector<std::size_t> idx(static_cast<std::size_t>(train_x_.rows()));
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::VectorXd dist = (train_x_.rowwise() - z.row(i)).rowwise().squaredNorm();
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                              [&](std::size_t a, std::size_t b) {
                                  const double da = dist(static_cast<Eigen::Index>(a));
                                  const double db = dist(static_cast<Eigen::Index>(b));
                                  return da < db || (da == db && a < b);
                              });
            for (std::size_t j = 0; j < k; ++j) {
                out(i, train_y_[idx[j]]) += 1.0 / static_cast<double>(k);
            }
        }
        break;
    }
    case ClassifierKind::NaiveBayes:
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index c = 0; c < K; ++c) {
                const auto diff2 = (features.row(i) - nb_mean_.row(c)).array().square();
                out(i, c) = nb_log_prior_(c) -
                            0.5 * ((2.0 * 3.14159265358979323846 * nb_var_.row(c).array()).log() +
                                   diff2 / nb_var_.row(c).array())
                                      .sum();
            }
        }
        softmax_rows(out);
        break;
    }
    return out;
}

std::vector<std::vector<int>> rank_classes(const Eigen::MatrixXd& proba, int k)
{
    if (k < 1 || k > proba.cols()) {
        throw ContractError("top-k: k=" + std::to_string(k) + " outside [1, " + std::to_string(proba.cols()) + "]");
    }
    std::vector<std::vector<int>> out(static_cast<std::size_t>(proba.rows()));
    std::vector<int> idx(static_cast<std::size_t>(proba.cols()));
    for (Eigen::Index r = 0; r < proba.rows(); ++r) {
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return proba(r, a) > proba(r, b); });
        out[static_cast<std::size_t>(r)].assign(idx.begin(), idx.begin() + k);
    }
    return out;
}

std::vector<std::vector<int>> predict_topk(const ClassifierModel& model, const Eigen::MatrixXd& features, int k)
{
    auto ranked = rank_classes(model.predict_proba(features), k);
    for (auto& row : ranked) {
        for (auto& c : row) {
            c = model.classes()[static_cast<std::size_t>(c)];
        }
    }
    return ranked;
}

} // namespace trafficbench
