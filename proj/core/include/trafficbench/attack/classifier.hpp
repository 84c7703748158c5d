#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace trafficbench {

enum class ClassifierKind { LogisticRegression, DecisionTree, RandomForest, KNearest, NaiveBayes };

std::string to_string(ClassifierKind k);
/// Accepts "logreg", "tree", "forest", "knn", "bayes" and the enum spellings.
ClassifierKind parse_classifier_kind(const std::string& text);

struct ClassifierHyper {
    // logistic regression: full-batch gradient descent on standardized features
    int lr_epochs = 300;
    double lr_rate = 0.5;
    double lr_l2 = 1e-4;
    // trees
    int max_depth = 12;
    int min_samples_split = 2;
    int n_trees = 100;
    int max_features = 0; ///< per split; 0 means round(sqrt(d)), clamped to [1, d]
    // nearest neighbours on standardized features
    int k_neighbors = 5;
    // gaussian naive bayes: variance floor as a fraction of the largest feature variance
    double var_smoothing = 1e-9;
};

struct TreeNode {
    int feature = -1; ///< -1 for a leaf
    double threshold = 0.0;
    int left = -1;  ///< rows with x[feature] <= threshold
    int right = -1;
    std::vector<double> proba;
};

/// Learned CART tree; node 0 is the root.
struct DecisionTreeModel {
    std::vector<TreeNode> nodes;
};

class ClassifierModel {
  public:
    ClassifierKind kind() const noexcept { return kind_; }
    /// Class ids in ascending order; probability column j belongs to classes()[j].
    const std::vector<int>& classes() const noexcept { return classes_; }
    std::uint64_t seed() const noexcept { return seed_; }
    int feature_count() const noexcept { return dim_; }

    /// One row per input, each a distribution over classes().
    Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& features) const;

    /// Trees of a DecisionTree (one) or RandomForest model.
    const std::vector<DecisionTreeModel>& trees() const noexcept { return trees_; }

  private:
    friend ClassifierModel train_classifier(ClassifierKind,
                                            const Eigen::MatrixXd&,
                                            const std::vector<int>&,
                                            const ClassifierHyper&,
                                            std::uint64_t);

    ClassifierKind kind_ = ClassifierKind::LogisticRegression;
    std::vector<int> classes_;
    std::uint64_t seed_ = 0;
    int dim_ = 0;
    ClassifierHyper hyper_;

    Eigen::RowVectorXd mu_;
    Eigen::RowVectorXd sigma_;
    Eigen::MatrixXd weights_; ///< logistic regression: dim x classes
    Eigen::RowVectorXd bias_;
    std::vector<DecisionTreeModel> trees_;
    Eigen::MatrixXd train_x_; ///< knn: standardized training rows
    std::vector<int> train_y_;
    Eigen::MatrixXd nb_mean_; ///< classes x dim
    Eigen::MatrixXd nb_var_;
    Eigen::RowVectorXd nb_log_prior_;
};

/// Fits a model. Labels are arbitrary class ids; at least two distinct ids
/// are required and rows must match the label count.
ClassifierModel train_classifier(ClassifierKind kind,
                                 const Eigen::MatrixXd& features,
                                 const std::vector<int>& labels,
                                 const ClassifierHyper& hyper,
                                 std::uint64_t seed);

/// Class indices of each row ranked by probability, ties to the lower index.
std::vector<std::vector<int>> rank_classes(const Eigen::MatrixXd& proba, int k);

/// Top-k class ids per row, ranked by probability with ties to the lower id.
std::vector<std::vector<int>> predict_topk(const ClassifierModel& model, const Eigen::MatrixXd& features, int k);

/// Best single split of the rows by weighted gini impurity, scanning features
/// in order and thresholds (midpoints of distinct values) in ascending order;
/// only strict improvements replace the incumbent.
struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0; ///< weighted child gini
};
SplitChoice best_gini_split(const Eigen::MatrixXd& features,
                            const std::vector<int>& class_index,
                            int class_count,
                            const std::vector<std::size_t>& rows,
                            const std::vector<int>& candidate_features);

} // namespace trafficbench
