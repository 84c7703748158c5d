#pragma once

#include <cstdint>
#include <vector>

namespace trafficbench {

/// counts[t][p]: samples of true class classes[t] predicted as classes[p].
struct ConfusionMatrix {
    std::vector<int> classes;
    std::vector<std::vector<std::int64_t>> counts;

    std::size_t class_count() const noexcept { return classes.size(); }
    std::int64_t total() const noexcept;
    std::int64_t tp(std::size_t c) const;
    std::int64_t fp(std::size_t c) const;
    std::int64_t fn(std::size_t c) const;
    std::int64_t tn(std::size_t c) const;
    std::int64_t support(std::size_t c) const;
    /// Index of a class id; throws ContractError for an unknown id.
    std::size_t index_of(int class_id) const;

    bool operator==(const ConfusionMatrix&) const = default;
};

/// Square zero matrix over the given class ids (sorted, de-duplicated).
ConfusionMatrix make_confusion(std::vector<int> classes);

/// Tallies the first entry of each ranking against its label. The catalog
/// defaults to the sorted union of labels and predictions.
ConfusionMatrix build_confusion(const std::vector<std::vector<int>>& ranked,
                                const std::vector<int>& labels,
                                const std::vector<int>& classes = {});

enum class Averaging { Macro, Weighted };

struct PrecisionRecallF1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// One-vs-rest values for class index c; 0/0 is 0.
PrecisionRecallF1 class_prf(const ConfusionMatrix& cm, std::size_t c);

/// Macro: unweighted mean over all catalog classes (zero-support classes
/// count as 0). Weighted: support-weighted mean over classes with support.
PrecisionRecallF1 precision_recall_f1(const ConfusionMatrix& cm, Averaging averaging);

/// Two-class coefficient from the cell counts; 0 on a zero denominator.
double mcc_binary(std::int64_t tp, std::int64_t fp, std::int64_t fn, std::int64_t tn);

/// Covariance form over the whole matrix; the binary formula for two classes.
/// A zero denominator yields 0.
double mcc(const ConfusionMatrix& cm);

/// One-vs-rest coefficient of class index c.
double class_mcc(const ConfusionMatrix& cm, std::size_t c);

/// Fraction of samples whose label is among the first k ranked classes.
/// Throws ContractError when lengths differ or a ranking is shorter than k.
double topk_accuracy(const std::vector<std::vector<int>>& ranked, const std::vector<int>& labels, int k);

} // namespace trafficbench
