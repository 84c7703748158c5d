#include "trafficbench/eval/metrics.hpp"

#include "trafficbench/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace trafficbench {

std::int64_t ConfusionMatrix::total() const noexcept
{
    std::int64_t s = 0;
    for (const auto& row : counts) {
        for (auto v : row) {
            s += v;
        }
    }
    return s;
}

std::int64_t ConfusionMatrix::tp(std::size_t c) const
{
    return counts.at(c).at(c);
}

std::int64_t ConfusionMatrix::fp(std::size_t c) const
{
    std::int64_t s = 0;
    for (std::size_t t = 0; t < counts.size(); ++t) {
        if (t != c) {
            s += counts[t][c];
        }
    }
    return s;
}

std::int64_t ConfusionMatrix::fn(std::size_t c) const
{
    return support(c) - tp(c);
}

std::int64_t ConfusionMatrix::tn(std::size_t c) const
{
    return total() - tp(c) - fp(c) - fn(c);
}

std::int64_t ConfusionMatrix::support(std::size_t c) const
{
    std::int64_t s = 0;
    for (auto v : counts.at(c)) {
        s += v;
    }
    return s;
}

std::size_t ConfusionMatrix::index_of(int class_id) const
{
    const auto it = std::lower_bound(classes.begin(), classes.end(), class_id);
    if (it == classes.end() || *it != class_id) {
        throw ContractError("class id " + std::to_string(class_id) + " is not in the catalog");
    }
    return static_cast<std::size_t>(it - classes.begin());
}

ConfusionMatrix make_confusion(std::vector<int> classes)
{
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    ConfusionMatrix cm;
    cm.counts.assign(classes.size(), std::vector<std::int64_t>(classes.size(), 0));
    cm.classes = std::move(classes);
    return cm;
}

ConfusionMatrix build_confusion(const std::vector<std::vector<int>>& ranked,
                                const std::vector<int>& labels,
                                const std::vector<int>& classes)
{
    if (ranked.size() != labels.size()) {
        throw ContractError("build_confusion: " + std::to_string(ranked.size()) + " predictions for " +
                            std::to_string(labels.size()) + " labels");
    }
    std::vector<int> catalog = classes;
    if (catalog.empty()) {
        catalog = labels;
        for (const auto& r : ranked) {
            if (!r.empty()) {
                catalog.push_back(r.front());
            }
        }
    }
    ConfusionMatrix cm = make_confusion(std::move(catalog));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (ranked[i].empty()) {
            throw ContractError("build_confusion: empty ranking at sample " + std::to_string(i));
        }
        ++cm.counts[cm.index_of(labels[i])][cm.index_of(ranked[i].front())];
    }
    return cm;
}

namespace {

double ratio(double num, double den)
{
    return den > 0.0 ? num / den : 0.0;
}

} // namespace

PrecisionRecallF1 class_prf(const ConfusionMatrix& cm, std::size_t c)
{
    const auto tp = static_cast<double>(cm.tp(c));
    PrecisionRecallF1 r;
    r.precision = ratio(tp, tp + static_cast<double>(cm.fp(c)));
    r.recall = ratio(tp, tp + static_cast<double>(cm.fn(c)));
    r.f1 = ratio(2.0 * r.precision * r.recall, r.precision + r.recall);
    return r;
}

PrecisionRecallF1 precision_recall_f1(const ConfusionMatrix& cm, Averaging averaging)
{
    if (cm.class_count() == 0) {
        throw ContractError("precision_recall_f1: empty confusion matrix");
    }
    PrecisionRecallF1 out;
    double weight_sum = 0.0;
    for (std::size_t c = 0; c < cm.class_count(); ++c) {
        const auto v = class_prf(cm, c);
        double w = 1.0;
        if (averaging == Averaging::Weighted) {
            w = static_cast<double>(cm.support(c));
            if (w == 0.0) {
                continue;
            }
        }
        out.precision += w * v.precision;
        out.recall += w * v.recall;
        out.f1 += w * v.f1;
        weight_sum += w;
    }
    if (weight_sum > 0.0) {
        out.precision /= weight_sum;
        out.recall /= weight_sum;
        out.f1 /= weight_sum;
    }
    return out;
}

double mcc_binary(std::int64_t tp, std::int64_t fp, std::int64_t fn, std::int64_t tn)
{
    const auto TP = static_cast<double>(tp);
    const auto FP = static_cast<double>(fp);
    const auto FN = static_cast<double>(fn);
    const auto TN = static_cast<double>(tn);
    const double den = (TP + FP) * (TP + FN) * (TN + FP) * (TN + FN);
    if (!(den > 0.0)) {
        return 0.0;
    }
    return (TP * TN - FP * FN) / std::sqrt(den);
}

double mcc(const ConfusionMatrix& cm)
{
    const std::size_t K = cm.class_count();
    if (K == 0) {
        throw ContractError("mcc: empty confusion matrix");
    }
    if (K == 2) {
        return mcc_binary(cm.counts[1][1], cm.counts[0][1], cm.counts[1][0], cm.counts[0][0]);
    }
    double s = 0.0;
    double c = 0.0;
    double pt = 0.0;
    double pp = 0.0;
    double tt = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        double p_k = 0.0;
        for (std::size_t t = 0; t < K; ++t) {
            p_k += static_cast<double>(cm.counts[t][k]);
        }
        const auto t_k = static_cast<double>(cm.support(k));
        c += static_cast<double>(cm.counts[k][k]);
        s += t_k;
        pt += p_k * t_k;
        pp += p_k * p_k;
        tt += t_k * t_k;
    }
    const double den = (s * s - pp) * (s * s - tt);
    if (!(den > 0.0)) {
        return 0.0;
    }
    return (c * s - pt) / std::sqrt(den);
}

double class_mcc(const ConfusionMatrix& cm, std::size_t c)
{
    return mcc_binary(cm.tp(c), cm.fp(c), cm.fn(c), cm.tn(c));
}

double topk_accuracy(const std::vector<std::vector<int>>& ranked, const std::vector<int>& labels, int k)
{
    if (ranked.size() != labels.size()) {
        throw ContractError("topk_accuracy: " + std::to_string(ranked.size()) + " rankings for " +
                            std::to_string(labels.size()) + " labels");
    }
    if (k < 1) {
        throw ContractError("topk_accuracy: k must be >= 1");
    }
    if (labels.empty()) {
        return 0.0;
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (ranked[i].size() < static_cast<std::size_t>(k)) {
            throw ContractError("topk_accuracy: ranking " + std::to_string(i) + " has " +
                                std::to_string(ranked[i].size()) + " entries, k=" + std::to_string(k));
        }
        if (std::find(ranked[i].begin(), ranked[i].begin() + k, labels[i]) != ranked[i].begin() + k) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

} // namespace trafficbench
