#pragma once

// Reference implementations written from the definitions, kept deliberately
// naive so they share no code path with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------------------
// Motifs

struct MotifSpan {
    std::size_t center;
    std::size_t begin; // inclusive
    std::size_t end;   // exclusive

    bool operator==(const MotifSpan&) const = default;
};

/// Scans every sample: a center is above the threshold and is the first
/// maximum of its window, the above-threshold run around it clipped to
/// +/- n samples. Earlier samples must be strictly lower, later ones not
/// higher.
inline std::vector<MotifSpan> scan_motifs(const std::vector<double>& x, double threshold, int n)
{
    std::vector<MotifSpan> out;
    const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(x.size());
    for (std::ptrdiff_t p = 0; p < len; ++p) {
        if (!(x[p] > threshold)) {
            continue;
        }
        std::ptrdiff_t a = p;
        while (a - 1 >= 0 && p - (a - 1) <= n && x[a - 1] > threshold) {
            --a;
        }
        std::ptrdiff_t b = p;
        while (b + 1 < len && (b + 1) - p <= n && x[b + 1] > threshold) {
            ++b;
        }
        bool center = true;
        for (std::ptrdiff_t j = a; j <= b && center; ++j) {
            if ((j < p && x[j] >= x[p]) || (j > p && x[j] > x[p])) {
                center = false;
            }
        }
        if (center) {
            out.push_back({static_cast<std::size_t>(p), static_cast<std::size_t>(a), static_cast<std::size_t>(b + 1)});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Metrics, evaluated on the expanded list of (true, predicted) pairs

struct Pairs {
    std::vector<int> truth;
    std::vector<int> pred;
    int classes = 0;
};

inline Pairs expand(const std::vector<std::vector<std::int64_t>>& counts)
{
    Pairs p;
    p.classes = static_cast<int>(counts.size());
    for (int t = 0; t < p.classes; ++t) {
        for (int q = 0; q < p.classes; ++q) {
            for (std::int64_t k = 0; k < counts[t][q]; ++k) {
                p.truth.push_back(t);
                p.pred.push_back(q);
            }
        }
    }
    return p;
}

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline Prf class_prf(const Pairs& p, int c)
{
    double tp = 0.0;
    double predicted = 0.0;
    double actual = 0.0;
    for (std::size_t i = 0; i < p.truth.size(); ++i) {
        tp += (p.truth[i] == c && p.pred[i] == c) ? 1.0 : 0.0;
        predicted += p.pred[i] == c ? 1.0 : 0.0;
        actual += p.truth[i] == c ? 1.0 : 0.0;
    }
    Prf r;
    r.precision = predicted > 0.0 ? tp / predicted : 0.0;
    r.recall = actual > 0.0 ? tp / actual : 0.0;
    r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

inline Prf macro_prf(const Pairs& p)
{
    Prf out;
    for (int c = 0; c < p.classes; ++c) {
        const Prf v = class_prf(p, c);
        out.precision += v.precision / p.classes;
        out.recall += v.recall / p.classes;
        out.f1 += v.f1 / p.classes;
    }
    return out;
}

inline Prf weighted_prf(const Pairs& p)
{
    Prf out;
    const double n = static_cast<double>(p.truth.size());
    if (n == 0.0) {
        return out;
    }
    for (int c = 0; c < p.classes; ++c) {
        const double w = static_cast<double>(std::count(p.truth.begin(), p.truth.end(), c)) / n;
        const Prf v = class_prf(p, c);
        out.precision += w * v.precision;
        out.recall += w * v.recall;
        out.f1 += w * v.f1;
    }
    return out;
}

/// Pearson correlation between the one-hot truth and prediction matrices,
/// summed over classes (the R_K statistic). 0 when either side has no
/// variance.
inline double correlation_mcc(const Pairs& p)
{
    const std::size_t n = p.truth.size();
    if (n == 0) {
        return 0.0;
    }
    double cov_xy = 0.0;
    double cov_xx = 0.0;
    double cov_yy = 0.0;
    for (int c = 0; c < p.classes; ++c) {
        double mx = 0.0;
        double my = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += p.truth[i] == c ? 1.0 : 0.0;
            my += p.pred[i] == c ? 1.0 : 0.0;
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = (p.truth[i] == c ? 1.0 : 0.0) - mx;
            const double y = (p.pred[i] == c ? 1.0 : 0.0) - my;
            cov_xy += x * y;
            cov_xx += x * x;
            cov_yy += y * y;
        }
    }
    if (cov_xx <= 0.0 || cov_yy <= 0.0) {
        return 0.0;
    }
    return cov_xy / std::sqrt(cov_xx * cov_yy);
}

/// Two-class coefficient, class 1 positive, from the pair list.
inline double binary_mcc(const Pairs& p)
{
    double tp = 0.0;
    double tn = 0.0;
    double fp = 0.0;
    double fn = 0.0;
    for (std::size_t i = 0; i < p.truth.size(); ++i) {
        const bool t = p.truth[i] == 1;
        const bool q = p.pred[i] == 1;
        tp += (t && q) ? 1.0 : 0.0;
        tn += (!t && !q) ? 1.0 : 0.0;
        fp += (!t && q) ? 1.0 : 0.0;
        fn += (t && !q) ? 1.0 : 0.0;
    }
    const double den = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
    return den > 0.0 ? (tp * tn - fp * fn) / den : 0.0;
}

// ---------------------------------------------------------------------------
// GAF

/// (2x - max - min) / (max - min); zeros for a constant series.
inline std::vector<double> rescale(const std::vector<double>& x)
{
    const double hi = *std::max_element(x.begin(), x.end());
    const double lo = *std::min_element(x.begin(), x.end());
    std::vector<double> out(x.size(), 0.0);
    if (hi > lo) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            out[i] = std::clamp((2.0 * x[i] - hi - lo) / (hi - lo), -1.0, 1.0);
        }
    }
    return out;
}

/// cos(a + b) expanded: x_i x_j - sqrt(1 - x_i^2) sqrt(1 - x_j^2).
inline double gaf_entry(double xi, double xj)
{
    return xi * xj - std::sqrt(std::max(0.0, 1.0 - xi * xi)) * std::sqrt(std::max(0.0, 1.0 - xj * xj));
}

// ---------------------------------------------------------------------------
// Gini

inline double gini(const std::vector<int>& labels, int classes)
{
    if (labels.empty()) {
        return 0.0;
    }
    std::vector<double> c(static_cast<std::size_t>(classes), 0.0);
    for (int l : labels) {
        c[static_cast<std::size_t>(l)] += 1.0;
    }
    double g = 1.0;
    for (double v : c) {
        const double p = v / static_cast<double>(labels.size());
        g -= p * p;
    }
    return g;
}

struct GiniSplit {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
};

/// Every feature, every midpoint between consecutive distinct values; lowest
/// weighted child impurity, ties to the earlier feature then lower threshold.
/// feature stays -1 when no feature has two distinct values.
inline GiniSplit best_split(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels, int classes)
{
    GiniSplit best;
    best.impurity = HUGE_VAL;
    const std::size_t d = rows.empty() ? 0 : rows.front().size();
    for (std::size_t f = 0; f < d; ++f) {
        std::vector<double> values;
        for (const auto& r : rows) {
            values.push_back(r[f]);
        }
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t k = 0; k + 1 < values.size(); ++k) {
            const double thr = 0.5 * (values[k] + values[k + 1]);
            std::vector<int> left;
            std::vector<int> right;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                (rows[i][f] <= thr ? left : right).push_back(labels[i]);
            }
            const double n = static_cast<double>(rows.size());
            const double imp = static_cast<double>(left.size()) / n * gini(left, classes) +
                               static_cast<double>(right.size()) / n * gini(right, classes);
            if (imp < best.impurity - 1e-12) {
                best = {static_cast<int>(f), thr, imp};
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Loss

/// Entropy of (1 - eps + eps/K, eps/K, ..., eps/K).
inline double smoothed_entropy(int k, double eps)
{
    const double hi = 1.0 - eps + eps / k;
    const double lo = eps / k;
    double h = -hi * std::log(hi);
    if (lo > 0.0) {
        h -= (k - 1) * lo * std::log(lo);
    }
    return h;
}

} // namespace oracle
