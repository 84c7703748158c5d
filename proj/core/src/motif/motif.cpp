#include "trafficbench/motif.hpp"

#include "trafficbench/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace trafficbench {

double Motif::volume_kb() const noexcept
{
    double s = 0.0;
    for (double v : samples) {
        s += v;
    }
    return s * granularity_s;
}

int default_window_half_n(int granularity_s)
{
    if (granularity_s <= 0) {
        throw ContractError("granularity must be positive");
    }
    return std::max(1, 30 / granularity_s);
}

std::vector<Motif> extract_motifs(const RateTrace& trace, double threshold, int window_half_n)
{
    if (!(threshold >= 0.0)) {
        throw ContractError("extract_motifs: threshold must be non-negative");
    }
    if (window_half_n < 1) {
        throw ContractError("extract_motifs: window_half_n must be >= 1");
    }
    if (trace.has_absent()) {
        throw ContractError("extract_motifs: trace has absent samples; impute first");
    }
    const auto& x = trace.rates;
    const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(x.size());
    const std::ptrdiff_t n = window_half_n;

    // prev_ge[p]: nearest index to the left with x >= x[p]; next_gt[p]: nearest
    // to the right with x > x[p]. A center must see neither inside its window.
    std::vector<std::ptrdiff_t> prev_ge(x.size(), -1);
    std::vector<std::ptrdiff_t> next_gt(x.size(), len);
    std::vector<std::ptrdiff_t> stack;
    for (std::ptrdiff_t i = 0; i < len; ++i) {
        while (!stack.empty() && x[static_cast<std::size_t>(stack.back())] < x[static_cast<std::size_t>(i)]) {
            stack.pop_back();
        }
        prev_ge[static_cast<std::size_t>(i)] = stack.empty() ? -1 : stack.back();
        stack.push_back(i);
    }
    stack.clear();
    for (std::ptrdiff_t i = len - 1; i >= 0; --i) {
        while (!stack.empty() && x[static_cast<std::size_t>(stack.back())] <= x[static_cast<std::size_t>(i)]) {
            stack.pop_back();
        }
        next_gt[static_cast<std::size_t>(i)] = stack.empty() ? len : stack.back();
        stack.push_back(i);
    }

    std::vector<Motif> motifs;
    std::ptrdiff_t i = 0;
    while (i < len) {
        if (!(x[static_cast<std::size_t>(i)] > threshold)) {
            ++i;
            continue;
        }
        const std::ptrdiff_t run_begin = i;
        while (i < len && x[static_cast<std::size_t>(i)] > threshold) {
            ++i;
        }
        const std::ptrdiff_t run_last = i - 1;
        for (std::ptrdiff_t p = run_begin; p <= run_last; ++p) {
            const std::ptrdiff_t a = std::max(run_begin, p - n);
            const std::ptrdiff_t b = std::min(run_last, p + n);
            if (prev_ge[static_cast<std::size_t>(p)] >= a || next_gt[static_cast<std::size_t>(p)] <= b) {
                continue;
            }
            Motif m;
            m.trace_ref = key_of(trace);
            m.center_index = static_cast<std::size_t>(p);
            m.start_index = static_cast<std::size_t>(a);
            m.window_half_n = window_half_n;
            m.threshold = threshold;
            m.granularity_s = trace.granularity_s;
            m.center_epoch_s = trace.start_epoch_s + p * trace.granularity_s;
            m.samples.assign(x.begin() + a, x.begin() + b + 1);
            motifs.push_back(std::move(m));
        }
    }
    return motifs;
}

// ---------------------------------------------------------------------------

const std::array<std::string_view, kFeatureCount>& feature_names()
{
    static const std::array<std::string_view, kFeatureCount> names = {
        "duration", "mean", "max", "min", "std", "variance", "range", "skewness", "cv", "kurtosis", "area", "auc"};
    return names;
}

std::array<double, kFeatureCount> FeatureVector::to_array() const noexcept
{
    return {duration, mean, max, min, std_dev, variance, range, skewness, coeff_of_variation, kurtosis, area, auc};
}

FeatureVector compute_features(const Motif& motif, MomentNormalization norm)
{
    const auto& x = motif.samples;
    if (x.empty()) {
        throw ContractError("compute_features: motif has no samples");
    }
    const double m = static_cast<double>(x.size());
    const double dt = motif.granularity_s;
    FeatureVector f;
    f.duration = m * dt;

    double sum = 0.0;
    f.max = x.front();
    f.min = x.front();
    for (double v : x) {
        sum += v;
        f.max = std::max(f.max, v);
        f.min = std::min(f.min, v);
    }
    f.mean = sum / m;
    f.range = f.max - f.min;

    double ss = 0.0;
    for (double v : x) {
        ss += (v - f.mean) * (v - f.mean);
    }
    f.variance = ss / m;
    f.std_dev = std::sqrt(f.variance);
    f.coeff_of_variation = f.mean > 0.0 ? f.std_dev / f.mean : 0.0;

    if (f.std_dev > 0.0) {
        const double denom = norm == MomentNormalization::WindowMinusOne ? std::max(1.0, m - 1.0) : m;
        double m3 = 0.0;
        double m4 = 0.0;
        for (double v : x) {
            const double z = (v - f.mean) / f.std_dev;
            m3 += z * z * z;
            m4 += z * z * z * z;
        }
        f.skewness = m3 / denom;
        f.kurtosis = m4 / denom;
    }

    for (double v : x) {
        if (v > motif.threshold) {
            f.area += (v - motif.threshold) * dt;
        }
        f.auc += v * dt;
    }
    return f;
}

Eigen::MatrixXd feature_matrix(std::span<const FeatureVector> features)
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(features.size()), static_cast<Eigen::Index>(kFeatureCount));
    for (std::size_t r = 0; r < features.size(); ++r) {
        const auto row = features[r].to_array();
        for (std::size_t c = 0; c < kFeatureCount; ++c) {
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
        }
    }
    return out;
}

void write_feature_csv(std::ostream& out, std::span<const FeatureVector> features)
{
    const auto& names = feature_names();
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
        out << (c ? "," : "") << names[c];
    }
    out << '\n';
    char buf[40];
    for (const auto& f : features) {
        const auto row = f.to_array();
        for (std::size_t c = 0; c < kFeatureCount; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", row[c]);
            out << (c ? "," : "") << buf;
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------

PcaModel pca_fit(const Eigen::MatrixXd& features, int out_dim)
{
    const auto rows = features.rows();
    const auto dim = features.cols();
    if (out_dim < 1) {
        throw ContractError("pca_fit: out_dim must be >= 1");
    }
    if (out_dim > dim) {
        throw ContractError("pca_fit: out_dim " + std::to_string(out_dim) + " exceeds feature dimension " +
                            std::to_string(dim));
    }
    if (rows <= out_dim) {
        throw ContractError("pca_fit: need more rows than out_dim");
    }
    PcaModel model;
    model.out_dim = out_dim;
    model.mean = features.colwise().mean().transpose();
    const Eigen::MatrixXd centered = features.rowwise() - model.mean.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(rows - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw ContractError("pca_fit: eigen decomposition failed");
    }
    const Eigen::VectorXd values = solver.eigenvalues().cwiseMax(0.0);  // ascending
    const Eigen::MatrixXd vectors = solver.eigenvectors();
    const double total = values.sum();

    model.components.resize(out_dim, dim);
    model.explained_ratio.resize(out_dim);
    for (int k = 0; k < out_dim; ++k) {
        const Eigen::Index src = dim - 1 - k;
        Eigen::VectorXd v = vectors.col(src);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) {
            v = -v;
        }
        model.components.row(k) = v.transpose();
        model.explained_ratio(k) = total > 0.0 ? values(src) / total : 0.0;
    }
    return model;
}

Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& features)
{
    if (features.cols() != model.in_dim()) {
        throw ContractError("pca_transform: feature dimension " + std::to_string(features.cols()) +
                            " does not match model dimension " + std::to_string(model.in_dim()));
    }
    return (features.rowwise() - model.mean.transpose()) * model.components.transpose();
}

Eigen::MatrixXd pca_inverse(const PcaModel& model, const Eigen::MatrixXd& projected)
{
    if (projected.cols() != model.out_dim) {
        throw ContractError("pca_inverse: projected dimension does not match model");
    }
    return (projected * model.components).rowwise() + model.mean.transpose();
}

} // namespace trafficbench
