#pragma once

#include "trafficbench/ingest.hpp"

#include <Eigen/Dense>

#include <array>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

namespace trafficbench {

/// A burst of traffic above a threshold around a local maximum, at most
/// 2n+1 samples long.
struct Motif {
    TraceKey trace_ref;
    std::size_t center_index = 0;  ///< position of the maximum in the source trace
    std::size_t start_index = 0;   ///< first sample of `samples` in the source trace
    int window_half_n = 1;
    double threshold = 0.0;
    int granularity_s = 1;
    std::int64_t center_epoch_s = 0;
    std::vector<double> samples;

    int duration_s() const noexcept { return static_cast<int>(samples.size()) * granularity_s; }
    std::size_t end_index() const noexcept { return start_index + samples.size(); }
    /// Offset of the center inside `samples`.
    std::size_t center_offset() const noexcept { return center_index - start_index; }
    double volume_kb() const noexcept;
};

/// Half-width in samples matching a 60 s sliding window at the granularity.
int default_window_half_n(int granularity_s);

/// One motif per local maximum above `threshold` that is also the first
/// maximum of its own window: the contiguous above-threshold run around it,
/// truncated to +/- window_half_n samples. Shoulder peaks inside a higher
/// peak's window are absorbed into that peak's motif; on a plateau the
/// leftmost sample is the center. Ordered by center.
std::vector<Motif> extract_motifs(const RateTrace& trace, double threshold, int window_half_n);

// ---------------------------------------------------------------------------

inline constexpr std::size_t kFeatureCount = 12;

/// Column names in serialization order.
const std::array<std::string_view, kFeatureCount>& feature_names();

struct FeatureVector {
    double duration = 0.0;
    double mean = 0.0;
    double max = 0.0;
    double min = 0.0;
    double std_dev = 0.0;
    double variance = 0.0;
    double range = 0.0;
    double skewness = 0.0;
    double coeff_of_variation = 0.0;
    double kurtosis = 0.0;
    double area = 0.0;
    double auc = 0.0;

    std::array<double, kFeatureCount> to_array() const noexcept;
};

/// Normalization of the third and fourth standardized moments.
enum class MomentNormalization {
    WindowMinusOne, ///< 1/(m-1) for an m-sample motif: 1/(2n) on a full window
    SampleCount,    ///< 1/m, the bias-consistent variant for sensitivity checks
};

/// Statistical features of a motif. Variance is the population variance;
/// area is the left-Riemann sum of (x - T) dt over samples above T with
/// dt = granularity; auc is the same sum without the threshold. Zero spread
/// yields zero skewness and kurtosis; zero mean yields zero CV.
FeatureVector compute_features(const Motif& motif,
                               MomentNormalization norm = MomentNormalization::WindowMinusOne);

/// Rows of features in FeatureVector order.
Eigen::MatrixXd feature_matrix(std::span<const FeatureVector> features);

/// CSV with a header row in feature_names() order.
void write_feature_csv(std::ostream& out, std::span<const FeatureVector> features);

// ---------------------------------------------------------------------------

struct PcaModel {
    Eigen::VectorXd mean;
    Eigen::MatrixXd components;         ///< out_dim x in_dim, orthonormal rows
    Eigen::VectorXd explained_ratio;    ///< per component, non-increasing
    int out_dim = 0;

    int in_dim() const noexcept { return static_cast<int>(mean.size()); }
};

/// Top principal directions of the mean-centered rows. Each component's
/// largest-magnitude entry is made positive. out_dim may equal the feature
/// dimension (full rotation) but not exceed it.
PcaModel pca_fit(const Eigen::MatrixXd& features, int out_dim);

/// (features - mean) * components^T.
Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& features);

/// Maps projected rows back to feature space: projected * components + mean.
Eigen::MatrixXd pca_inverse(const PcaModel& model, const Eigen::MatrixXd& projected);

} // namespace trafficbench
