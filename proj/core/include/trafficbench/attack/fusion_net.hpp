#pragma once

#include "trafficbench/imaging.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace trafficbench {

struct FusionHyper {
    int epochs = 100;
    int batch = 64;
    double lr = 0.001;
    double weight_decay = 5e-5;
    double label_smoothing = 0.1;
    /// Learning-rate multiplier for the convolution encoders. Their gradients
    /// arrive through a global average and are much smaller than the head's.
    double encoder_lr_scale = 1.0;
    /// Worker threads per batch. Above 1 the gradient sum is sharded and the
    /// result is no longer bit-identical to the single-threaded run.
    int jobs = 1;
};

/// Images of one representation, in window order. window_ids identify the
/// source window of each image so sets can be checked for alignment.
struct ImageSet {
    Representation representation = Representation::LineChart;
    std::vector<ImageTensor> images;
    std::vector<std::int64_t> window_ids;
};

/// One ImageSet per network representation (same order) plus class indices.
struct FusionDataset {
    std::vector<ImageSet> sets;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
};

struct FusionArchitecture {
    std::vector<Representation> representations;
    int class_count = 0;
    int image_size = 0;
    int conv1_channels = 8;
    int conv2_channels = 16;
    int hidden = 32;
    /// Convolutions bypassed: per-channel global average of the masked input
    /// feeds the attention, and the hidden layer is linear.
    bool linear_only = false;
    /// Two fixed input channels holding the column and row coordinate, so
    /// the globally averaged features can depend on where a pattern sits.
    bool coord_channels = true;

    int input_channels() const noexcept { return coord_channels ? 5 : 3; }
    int feature_dim() const noexcept { return linear_only ? 3 : conv2_channels; }
    bool operator==(const FusionArchitecture&) const = default;
};

/// Per-representation encoders (conv-tanh-avgpool twice, global average)
/// over the image mapped to [-1, 1] plus coordinate channels,
/// a shared attention score w.f + b softmaxed over representations, the
/// attention-weighted concatenation and a tanh MLP head with softmax output.
/// Parameters live in one flat vector.
class FusionNet {
  public:
    FusionNet() = default;
    FusionNet(FusionArchitecture arch, std::uint64_t seed);

    const FusionArchitecture& architecture() const noexcept { return arch_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::vector<double>& params() noexcept { return params_; }
    const std::vector<double>& params() const noexcept { return params_; }
    std::size_t param_count() const noexcept { return params_.size(); }
    /// Encoder parameters occupy [0, encoder_param_count()).
    std::size_t encoder_param_count() const;

    /// Binary per-channel input masks, one per representation (default all ones).
    std::vector<std::array<double, 3>>& channel_masks() noexcept { return masks_; }
    const std::vector<std::array<double, 3>>& channel_masks() const noexcept { return masks_; }

    /// Index range [begin, end) of the conv1 weights of representation r.
    /// Throws ContractError on a linear-only net.
    std::pair<std::size_t, std::size_t> input_weight_range(std::size_t r) const;

    /// Class probabilities for sample i of the dataset.
    std::vector<double> forward(const FusionDataset& data, std::size_t i) const;
    /// Attention weights over the representations for sample i.
    std::vector<double> attention(const FusionDataset& data, std::size_t i) const;
    /// One probability row per sample.
    Eigen::MatrixXd predict_proba(const FusionDataset& data) const;

    /// Mean label-smoothed cross-entropy over the given samples; adds the
    /// gradient into grad (scaled by 1/rows.size()) when grad is non-null.
    double loss_and_gradient(const FusionDataset& data,
                             std::span<const std::size_t> rows,
                             double label_smoothing,
                             std::vector<double>* grad,
                             int jobs = 1) const;

    /// FNV-1a over the parameter bytes.
    std::uint64_t checksum() const noexcept;

  private:
    struct Layout;
    double sample_pass(const FusionDataset& data,
                       std::size_t i,
                       double label_smoothing,
                       std::vector<double>* grad,
                       std::vector<double>* proba,
                       std::vector<double>* alpha) const;

    FusionArchitecture arch_;
    std::uint64_t seed_ = 0;
    std::vector<double> params_;
    std::vector<std::array<double, 3>> masks_;
};

/// Seeded network with uniform fan-in initialization. Throws ContractError
/// for an empty or oversized representation set, fewer than 2 classes or an
/// image size that is not a positive multiple of 4.
FusionNet build_fusion_net(const std::vector<Representation>& representations,
                           int class_count,
                           int image_size,
                           std::uint64_t seed,
                           bool linear_only = false);

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> scores);

/// Label-smoothed targets: (1 - eps) on the label plus eps / K everywhere.
double smoothed_cross_entropy(std::span<const double> proba, int label, double eps);

/// Entropy of the smoothed target distribution; the smallest reachable loss.
double smoothed_entropy_floor(int class_count, double eps);

struct TrainReport {
    double initial_loss = 0.0;
    std::vector<double> epoch_loss;      ///< mean training loss after each epoch
    std::vector<double> validation_top1; ///< per epoch, empty without a validation set
    double wall_seconds = 0.0;
    std::uint64_t checksum = 0;
};

/// Throws ContractError when the sets disagree in count, representation or
/// window order (naming the first mismatched window), or do not match the
/// network's representations and image size.
void check_alignment(const FusionNet& net, const FusionDataset& data);

/// Mini-batch gradient descent with decoupled weight decay; batch order is
/// shuffled each epoch from the seed.
TrainReport train_fusion(FusionNet& net,
                         const FusionDataset& train,
                         const FusionHyper& hyper,
                         std::uint64_t seed,
                         const FusionDataset* validation = nullptr);

struct GradientCheckResult {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0; ///< both gradients below the dead-parameter floor
};

inline constexpr double kGradientFloor = 1e-9;

/// Central differences on a seeded subset of min(n_params, total)
/// parameters against the backpropagated gradient of the smoothed loss.
/// Relative error is |a - b| / max(|a|, |b|); parameters whose analytic and
/// numeric gradients are both below kGradientFloor are skipped.
GradientCheckResult gradient_check(const FusionNet& net,
                                   const FusionDataset& batch,
                                   double epsilon,
                                   std::uint64_t seed = 0,
                                   std::size_t n_params = 256,
                                   double label_smoothing = 0.1);

inline constexpr std::uint32_t kFusionFormatVersion = 1;

/// Container: "TBFN", u32 version, u64 seed, architecture descriptor,
/// channel masks, u64 count and little-endian doubles.
void save_fusion_net(const FusionNet& net, std::ostream& out);
void save_fusion_net(const FusionNet& net, const std::filesystem::path& path);
/// Throws FormatError on a bad magic, a version other than
/// kFusionFormatVersion or a truncated stream.
FusionNet load_fusion_net(std::istream& in);
FusionNet load_fusion_net(const std::filesystem::path& path);

} // namespace trafficbench
