#pragma once

#include "trafficbench/attack/classifier.hpp"
#include "trafficbench/attack/fusion_net.hpp"
#include "trafficbench/defense.hpp"
#include "trafficbench/eval/report.hpp"
#include "trafficbench/imaging.hpp"
#include "trafficbench/ingest.hpp"

#include <optional>

namespace trafficbench {

/// Aligned traces of one home (same start, granularity and length) and its
/// activity labels.
struct Dataset {
    std::vector<RateTrace> traces;
    std::vector<ActivityLabel> labels;
};

Dataset dataset_from(const SynthHome& home);

/// Throws ContractError unless all traces share start, granularity and length.
void require_aligned(const std::vector<RateTrace>& traces);

struct MotifParams {
    double threshold = 2.0; ///< KB/s
    int window_half_n = 30;
};

/// Seed streams: every stage seed is derive_seed(run seed, stream).
enum class SeedStream : std::uint64_t {
    Defense = 1,
    Markov = 2,
    Split = 3,
    Model = 4,
    NetInit = 5,
    Train = 6,
    Knowledge = 7,
};

std::uint64_t stage_seed(std::uint64_t seed, SeedStream stream);

// ---------------------------------------------------------------------------

struct DefendedHome {
    std::string defense = "identity";
    std::vector<RateTrace> traces; ///< same order as the input traces
    DefenseLedger ledger;
    double overhead_pct = 0.0;
};

/// Applies the defense to every trace. The motif bank is harvested from the
/// original traces with `bank_motif`, and HTR's user model is fitted on the
/// labels. Trace i uses derive_seed(stage_seed(seed, Defense), i).
DefendedHome defend_home(const Dataset& data,
                         const DefenseConfig& cfg,
                         const MotifParams& bank_motif,
                         std::uint64_t seed,
                         const DefenseRegistry* registry = nullptr);

/// The undefended home under the "identity" name.
DefendedHome identity_defense(const Dataset& data);

/// Per-sample sum over all traces of one direction.
RateTrace aggregate_direction(const std::vector<RateTrace>& traces, Direction direction);

// ---------------------------------------------------------------------------

/// A fixed-length window anchored on a label: 2n+1 samples starting n/2
/// before the label start, shifted to stay inside the trace.
struct Segment {
    std::size_t label_index = 0;
    int activity_id = 0;
    std::size_t begin = 0;
    std::size_t length = 0;

    std::size_t center() const noexcept { return begin + length / 2; }
};

std::vector<Segment> label_segments(const Dataset& data, int window_half_n);

/// Samples [begin, begin + length) of a trace as a trace of its own.
RateTrace slice(const RateTrace& trace, std::size_t begin, std::size_t length);

/// Features of the highest-peaked motif (ties: earliest) of the window, or
/// nullopt when the window has none.
std::optional<FeatureVector> dominant_motif_features(const RateTrace& window, const MotifParams& params);

enum class AttackKind { Feature, Image };

struct AttackConfig {
    AttackKind kind = AttackKind::Feature;
    MotifParams motif;
    ClassifierKind classifier = ClassifierKind::RandomForest;
    ClassifierHyper classifier_hyper;
    std::vector<Representation> representations = {kAllRepresentations.begin(), kAllRepresentations.end()};
    GafConfig gaf;
    int image_size = kDefaultImageSize;
    FusionHyper fusion;

    std::string name() const;
};

/// Attack inputs for the windows that survive the motif filter.
struct PreparedSamples {
    std::vector<Segment> segments; ///< kept windows
    std::vector<int> labels;       ///< activity ids
    std::vector<int> classes;      ///< sorted distinct labels
    std::size_t dropped = 0;       ///< windows without any motif
    Eigen::MatrixXd features;      ///< 2 x 12 per window (in, then out)
    std::vector<ImageSet> images;  ///< filled for image attacks
};

/// Segments the original labels, extracts per-direction dominant-motif
/// features from the defended aggregate traffic and, for image attacks,
/// renders every configured representation.
PreparedSamples prepare_samples(const Dataset& original, const DefendedHome& defended, const AttackConfig& attack);

/// Images of the kept windows for one representation.
ImageSet encode_images(const std::vector<Segment>& segments,
                       const RateTrace& aggregate_in,
                       const RateTrace& aggregate_out,
                       Representation representation,
                       const GafConfig& gaf,
                       int image_size);

struct PipelineResult {
    EvalReport report;
    std::vector<std::vector<int>> ranked; ///< full class rankings per evaluated window
    std::vector<int> labels;
    std::vector<std::size_t> eval_rows;   ///< indices into the prepared samples
    std::optional<TrainReport> training;
};

/// Trains on `train_rows` (validation rows only monitor the fusion net) and
/// evaluates on `eval_rows` of the prepared samples.
PipelineResult attack_on_rows(const PreparedSamples& samples,
                              const std::vector<std::size_t>& train_rows,
                              const std::vector<std::size_t>& validation_rows,
                              const std::vector<std::size_t>& eval_rows,
                              const AttackConfig& attack,
                              std::uint64_t seed);

/// Stratified 70/15/15 split of the prepared samples.
DatasetSplit split_samples(const PreparedSamples& samples, std::uint64_t seed);

/// prepare -> split -> train -> predict -> evaluate. Stage failures surface
/// as StageError naming the stage.
PipelineResult attack_pipeline(const Dataset& original,
                               const DefendedHome& defended,
                               const AttackConfig& attack,
                               std::uint64_t seed);

struct PipelineConfig {
    MotifParams bank_motif;
    DefenseConfig defense; ///< plugin "identity" leaves the traffic untouched
    AttackConfig attack;
};

/// defend_home followed by attack_pipeline.
PipelineResult run_pipeline(const Dataset& data, const PipelineConfig& cfg, std::uint64_t seed);

} // namespace trafficbench
