#pragma once

#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace trafficbench {

enum class Direction { In, Out };

std::string to_string(Direction d);
Direction parse_direction(const std::string& text);

/// Marker for a sample with no observation. Only valid before imputation.
inline constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

inline bool is_absent(double v) noexcept { return v != v; }

/// Granularities the benchmark is calibrated for, in seconds.
inline constexpr int kStandardGranularities[] = {1, 60, 180, 300, 600};

bool is_standard_granularity(int granularity_s) noexcept;

/// Traffic-rate time series of one device in one direction, in KB/s
/// (1 KB = 1000 bytes). Sample i covers
/// [start_epoch_s + i*granularity_s, start_epoch_s + (i+1)*granularity_s).
struct RateTrace {
    std::string device_id;
    Direction direction = Direction::In;
    int granularity_s = 1;
    std::int64_t start_epoch_s = 0;
    std::vector<double> rates;

    std::size_t size() const noexcept { return rates.size(); }
    std::int64_t end_epoch_s() const noexcept
    {
        return start_epoch_s + static_cast<std::int64_t>(rates.size()) * granularity_s;
    }

    /// Set when the granularity is outside kStandardGranularities.
    bool nonstandard_granularity() const noexcept { return !is_standard_granularity(granularity_s); }

    bool has_absent() const noexcept;
    std::size_t absent_count() const noexcept;

    /// Total volume in KB (rate x duration). Absent samples count as zero.
    double volume_kb() const noexcept;

    /// Throws ValidationError on negative or non-finite present samples and
    /// ContractError on a non-positive granularity.
    void validate() const;

    bool operator==(const RateTrace&) const = default;
};

using TraceKey = std::pair<std::string, Direction>;

inline TraceKey key_of(const RateTrace& t) { return {t.device_id, t.direction}; }

// ---------------------------------------------------------------------------
// Labels

struct ActivityLabel {
    int activity_id = 0;
    std::set<TraceKey> device_events;
    std::int64_t start_epoch_s = 0; ///< inclusive
    std::int64_t end_epoch_s = 0;   ///< exclusive

    bool operator==(const ActivityLabel&) const = default;
};

struct ActivityInfo {
    int activity_id = 0;
    std::set<TraceKey> devices;
    std::string description;
};

/// The set of activity ids a home may be labeled with.
class LabelCatalog {
  public:
    LabelCatalog() = default;
    explicit LabelCatalog(std::vector<ActivityInfo> activities);

    bool contains(int activity_id) const { return by_id_.count(activity_id) != 0; }
    const ActivityInfo& at(int activity_id) const;
    const std::vector<ActivityInfo>& activities() const noexcept { return activities_; }
    std::size_t size() const noexcept { return activities_.size(); }

    /// Checks catalog membership and per-activity non-overlap of windows.
    void validate(const std::vector<ActivityLabel>& labels) const;

  private:
    std::vector<ActivityInfo> activities_;
    std::map<int, std::size_t> by_id_;
};

/// The 14 user activities of the UNSW home with the 2,000 KB/s background
/// filter applied (reference fixture; frequencies are the published counts).
struct ReferenceActivity {
    int activity_id;
    std::vector<TraceKey> devices;
    int frequency;
};
const std::vector<ReferenceActivity>& unsw_reference_activities();
LabelCatalog unsw_activity_catalog();

// ---------------------------------------------------------------------------
// CSV formats

/// Parses `epoch_s,device_id,direction,bytes` rows into one trace per
/// (device_id, direction), ordered by that key. Bytes falling in the same
/// granularity bucket are summed; buckets without rows are absent.
std::vector<RateTrace> parse_trace(std::istream& csv, int granularity_s = 1);

/// Writes traces in the trace CSV format, one row per present sample at the
/// sample's start epoch. Byte counts are written with 6 decimals.
void serialize_traces(std::ostream& out, const std::vector<RateTrace>& traces);

std::vector<ActivityLabel> parse_labels(std::istream& csv);
void serialize_labels(std::ostream& out, const std::vector<ActivityLabel>& labels);

// ---------------------------------------------------------------------------
// Transforms

/// Mean-resamples to a coarser granularity (an integer multiple of the
/// current one). A trailing partial bucket is averaged over the full bucket
/// length so total volume is conserved. Absent samples are skipped; a bucket
/// with only absent samples stays absent.
RateTrace resample(const RateTrace& trace, int new_granularity_s);

/// Replaces each absent sample with the mean of its k nearest present samples
/// by time distance; ties go to the earlier sample.
RateTrace impute_knn(const RateTrace& trace, int k);

struct FilterResult {
    RateTrace trace;
    std::size_t clipped = 0;
};

/// Background cap used for the UNSW home, in KB/s.
inline constexpr double kDefaultBackgroundCapKbS = 2000.0;

FilterResult background_filter(const RateTrace& trace, double cap_kb_s);

// ---------------------------------------------------------------------------
// Splitting

struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
};

struct SplitRatios {
    double train = 0.70;
    double validation = 0.15;
};

/// Seeded 70/15/15 split of [0, n_items). When labels are given, each class
/// is split proportionally (largest-remainder apportionment) while the global
/// set sizes stay those of the unstratified split.
DatasetSplit split_dataset(std::size_t n_items,
                           std::uint64_t seed,
                           const std::vector<int>* labels = nullptr,
                           SplitRatios ratios = {});

// ---------------------------------------------------------------------------
// Synthetic homes

/// Burst signature of one synthetic device.
struct DeviceProfile {
    std::string device_id;
    double amplitude_in = 0.0;  ///< plateau height of the inbound burst, KB/s
    double out_ratio = 0.0;     ///< outbound plateau height / inbound plateau height
    int ramp_s = 1;             ///< triangular ramp length on each side
    int plateau_s = 1;          ///< flat top length
    int out_lag_s = 0;          ///< outbound burst delay relative to inbound

    int burst_length_s() const noexcept { return 2 * ramp_s + plateau_s + out_lag_s; }
};

DeviceProfile synth_device_profile(int device_index);

struct SynthHome {
    std::vector<RateTrace> traces;      ///< 2 per device (in, out), ordered by key
    std::vector<ActivityLabel> labels;  ///< ordered by start time
    LabelCatalog catalog;
    std::vector<DeviceProfile> devices;
};

inline constexpr std::int64_t kSynthStartEpoch = 1'600'000'000;

/// One activity per device (activity_id = device index) with
/// events_per_device labeled bursts each, on a sparse noise floor.
SynthHome synth_home(std::uint64_t seed, int n_devices, int duration_s, int events_per_device);

/// Activity template: which (device, direction) pairs burst together.
struct ActivityTemplate {
    int activity_id;
    std::vector<std::pair<int, Direction>> members; ///< device index, direction
};

/// Fourteen multi-device activities over four devices, shaped like the
/// reference home's activity table.
std::vector<ActivityTemplate> default_activity_templates();

SynthHome synth_activity_home(std::uint64_t seed,
                              int n_devices,
                              int duration_s,
                              int events_per_activity,
                              const std::vector<ActivityTemplate>& activities);

} // namespace trafficbench
