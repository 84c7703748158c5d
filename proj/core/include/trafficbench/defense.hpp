#pragma once

#include "trafficbench/ingest.hpp"
#include "trafficbench/motif.hpp"
#include "trafficbench/random.hpp"

#include <nlohmann/json_fwd.hpp>

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace trafficbench {

enum class DefenseMethod { PTI, RTP, HTR, Plugin };

std::string to_string(DefenseMethod m);
DefenseMethod parse_defense_method(const std::string& text);

struct DefenseConfig {
    DefenseMethod method = DefenseMethod::PTI;
    std::string plugin_name;              ///< used when method == Plugin
    double flatten_threshold_V = 1.0;     ///< KB/s
    double injection_rate_per_hour = 0.0; ///< Poisson rate (PTI)
    double bernoulli_p = 1.0;             ///< per-candidate keep probability
    int hmm_states = 2;
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const DefenseConfig& cfg);
void from_json(const nlohmann::json& j, DefenseConfig& cfg);

/// Historical motifs available for injection.
class MotifBank {
  public:
    MotifBank() = default;
    MotifBank(std::vector<Motif> motifs, double threshold, int window_half_n);

    bool empty() const noexcept { return motifs_.empty(); }
    std::size_t size() const noexcept { return motifs_.size(); }
    const std::vector<Motif>& motifs() const noexcept { return motifs_; }
    const Motif& operator[](std::size_t i) const { return motifs_.at(i); }
    /// Indices into motifs() harvested from the given device.
    const std::vector<std::size_t>& for_device(const std::string& device_id) const;
    double threshold() const noexcept { return threshold_; }
    int window_half_n() const noexcept { return window_half_n_; }

  private:
    std::vector<Motif> motifs_;
    std::map<std::string, std::vector<std::size_t>> by_device_;
    double threshold_ = 0.0;
    int window_half_n_ = 1;
};

/// Harvests every motif of every trace. Throws EmptyBankError when none.
MotifBank build_motif_bank(const std::vector<RateTrace>& traces, double threshold, int window_half_n);

struct IndexRange {
    std::size_t begin = 0; ///< inclusive
    std::size_t end = 0;   ///< exclusive

    bool operator==(const IndexRange&) const = default;
};

/// Reshaped trace and its overhead ledger. Volumes are in bytes
/// (rate KB/s x 1000 x seconds).
struct DefenseOutcome {
    RateTrace reshaped;
    double genuine_bytes = 0.0;
    double injected_bytes = 0.0;
    double padded_bytes = 0.0;
    double overhead_pct = 0.0;
    std::vector<IndexRange> injected_windows;
};

/// Byte volume of a trace (absent samples count as zero).
double trace_bytes(const RateTrace& trace);

/// 100 * added / genuine; 0 when nothing was added to an empty trace and
/// +infinity when bytes were added to one.
double overhead_percent(double genuine_bytes, double added_bytes);

/// Ledger for a reshaped trace whose whole difference is attributed to
/// injection (padded = 0). Intended for plugins.
DefenseOutcome make_outcome(const RateTrace& original, RateTrace reshaped);

/// Throws ValidationError when the outcome breaks an outcome invariant:
/// alignment, finite non-negative rates, disjoint in-bounds windows, ledger
/// closure and the overhead formula (relative tolerance 1e-9).
void validate_outcome(const RateTrace& original, const DefenseOutcome& outcome);

/// 100 * (sum reshaped - sum original) / sum original.
double compute_overhead(const RateTrace& original, const DefenseOutcome& outcome);

/// 95th percentile of all present samples of the traces.
double default_flatten_threshold(const std::vector<RateTrace>& traces);

// ---------------------------------------------------------------------------
// Pure traffic injection

/// Injection instants (sample indices) of a Poisson process at the given
/// hourly rate over the trace duration, each kept with probability p.
std::vector<std::size_t> draw_injection_schedule(const RateTrace& trace, double rate_per_hour, double p, Rng& rng);

struct Placement {
    std::size_t index = 0;        ///< first sample the motif lands on
    const Motif* motif = nullptr;
    double scale = 1.0;
};

/// Superposes scaled motif samples onto the trace. Placements that would
/// overlap an earlier injected window are skipped; motifs are clipped at the
/// trace end.
DefenseOutcome inject_motifs(const RateTrace& trace, const std::vector<Placement>& placements);

DefenseOutcome apply_pti(const RateTrace& trace, const MotifBank& bank, const DefenseConfig& cfg);

// ---------------------------------------------------------------------------
// Random traffic padding

/// Pads every run of non-zero traffic up to V, and with probability p per
/// idle slot (2n+1 samples of the bank's window) injects a bank motif scaled
/// to peak at V and pads it to V. Rates are never lowered.
DefenseOutcome apply_rtp(const RateTrace& trace, const MotifBank& bank, const DefenseConfig& cfg);

// ---------------------------------------------------------------------------
// Hybrid traffic reshaping

struct MarkovUserModel {
    int n_states = 0;
    std::vector<std::vector<double>> transition; ///< row-stochastic
    std::vector<double> initial;
    std::vector<double> mean_dwell_s;            ///< exponential dwell per state
    std::vector<std::vector<Motif>> emissions;   ///< motifs observed per state
    std::map<int, int> activity_state;           ///< activity id -> state
    bool fitted = false;
};

/// Clusters distinct activities into states (seeded k-means on mean start
/// hour and mean duration), estimates add-one smoothed transitions over the
/// time-ordered label sequence and collects bank motifs per state.
MarkovUserModel fit_markov_model(const std::vector<ActivityLabel>& labels,
                                 const MotifBank& bank,
                                 int n_states,
                                 std::uint64_t seed = 0);

struct SimulatedEvent {
    double epoch_s = 0.0;
    int state = 0;
};

std::vector<SimulatedEvent> simulate_markov_events(const MarkovUserModel& model,
                                                   double begin_epoch_s,
                                                   double end_epoch_s,
                                                   Rng& rng);

/// Caps rates at V, carrying the excess to later samples; any backlog left at
/// the end is released in the final sample so volume is conserved.
std::vector<double> flatten_buffered(const std::vector<double>& rates, double cap);

/// Injects motifs at Markov-simulated times (each kept with probability p),
/// then flattens the combined trace by buffering at V.
DefenseOutcome apply_htr(const RateTrace& trace, const MarkovUserModel& model, const DefenseConfig& cfg);

// ---------------------------------------------------------------------------
// Plugins

using DefensePlugin = std::function<DefenseOutcome(const RateTrace&, const DefenseConfig&)>;

class DefenseRegistry {
  public:
    /// Registry with the built-in "identity" plugin.
    DefenseRegistry();

    void add(const std::string& name, DefensePlugin plugin);
    bool contains(const std::string& name) const { return plugins_.count(name) != 0; }
    std::vector<std::string> names() const;

    /// Runs the plugin and validates its outcome against the input.
    DefenseOutcome apply(const std::string& name, const RateTrace& trace, const DefenseConfig& cfg) const;

  private:
    std::map<std::string, DefensePlugin> plugins_;
};

/// Process-wide registry. Mutate only during setup.
DefenseRegistry& default_registry();

void register_defense_plugin(const std::string& name, DefensePlugin plugin);

/// Everything a defense may need besides the trace.
struct DefenseContext {
    const MotifBank* bank = nullptr;
    const MarkovUserModel* model = nullptr;
    const DefenseRegistry* registry = nullptr; ///< default_registry() when null
};

DefenseOutcome apply_defense(const RateTrace& trace, const DefenseConfig& cfg, const DefenseContext& ctx);

} // namespace trafficbench
