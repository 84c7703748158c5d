#pragma once

#include "config.hpp"
#include "store.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace trafficbench::cli {

struct GlobalOptions {
    std::filesystem::path config; ///< empty when not given
    std::optional<std::uint64_t> seed;
    std::filesystem::path out = "out";
    int jobs = 1;
};

/// Config document of --config, or an empty object.
nlohmann::json load_config_doc(const GlobalOptions& global);

/// --seed, else the config's seed. Throws ConfigError when neither is set.
std::uint64_t resolve_seed(const GlobalOptions& global, const nlohmann::json& doc);

struct SynthOptions {
    std::string kind = "activity"; ///< "activity" (14 multi-device activities) or "device"
    int devices = 4;
    int duration_s = 7200;
    int events = 16; ///< per activity, or per device for kind "device"
};

/// Writes traces.csv and labels.csv of a seeded synthetic home to --out.
void cmd_synth(const GlobalOptions& global, const SynthOptions& options);

struct IngestArgs {
    std::filesystem::path traces;
    std::filesystem::path labels;
    IngestOptions options;
};

/// Parses, aligns, imputes and filters CSV input into a trace store at --out.
IngestStats cmd_ingest(const GlobalOptions& global, const IngestArgs& args);

struct DefendArgs {
    std::filesystem::path store;
    nlohmann::json overrides = nlohmann::json::object(); ///< merged over the config's "defense"
};

/// Writes the defended store to --out and returns its ledger.
DefendedHome cmd_defend(const GlobalOptions& global, const DefendArgs& args);

struct AttackArgs {
    std::filesystem::path store;    ///< original (undefended) store
    std::filesystem::path defended; ///< defended store; empty attacks the original
    nlohmann::json overrides = nlohmann::json::object(); ///< merged over the config's "attack"
};

struct EncodeSummary {
    std::size_t kept = 0;
    std::size_t dropped = 0;
    std::size_t images = 0;
};

/// Renders every kept window in each representation as a P6 file under
/// --out/<representation>/ and lists them in --out/index.csv.
EncodeSummary cmd_encode(const GlobalOptions& global, const AttackArgs& args);

/// Trains and evaluates one attack; writes report.json, report.txt and, for
/// image attacks, loss.csv to --out.
EvalReport cmd_attack(const GlobalOptions& global, const AttackArgs& args);

/// Renders stored reports and their strongest-attack epsilon; writes
/// summary.json to --out. Returns epsilon.
double cmd_eval(const GlobalOptions& global, const std::vector<std::filesystem::path>& reports);

/// Full pipeline from one experiment config. Writes report.json,
/// report.txt, topk.csv, loss.csv (image attacks) and ac_curve.csv (when
/// knowledge levels are configured) to the config's output dir, or --out
/// when given explicitly.
EvalReport cmd_run(const GlobalOptions& global, bool out_given);

} // namespace trafficbench::cli
