#pragma once

#include <trafficbench/attack/pipeline.hpp>

#include <nlohmann/json_fwd.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace trafficbench::cli {

/// Bad flags or an invalid experiment config. Maps to exit code 2.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Where the input traffic comes from: a trace store directory, or a trace
/// CSV plus a label CSV.
struct InputPaths {
    std::filesystem::path store;
    std::filesystem::path traces;
    std::filesystem::path labels;
};

struct EvalSettings {
    std::vector<int> topk = {1, 5};
    std::vector<double> knowledge_levels; ///< empty: no adversary-confidence sweep
};

struct ExperimentConfig {
    InputPaths inputs;
    int granularity_s = 1;
    int impute_k = 3;
    std::optional<double> background_cap_kb_s;
    MotifParams motif;
    DefenseConfig defense;
    AttackConfig attack;
    EvalSettings eval;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
};

/// Parses and validates a config document. Relative input paths are
/// resolved against `base_dir`. Throws ConfigError naming the offending
/// field or path: the seed is mandatory and every input path must exist.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);

/// True for an integral JSON number that is not negative.
bool is_seed_value(const nlohmann::json& j);

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// The parts of a config that are not paths, for echoing into run outputs.
nlohmann::json describe(const ExperimentConfig& cfg);

/// Motif settings from a {"threshold", "window"} object.
MotifParams parse_motif(const nlohmann::json& j);

/// Attack settings from the "attack" object of a config.
AttackConfig parse_attack(const nlohmann::json& j, const MotifParams& motif);

/// Defense settings; unknown method names must be registered plugins.
DefenseConfig parse_defense(const nlohmann::json& j);

} // namespace trafficbench::cli
