#include "commands.hpp"

#include <trafficbench/error.hpp>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>

namespace {

using namespace trafficbench;
using namespace trafficbench::cli;
using nlohmann::json;

void setup_logging()
{
    auto logger = spdlog::stderr_color_mt("trafficbench");
    logger->set_pattern("%^[%l]%$ %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("TRAFFICBENCH_LOG")) {
        const std::string name = env;
        const auto level = spdlog::level::from_str(name);
        if (level == spdlog::level::off && name != "off") {
            spdlog::warn("TRAFFICBENCH_LOG: unknown level '{}', using info", name);
        } else {
            spdlog::set_level(level);
        }
    }
}

/// Adds `key` to `j` when the option was given on the command line.
template <class T>
void set_if(json& j, const char* key, const CLI::Option* opt, const T& value)
{
    if (opt->count() > 0) {
        j[key] = value;
    }
}

} // namespace

int main(int argc, char** argv)
{
    setup_logging();

    CLI::App app{"Traffic-analysis attack and defense benchmark for smart-home rate traces"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions global;
    std::string config_path;
    std::string out_path = "out";
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "Experiment config (JSON)");
    auto* seed_opt = app.add_option("--seed", seed, "Run seed; overrides the config's seed");
    auto* out_opt = app.add_option("--out", out_path, "Output directory");
    app.add_option("--jobs", global.jobs, "Worker threads for network training")->check(CLI::Range(1, 256));

    // synth
    SynthOptions synth;
    auto* c_synth = app.add_subcommand("synth", "Write a seeded synthetic home as trace and label CSVs");
    c_synth->add_option("--kind", synth.kind, "activity (14 multi-device activities) or device")
        ->check(CLI::IsMember({"activity", "device"}));
    c_synth->add_option("--devices", synth.devices, "Number of devices")->check(CLI::Range(1, 64));
    c_synth->add_option("--duration", synth.duration_s, "Duration in seconds")->check(CLI::PositiveNumber);
    c_synth->add_option("--events", synth.events, "Labeled events per activity (or device)")
        ->check(CLI::PositiveNumber);

    // ingest
    IngestArgs ingest;
    double cap = 0.0;
    auto* c_ingest = app.add_subcommand("ingest", "Parse trace and label CSVs into a trace store");
    c_ingest->add_option("--traces", ingest.traces, "Trace CSV (epoch_s,device_id,direction,bytes)")->required();
    c_ingest->add_option("--labels", ingest.labels, "Label CSV")->required();
    c_ingest->add_option("--granularity", ingest.options.granularity_s, "Sample granularity in seconds")
        ->check(CLI::PositiveNumber);
    c_ingest->add_option("--impute-k", ingest.options.impute_k, "Neighbours for absent-sample imputation")
        ->check(CLI::PositiveNumber);
    auto* cap_opt = c_ingest->add_option("--background-cap", cap, "Clip rates above this many KB/s")
        ->check(CLI::PositiveNumber);

    // defend
    DefendArgs defend;
    std::string method;
    double threshold = 0.0;
    double rate = 0.0;
    double p = 0.0;
    int states = 0;
    auto* c_defend = app.add_subcommand("defend", "Apply a defense to a trace store");
    c_defend->add_option("--store", defend.store, "Trace store")->required();
    auto* method_opt = c_defend->add_option("--method", method, "pti, rtp, htr or a registered plugin");
    auto* v_opt = c_defend->add_option("--threshold", threshold, "Flattening threshold V in KB/s");
    auto* rate_opt = c_defend->add_option("--rate", rate, "PTI injections per hour");
    auto* p_opt = c_defend->add_option("--p", p, "Bernoulli keep probability");
    auto* states_opt = c_defend->add_option("--states", states, "HTR user-model states");

    // encode / attack share their inputs
    AttackArgs attack;
    std::vector<std::string> reps;
    int image_size = 0;
    std::string kind;
    std::string classifier;
    int epochs = 0;
    auto add_attack_inputs = [&](CLI::App* c) {
        c->add_option("--store", attack.store, "Original trace store")->required();
        c->add_option("--defended", attack.defended, "Defended trace store");
    };
    auto* c_encode = app.add_subcommand("encode", "Render kept windows as P6 images");
    add_attack_inputs(c_encode);
    auto* reps_enc = c_encode->add_option("--representations", reps, "line, heat, scatter, gaf")->delimiter(',');
    auto* size_enc = c_encode->add_option("--image-size", image_size, "Image side in pixels");

    auto* c_attack = app.add_subcommand("attack", "Train and evaluate one attack");
    add_attack_inputs(c_attack);
    auto* kind_opt = c_attack->add_option("--kind", kind, "feature or image")->check(CLI::IsMember({"feature", "image"}));
    auto* clf_opt = c_attack->add_option("--classifier", classifier, "logreg, tree, forest, knn or bayes");
    auto* reps_att = c_attack->add_option("--representations", reps, "line, heat, scatter, gaf")->delimiter(',');
    auto* size_att = c_attack->add_option("--image-size", image_size, "Image side in pixels");
    auto* epochs_opt = c_attack->add_option("--epochs", epochs, "Fusion-net training epochs");

    // eval
    std::vector<std::string> report_paths;
    auto* c_eval = app.add_subcommand("eval", "Tabulate reports and their epsilon-security");
    c_eval->add_option("reports", report_paths, "report.json files")->required();

    // run
    auto* c_run = app.add_subcommand("run", "Run the whole pipeline from --config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    global.config = config_path;
    global.out = out_path;
    if (seed_opt->count() > 0) {
        global.seed = seed;
    }

    try {
        if (c_synth->parsed()) {
            cmd_synth(global, synth);
        } else if (c_ingest->parsed()) {
            if (cap_opt->count() > 0) {
                ingest.options.background_cap_kb_s = cap;
            }
            cmd_ingest(global, ingest);
        } else if (c_defend->parsed()) {
            set_if(defend.overrides, "method", method_opt, method);
            set_if(defend.overrides, "flatten_threshold_kb_s", v_opt, threshold);
            set_if(defend.overrides, "injection_rate_per_hour", rate_opt, rate);
            set_if(defend.overrides, "bernoulli_p", p_opt, p);
            set_if(defend.overrides, "hmm_states", states_opt, states);
            cmd_defend(global, defend);
        } else if (c_encode->parsed()) {
            set_if(attack.overrides, "representations", reps_enc, reps);
            set_if(attack.overrides, "image_size", size_enc, image_size);
            cmd_encode(global, attack);
        } else if (c_attack->parsed()) {
            set_if(attack.overrides, "kind", kind_opt, kind);
            set_if(attack.overrides, "classifier", clf_opt, classifier);
            set_if(attack.overrides, "representations", reps_att, reps);
            set_if(attack.overrides, "image_size", size_att, image_size);
            if (epochs_opt->count() > 0) {
                attack.overrides["fusion"]["epochs"] = epochs;
            }
            cmd_attack(global, attack);
        } else if (c_eval->parsed()) {
            std::vector<std::filesystem::path> paths(report_paths.begin(), report_paths.end());
            cmd_eval(global, paths);
        } else if (c_run->parsed()) {
            cmd_run(global, out_opt->count() > 0);
        }
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return 2;
    } catch (const nlohmann::json::exception& e) {
        spdlog::error("config: {}", e.what());
        return 2;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
