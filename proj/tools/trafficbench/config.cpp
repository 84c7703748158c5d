#include "config.hpp"

#include <trafficbench/error.hpp>

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>

namespace trafficbench::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where)
{
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) {
            throw ConfigError(where + ": unknown field '" + key + "'");
        }
    }
}

const json& object_at(const json& j, const char* key, const std::string& where)
{
    const auto& v = j.at(key);
    if (!v.is_object()) {
        throw ConfigError(where + "." + key + " must be an object");
    }
    return v;
}

fs::path existing_path(const json& j, const char* key, const fs::path& base, const std::string& where)
{
    fs::path p = j.at(key).get<std::string>();
    if (p.is_relative()) {
        p = base / p;
    }
    if (!fs::exists(p)) {
        throw ConfigError(where + "." + key + ": no such file or directory: " + p.string());
    }
    return p;
}

Representation representation_of(const std::string& name)
{
    try {
        return parse_representation(name);
    } catch (const std::exception&) {
        throw ConfigError("unknown representation '" + name + "' (expected line, heat, scatter or gaf)");
    }
}

void parse_classifier_hyper(const json& j, ClassifierHyper& h)
{
    reject_unknown(j,
                   {"lr_epochs", "lr_rate", "lr_l2", "max_depth", "min_samples_split", "n_trees", "max_features",
                    "k_neighbors", "var_smoothing"},
                   "attack.hyper");
    h.lr_epochs = j.value("lr_epochs", h.lr_epochs);
    h.lr_rate = j.value("lr_rate", h.lr_rate);
    h.lr_l2 = j.value("lr_l2", h.lr_l2);
    h.max_depth = j.value("max_depth", h.max_depth);
    h.min_samples_split = j.value("min_samples_split", h.min_samples_split);
    h.n_trees = j.value("n_trees", h.n_trees);
    h.max_features = j.value("max_features", h.max_features);
    h.k_neighbors = j.value("k_neighbors", h.k_neighbors);
    h.var_smoothing = j.value("var_smoothing", h.var_smoothing);
}

void parse_fusion_hyper(const json& j, FusionHyper& h)
{
    reject_unknown(j, {"epochs", "batch", "lr", "weight_decay", "label_smoothing", "encoder_lr_scale"}, "attack.fusion");
    h.epochs = j.value("epochs", h.epochs);
    h.batch = j.value("batch", h.batch);
    h.lr = j.value("lr", h.lr);
    h.weight_decay = j.value("weight_decay", h.weight_decay);
    h.label_smoothing = j.value("label_smoothing", h.label_smoothing);
    h.encoder_lr_scale = j.value("encoder_lr_scale", h.encoder_lr_scale);
    if (h.epochs < 0 || h.batch < 1 || !(h.lr > 0.0) || h.weight_decay < 0.0 || h.label_smoothing < 0.0 ||
        h.label_smoothing >= 1.0 || !(h.encoder_lr_scale > 0.0)) {
        throw ConfigError("attack.fusion: hyperparameter out of range");
    }
}

} // namespace

MotifParams parse_motif(const json& j)
{
    if (!j.is_object()) {
        throw ConfigError("motif must be an object");
    }
    reject_unknown(j, {"threshold", "window"}, "motif");
    MotifParams m;
    m.threshold = j.value("threshold", m.threshold);
    m.window_half_n = j.value("window", m.window_half_n);
    if (!(m.threshold >= 0.0) || m.window_half_n < 1) {
        throw ConfigError("motif: threshold must be >= 0 and window >= 1");
    }
    return m;
}

DefenseConfig parse_defense(const json& j)
{
    if (!j.is_object()) {
        throw ConfigError("defense must be an object");
    }
    reject_unknown(j,
                   {"method", "plugin", "flatten_threshold_kb_s", "injection_rate_per_hour", "bernoulli_p",
                    "hmm_states", "seed"},
                   "defense");
    DefenseConfig d = j.get<DefenseConfig>();
    if (d.method == DefenseMethod::Plugin && !default_registry().contains(d.plugin_name)) {
        std::string known;
        for (const auto& n : default_registry().names()) {
            known += " " + n;
        }
        throw ConfigError("unknown defense method '" + d.plugin_name + "' (built in: pti rtp htr; plugins:" + known +
                          ")");
    }
    try {
        d.validate();
    } catch (const ContractError& e) {
        throw ConfigError(e.what());
    }
    return d;
}

AttackConfig parse_attack(const json& j, const MotifParams& motif)
{
    if (!j.is_object()) {
        throw ConfigError("attack must be an object");
    }
    reject_unknown(j, {"kind", "classifier", "hyper", "representations", "gaf", "image_size", "fusion"}, "attack");
    AttackConfig a;
    a.motif = motif;
    const auto kind = j.value("kind", std::string("feature"));
    if (kind == "feature") {
        a.kind = AttackKind::Feature;
    } else if (kind == "image") {
        a.kind = AttackKind::Image;
    } else {
        throw ConfigError("attack.kind must be 'feature' or 'image', got '" + kind + "'");
    }
    if (j.contains("classifier")) {
        try {
            a.classifier = parse_classifier_kind(j.at("classifier").get<std::string>());
        } catch (const ContractError& e) {
            throw ConfigError(std::string("attack.classifier: ") + e.what());
        }
    }
    if (j.contains("hyper")) {
        parse_classifier_hyper(object_at(j, "hyper", "attack"), a.classifier_hyper);
    }
    if (j.contains("representations")) {
        a.representations.clear();
        for (const auto& r : j.at("representations")) {
            a.representations.push_back(representation_of(r.get<std::string>()));
        }
    }
    if (j.contains("gaf")) {
        const auto& g = object_at(j, "gaf", "attack");
        reject_unknown(g, {"gaf_num", "granularities", "window_len"}, "attack.gaf");
        a.gaf.gaf_num = g.value("gaf_num", a.gaf.gaf_num);
        a.gaf.granularities = g.value("granularities", a.gaf.granularities);
        a.gaf.window_len = g.value("window_len", a.gaf.window_len);
    }
    a.image_size = j.value("image_size", a.image_size);
    if (j.contains("fusion")) {
        parse_fusion_hyper(object_at(j, "fusion", "attack"), a.fusion);
    }
    if (a.kind == AttackKind::Image) {
        if (a.representations.empty() || a.representations.size() > 4) {
            throw ConfigError("attack.representations must name 1 to 4 representations");
        }
        if (a.image_size < 4 || a.image_size % 4 != 0) {
            throw ConfigError("attack.image_size must be a positive multiple of 4");
        }
        try {
            a.gaf.validate();
        } catch (const ContractError& e) {
            throw ConfigError(std::string("attack.gaf: ") + e.what());
        }
    }
    return a;
}

ExperimentConfig parse_experiment_config(const json& doc, const fs::path& base_dir)
{
    if (!doc.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    try {
        reject_unknown(doc,
                       {"inputs", "granularity_s", "impute_k", "background_cap_kb_s", "motif", "defense", "attack",
                        "eval", "seed", "output_dir"},
                       "config");
        ExperimentConfig c;
        if (!doc.contains("seed")) {
            throw ConfigError("config: 'seed' is mandatory");
        }
        if (!is_seed_value(doc.at("seed"))) {
            throw ConfigError("config: 'seed' must be a non-negative integer");
        }
        c.seed = doc.at("seed").get<std::uint64_t>();

        if (!doc.contains("inputs")) {
            throw ConfigError("config: 'inputs' is mandatory");
        }
        const auto& in = object_at(doc, "inputs", "config");
        reject_unknown(in, {"store", "traces", "labels"}, "inputs");
        if (in.contains("store")) {
            if (in.contains("traces") || in.contains("labels")) {
                throw ConfigError("inputs: give either 'store' or 'traces' and 'labels'");
            }
            c.inputs.store = existing_path(in, "store", base_dir, "inputs");
        } else {
            if (!in.contains("traces") || !in.contains("labels")) {
                throw ConfigError("inputs: 'traces' and 'labels' are both required without 'store'");
            }
            c.inputs.traces = existing_path(in, "traces", base_dir, "inputs");
            c.inputs.labels = existing_path(in, "labels", base_dir, "inputs");
        }

        c.granularity_s = doc.value("granularity_s", c.granularity_s);
        if (c.granularity_s < 1) {
            throw ConfigError("config: granularity_s must be >= 1");
        }
        c.impute_k = doc.value("impute_k", c.impute_k);
        if (c.impute_k < 1) {
            throw ConfigError("config: impute_k must be >= 1");
        }
        if (doc.contains("background_cap_kb_s") && !doc.at("background_cap_kb_s").is_null()) {
            c.background_cap_kb_s = doc.at("background_cap_kb_s").get<double>();
            if (!(*c.background_cap_kb_s > 0.0)) {
                throw ConfigError("config: background_cap_kb_s must be positive");
            }
        }
        if (doc.contains("motif")) {
            c.motif = parse_motif(doc.at("motif"));
        }
        c.defense = doc.contains("defense") ? parse_defense(doc.at("defense")) : parse_defense(json{{"method", "identity"}});
        c.attack = parse_attack(doc.value("attack", json::object()), c.motif);
        if (doc.contains("eval")) {
            const auto& e = object_at(doc, "eval", "config");
            reject_unknown(e, {"topk", "knowledge_levels"}, "eval");
            c.eval.topk = e.value("topk", c.eval.topk);
            c.eval.knowledge_levels = e.value("knowledge_levels", c.eval.knowledge_levels);
            for (int k : c.eval.topk) {
                if (k < 1) {
                    throw ConfigError("eval.topk entries must be >= 1");
                }
            }
            for (std::size_t i = 0; i < c.eval.knowledge_levels.size(); ++i) {
                const double q = c.eval.knowledge_levels[i];
                if (!(q >= 0.0 && q <= 1.0) || (i > 0 && !(q > c.eval.knowledge_levels[i - 1]))) {
                    throw ConfigError("eval.knowledge_levels must increase within [0, 1]");
                }
            }
        }
        if (doc.contains("output_dir")) {
            c.output_dir = doc.at("output_dir").get<std::string>();
            if (c.output_dir.is_relative()) {
                c.output_dir = base_dir / c.output_dir;
            }
        }
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

ExperimentConfig load_experiment_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config: " + path.string());
    }
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_experiment_config(doc, path.parent_path());
}

bool is_seed_value(const json& j)
{
    return j.is_number_unsigned() || (j.is_number_integer() && j.get<std::int64_t>() >= 0);
}

json describe(const ExperimentConfig& cfg)
{
    json reps = json::array();
    for (auto r : cfg.attack.representations) {
        reps.push_back(to_string(r));
    }
    const auto& a = cfg.attack;
    return json{
        {"seed", cfg.seed},
        {"granularity_s", cfg.granularity_s},
        {"impute_k", cfg.impute_k},
        {"background_cap_kb_s", cfg.background_cap_kb_s ? json(*cfg.background_cap_kb_s) : json(nullptr)},
        {"motif", {{"threshold", cfg.motif.threshold}, {"window", cfg.motif.window_half_n}}},
        {"defense", cfg.defense},
        {"attack",
         {{"kind", a.kind == AttackKind::Feature ? "feature" : "image"},
          {"classifier", to_string(a.classifier)},
          {"representations", reps},
          {"image_size", a.image_size},
          {"gaf", {{"gaf_num", a.gaf.gaf_num}, {"granularities", a.gaf.granularities}, {"window_len", a.gaf.window_len}}},
          {"fusion",
           {{"epochs", a.fusion.epochs},
            {"batch", a.fusion.batch},
            {"lr", a.fusion.lr},
            {"weight_decay", a.fusion.weight_decay},
            {"label_smoothing", a.fusion.label_smoothing},
            {"encoder_lr_scale", a.fusion.encoder_lr_scale}}}}},
        {"eval", {{"topk", cfg.eval.topk}, {"knowledge_levels", cfg.eval.knowledge_levels}}},
    };
}

} // namespace trafficbench::cli
