#include "commands.hpp"

#include <trafficbench/error.hpp>
#include <trafficbench/eval/sweep.hpp>

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace trafficbench::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError(dir.string(), ec.message());
    }
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        throw IoError(path.string(), "write failed");
    }
}

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void require_path(const fs::path& p, const char* flag)
{
    if (p.empty()) {
        throw ConfigError(std::string(flag) + " is required");
    }
    if (!fs::exists(p)) {
        throw ConfigError(std::string(flag) + ": no such file or directory: " + p.string());
    }
}

MotifParams motif_of(const json& doc)
{
    return doc.contains("motif") ? parse_motif(doc.at("motif")) : MotifParams{};
}

json merged(const json& doc, const char* section, const json& overrides)
{
    json j = doc.value(section, json::object());
    j.merge_patch(overrides);
    return j;
}

AttackConfig attack_of(const GlobalOptions& global, const json& doc, const json& overrides)
{
    AttackConfig a = parse_attack(merged(doc, "attack", overrides), motif_of(doc));
    a.fusion.jobs = global.jobs;
    return a;
}

/// The defended store's traffic against the original store's labels.
struct AttackInputs {
    Dataset original;
    DefendedHome defended;
};

AttackInputs load_attack_inputs(const AttackArgs& args)
{
    require_path(args.store, "--store");
    AttackInputs in;
    Store original = read_store(args.store);
    if (original.defended) {
        throw ConfigError("--store " + args.store.string() + " is a defended store; pass it with --defended");
    }
    in.original = std::move(original.data);
    if (args.defended.empty()) {
        in.defended = identity_defense(in.original);
        return in;
    }
    require_path(args.defended, "--defended");
    Store d = read_store(args.defended);
    in.defended = as_defended(d);
    if (d.data.labels != in.original.labels) {
        throw ConfigError("--defended " + args.defended.string() + " does not carry the labels of " +
                          args.store.string());
    }
    return in;
}

void write_loss_csv(const fs::path& path, const TrainReport& t)
{
    std::ostringstream out;
    out << "epoch,loss,validation_top1\n";
    out << 0 << ',' << num(t.initial_loss) << ",\n";
    for (std::size_t e = 0; e < t.epoch_loss.size(); ++e) {
        out << e + 1 << ',' << num(t.epoch_loss[e]) << ',';
        if (e < t.validation_top1.size()) {
            out << num(t.validation_top1[e]);
        }
        out << '\n';
    }
    write_text(path, out.str());
}

void emit(const std::vector<EvalReport>& reports, const fs::path& path, Clock::time_point t0)
{
    EnvironmentRecord env;
    env.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    env.peak_rss_kb = peak_rss_kb();
    emit_report(reports, path, &env);
}

} // namespace

json load_config_doc(const GlobalOptions& global)
{
    if (global.config.empty()) {
        return json::object();
    }
    std::ifstream in(global.config);
    if (!in) {
        throw ConfigError("--config: cannot open " + global.config.string());
    }
    try {
        json doc = json::parse(in);
        if (!doc.is_object()) {
            throw ConfigError(global.config.string() + ": config must be a JSON object");
        }
        return doc;
    } catch (const json::parse_error& e) {
        throw ConfigError(global.config.string() + ": " + e.what());
    }
}

std::uint64_t resolve_seed(const GlobalOptions& global, const json& doc)
{
    if (global.seed) {
        return *global.seed;
    }
    if (doc.contains("seed") && is_seed_value(doc.at("seed"))) {
        return doc.at("seed").get<std::uint64_t>();
    }
    throw ConfigError("a seed is mandatory: pass --seed or set \"seed\" in the config");
}

void cmd_synth(const GlobalOptions& global, const SynthOptions& options)
{
    const auto seed = resolve_seed(global, load_config_doc(global));
    SynthHome home;
    if (options.kind == "activity") {
        home = synth_activity_home(seed, options.devices, options.duration_s, options.events,
                                   default_activity_templates());
    } else if (options.kind == "device") {
        home = synth_home(seed, options.devices, options.duration_s, options.events);
    } else {
        throw ConfigError("--kind must be 'activity' or 'device'");
    }
    ensure_dir(global.out);
    std::ostringstream traces;
    serialize_traces(traces, home.traces);
    write_text(global.out / "traces.csv", traces.str());
    std::ostringstream labels;
    serialize_labels(labels, home.labels);
    write_text(global.out / "labels.csv", labels.str());
    spdlog::info("synth: {} traces, {} labels -> {}", home.traces.size(), home.labels.size(), global.out.string());
}

IngestStats cmd_ingest(const GlobalOptions& global, const IngestArgs& args)
{
    require_path(args.traces, "--traces");
    require_path(args.labels, "--labels");
    IngestStats stats;
    const Dataset d = ingest_csv(args.traces, args.labels, args.options, &stats);
    write_store(global.out, d);
    spdlog::info("ingest: {} traces x {} samples, {} labels, {} imputed, {} clipped -> {}", d.traces.size(),
                 d.traces.front().size(), d.labels.size(), stats.imputed, stats.clipped, global.out.string());
    return stats;
}

DefendedHome cmd_defend(const GlobalOptions& global, const DefendArgs& args)
{
    const json doc = load_config_doc(global);
    const auto seed = resolve_seed(global, doc);
    const DefenseConfig cfg = parse_defense(merged(doc, "defense", args.overrides));
    require_path(args.store, "--store");
    const Store store = read_store(args.store);
    if (store.defended) {
        throw ConfigError("--store " + args.store.string() + " is already defended");
    }
    DefendedHome h = defend_home(store.data, cfg, motif_of(doc), seed);
    write_store(global.out, {h.traces, store.data.labels}, &h);
    spdlog::info("defend: {} overhead {:.3f}% (genuine {:.0f} B, injected {:.0f} B, padded {:.0f} B) -> {}", h.defense,
                 h.overhead_pct, h.ledger.genuine_bytes, h.ledger.injected_bytes, h.ledger.padded_bytes,
                 global.out.string());
    return h;
}

EncodeSummary cmd_encode(const GlobalOptions& global, const AttackArgs& args)
{
    const json doc = load_config_doc(global);
    json overrides = args.overrides;
    overrides["kind"] = "image";
    const AttackConfig attack = attack_of(global, doc, overrides);
    const AttackInputs in = load_attack_inputs(args);
    const PreparedSamples samples = prepare_samples(in.original, in.defended, attack);

    EncodeSummary s;
    s.kept = samples.segments.size();
    s.dropped = samples.dropped;
    if (s.kept == 0) {
        spdlog::warn("encode: all {} windows dropped (no motif above {} KB/s)", s.dropped, attack.motif.threshold);
    } else if (s.dropped > 0) {
        spdlog::info("encode: dropped {} of {} windows without motifs", s.dropped, s.dropped + s.kept);
    }
    ensure_dir(global.out);
    std::ostringstream index;
    index << "window_id,activity_id,representation,path\n";
    for (const auto& set : samples.images) {
        const std::string rep = to_string(set.representation);
        ensure_dir(global.out / rep);
        for (std::size_t i = 0; i < set.images.size(); ++i) {
            const std::string rel = rep + "/" + std::to_string(set.window_ids[i]) + ".ppm";
            export_raster(set.images[i], global.out / rel);
            index << set.window_ids[i] << ',' << samples.labels[i] << ',' << rep << ',' << rel << '\n';
            ++s.images;
        }
    }
    write_text(global.out / "index.csv", index.str());
    spdlog::info("encode: {} images ({} windows x {} representations) -> {}", s.images, s.kept,
                 samples.images.size(), global.out.string());
    return s;
}

EvalReport cmd_attack(const GlobalOptions& global, const AttackArgs& args)
{
    const auto t0 = Clock::now();
    const json doc = load_config_doc(global);
    const auto seed = resolve_seed(global, doc);
    const AttackConfig attack = attack_of(global, doc, args.overrides);
    const AttackInputs in = load_attack_inputs(args);
    const PipelineResult r = attack_pipeline(in.original, in.defended, attack, seed);
    ensure_dir(global.out);
    if (r.training) {
        write_loss_csv(global.out / "loss.csv", *r.training);
    }
    emit({r.report}, global.out / "report.json", t0);
    spdlog::info("attack: {} on {}: top1 {:.3f} mcc {:.3f} ({} test windows)", r.report.metadata.attack,
                 r.report.metadata.defense, r.report.top1, r.report.mcc, r.report.metadata.test_windows);
    return r.report;
}

double cmd_eval(const GlobalOptions& global, const std::vector<fs::path>& reports)
{
    if (reports.empty()) {
        throw ConfigError("eval: at least one report is required");
    }
    std::vector<EvalReport> all;
    json rows = json::array();
    for (const auto& p : reports) {
        require_path(p, "report");
        for (auto& r : read_report(p)) {
            rows.push_back({{"path", p.string()},
                            {"attack", r.metadata.attack},
                            {"defense", r.metadata.defense},
                            {"knowledge_level", r.metadata.knowledge_level},
                            {"top1", r.top1},
                            {"mcc", r.mcc}});
            all.push_back(std::move(r));
        }
    }
    const double eps = epsilon_security(all);
    std::fputs(render_report_table(all).c_str(), stdout);
    std::printf("epsilon-security (strongest Top-1): %.6f\n", eps);
    ensure_dir(global.out);
    write_text(global.out / "summary.json", json{{"reports", rows}, {"epsilon_security", eps}}.dump(2) + "\n");
    return eps;
}

EvalReport cmd_run(const GlobalOptions& global, bool out_given)
{
    const auto t0 = Clock::now();
    if (global.config.empty()) {
        throw ConfigError("run requires --config");
    }
    ExperimentConfig cfg = load_experiment_config(global.config);
    if (global.seed) {
        cfg.seed = *global.seed;
    }
    if (out_given) {
        cfg.output_dir = global.out;
    }
    cfg.attack.fusion.jobs = global.jobs;

    Dataset data;
    if (!cfg.inputs.store.empty()) {
        Store s = read_store(cfg.inputs.store);
        if (s.defended) {
            throw ConfigError("inputs.store must be an undefended store");
        }
        data = std::move(s.data);
    } else {
        IngestOptions o{cfg.granularity_s, cfg.impute_k, cfg.background_cap_kb_s};
        data = ingest_csv(cfg.inputs.traces, cfg.inputs.labels, o);
    }
    spdlog::info("run: {} traces, {} labels, seed {}", data.traces.size(), data.labels.size(), cfg.seed);

    const DefendedHome defended = defend_home(data, cfg.defense, cfg.motif, cfg.seed);
    spdlog::info("run: defense {} overhead {:.3f}%", defended.defense, defended.overhead_pct);
    const PipelineResult r = attack_pipeline(data, defended, cfg.attack, cfg.seed);
    spdlog::info("run: {} top1 {:.3f} mcc {:.3f}", r.report.metadata.attack, r.report.top1, r.report.mcc);

    ensure_dir(cfg.output_dir);
    std::ostringstream topk;
    topk << "k,accuracy\n";
    for (int k : cfg.eval.topk) {
        if (static_cast<std::size_t>(k) > r.report.confusion.class_count()) {
            throw ConfigError("eval.topk: k=" + std::to_string(k) + " exceeds the " +
                              std::to_string(r.report.confusion.class_count()) + " classes");
        }
        topk << k << ',' << num(topk_accuracy(r.ranked, r.labels, k)) << '\n';
    }
    write_text(cfg.output_dir / "topk.csv", topk.str());
    if (r.training) {
        write_loss_csv(cfg.output_dir / "loss.csv", *r.training);
    }

    std::vector<EvalReport> reports{r.report};
    if (!cfg.eval.knowledge_levels.empty()) {
        const auto curve = adversary_confidence_sweep(data, defended, cfg.attack, cfg.eval.knowledge_levels, cfg.seed);
        std::ostringstream ac;
        ac << "level,mcc,top1\n";
        for (std::size_t i = 0; i < curve.levels.size(); ++i) {
            ac << num(curve.levels[i]) << ',' << num(curve.mcc[i]) << ',' << num(curve.reports[i].top1) << '\n';
            reports.push_back(curve.reports[i]);
        }
        write_text(cfg.output_dir / "ac_curve.csv", ac.str());
        spdlog::info("run: adversary-confidence slope {:.3f}", fitted_slope(curve.levels, curve.mcc));
    }
    write_text(cfg.output_dir / "config.json", describe(cfg).dump(2) + "\n");
    emit(reports, cfg.output_dir / "report.json", t0);
    spdlog::info("run: wrote {}", (cfg.output_dir / "report.json").string());
    return r.report;
}

} // namespace trafficbench::cli
