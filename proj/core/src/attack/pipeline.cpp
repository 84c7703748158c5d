#include "trafficbench/attack/pipeline.hpp"

#include "trafficbench/error.hpp"
#include "trafficbench/random.hpp"

#include <algorithm>
#include <numeric>

namespace trafficbench {

namespace {

template <class F>
auto in_stage(const char* stage, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

std::string defense_name(const DefenseConfig& cfg)
{
    return cfg.method == DefenseMethod::Plugin ? cfg.plugin_name : to_string(cfg.method);
}

std::vector<int> full_ranking(std::vector<int> ranked, const std::vector<int>& classes)
{
    for (int c : classes) {
        if (std::find(ranked.begin(), ranked.end(), c) == ranked.end()) {
            ranked.push_back(c);
        }
    }
    return ranked;
}

} // namespace

Dataset dataset_from(const SynthHome& home)
{
    return {home.traces, home.labels};
}

void require_aligned(const std::vector<RateTrace>& traces)
{
    if (traces.empty()) {
        throw ContractError("dataset has no traces");
    }
    const auto& a = traces.front();
    for (const auto& t : traces) {
        if (t.start_epoch_s != a.start_epoch_s || t.granularity_s != a.granularity_s || t.size() != a.size()) {
            throw ContractError("trace " + t.device_id + ":" + to_string(t.direction) +
                                " is not aligned with " + a.device_id + ":" + to_string(a.direction));
        }
    }
}

std::uint64_t stage_seed(std::uint64_t seed, SeedStream stream)
{
    return derive_seed(seed, static_cast<std::uint64_t>(stream));
}

DefendedHome defend_home(const Dataset& data,
                         const DefenseConfig& cfg,
                         const MotifParams& bank_motif,
                         std::uint64_t seed,
                         const DefenseRegistry* registry)
{
    cfg.validate();
    DefendedHome out;
    out.defense = defense_name(cfg);
    std::optional<MotifBank> bank;
    std::optional<MarkovUserModel> model;
    if (cfg.method != DefenseMethod::Plugin) {
        bank = build_motif_bank(data.traces, bank_motif.threshold, bank_motif.window_half_n);
    }
    if (cfg.method == DefenseMethod::HTR) {
        model = fit_markov_model(data.labels, *bank, cfg.hmm_states, stage_seed(seed, SeedStream::Markov));
    }
    const DefenseContext ctx{bank ? &*bank : nullptr, model ? &*model : nullptr, registry};
    const std::uint64_t base = stage_seed(seed, SeedStream::Defense);
    double added = 0.0;
    for (std::size_t i = 0; i < data.traces.size(); ++i) {
        DefenseConfig c = cfg;
        c.seed = derive_seed(base, i);
        DefenseOutcome o = apply_defense(data.traces[i], c, ctx);
        out.ledger.genuine_bytes += o.genuine_bytes;
        out.ledger.injected_bytes += o.injected_bytes;
        out.ledger.padded_bytes += o.padded_bytes;
        added += o.injected_bytes + o.padded_bytes;
        out.traces.push_back(std::move(o.reshaped));
    }
    out.overhead_pct = overhead_percent(out.ledger.genuine_bytes, added);
    return out;
}

DefendedHome identity_defense(const Dataset& data)
{
    DefendedHome out;
    out.traces = data.traces;
    for (const auto& t : data.traces) {
        out.ledger.genuine_bytes += trace_bytes(t);
    }
    return out;
}

RateTrace aggregate_direction(const std::vector<RateTrace>& traces, Direction direction)
{
    require_aligned(traces);
    RateTrace agg;
    agg.device_id = "home";
    agg.direction = direction;
    agg.granularity_s = traces.front().granularity_s;
    agg.start_epoch_s = traces.front().start_epoch_s;
    agg.rates.assign(traces.front().size(), 0.0);
    for (const auto& t : traces) {
        if (t.direction != direction) {
            continue;
        }
        for (std::size_t i = 0; i < t.size(); ++i) {
            agg.rates[i] += is_absent(t.rates[i]) ? 0.0 : t.rates[i];
        }
    }
    return agg;
}

std::vector<Segment> label_segments(const Dataset& data, int window_half_n)
{
    require_aligned(data.traces);
    if (window_half_n < 1) {
        throw ContractError("label_segments: window_half_n must be >= 1");
    }
    const auto& ref = data.traces.front();
    const auto length = static_cast<std::size_t>(2 * window_half_n + 1);
    if (ref.size() < length) {
        throw ContractError("label_segments: traces are shorter than one window");
    }
    std::vector<Segment> out;
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
        const auto& l = data.labels[i];
        const std::int64_t at = (l.start_epoch_s - ref.start_epoch_s) / ref.granularity_s - window_half_n / 2;
        const auto last = static_cast<std::int64_t>(ref.size() - length);
        Segment s;
        s.label_index = i;
        s.activity_id = l.activity_id;
        s.begin = static_cast<std::size_t>(std::clamp<std::int64_t>(at, 0, last));
        s.length = length;
        out.push_back(s);
    }
    return out;
}

RateTrace slice(const RateTrace& trace, std::size_t begin, std::size_t length)
{
    if (begin + length > trace.size()) {
        throw ContractError("slice: window runs past the trace end");
    }
    RateTrace out;
    out.device_id = trace.device_id;
    out.direction = trace.direction;
    out.granularity_s = trace.granularity_s;
    out.start_epoch_s = trace.start_epoch_s + static_cast<std::int64_t>(begin) * trace.granularity_s;
    out.rates.assign(trace.rates.begin() + static_cast<std::ptrdiff_t>(begin),
                     trace.rates.begin() + static_cast<std::ptrdiff_t>(begin + length));
    return out;
}

std::optional<FeatureVector> dominant_motif_features(const RateTrace& window, const MotifParams& params)
{
    const auto motifs = extract_motifs(window, params.threshold, params.window_half_n);
    const Motif* best = nullptr;
    for (const auto& m : motifs) {
        if (best == nullptr || m.samples[m.center_offset()] > best->samples[best->center_offset()]) {
            best = &m;
        }
    }
    if (best == nullptr) {
        return std::nullopt;
    }
    return compute_features(*best);
}

std::string AttackConfig::name() const
{
    if (kind == AttackKind::Feature) {
        return to_string(classifier);
    }
    return representations.size() == 1 ? "image-" + to_string(representations.front()) : "fusion";
}

ImageSet encode_images(const std::vector<Segment>& segments,
                       const RateTrace& aggregate_in,
                       const RateTrace& aggregate_out,
                       Representation representation,
                       const GafConfig& gaf,
                       int image_size)
{
    ImageSet set;
    set.representation = representation;
    std::optional<RateTrace> total;
    if (representation == Representation::GAF) {
        total = aggregate_in;
        total->direction = Direction::In;
        for (std::size_t i = 0; i < total->size(); ++i) {
            total->rates[i] += aggregate_out.rates[i];
        }
    }
    for (const auto& s : segments) {
        const std::span<const double> in(aggregate_in.rates.data() + s.begin, s.length);
        const std::span<const double> out(aggregate_out.rates.data() + s.begin, s.length);
        switch (representation) {
        case Representation::LineChart:
            set.images.push_back(encode_line_chart({in, out}, image_size));
            break;
        case Representation::HeatMap:
            set.images.push_back(encode_heat_map({in, out}, image_size));
            break;
        case Representation::ScatterPlot:
            set.images.push_back(encode_scatter({in, out}, image_size));
            break;
        case Representation::GAF:
            set.images.push_back(encode_gaf_composite(*total, s.center(), gaf, image_size));
            break;
        }
        set.window_ids.push_back(static_cast<std::int64_t>(s.label_index));
    }
    return set;
}

PreparedSamples prepare_samples(const Dataset& original, const DefendedHome& defended, const AttackConfig& attack)
{
    PreparedSamples out;
    const auto segments = label_segments(original, attack.motif.window_half_n);
    const RateTrace in = aggregate_direction(defended.traces, Direction::In);
    const RateTrace outb = aggregate_direction(defended.traces, Direction::Out);
    std::vector<std::array<double, 2 * kFeatureCount>> rows;
    for (const auto& s : segments) {
        const auto fi = dominant_motif_features(slice(in, s.begin, s.length), attack.motif);
        const auto fo = dominant_motif_features(slice(outb, s.begin, s.length), attack.motif);
        if (!fi && !fo) {
            ++out.dropped;
            continue;
        }
        std::array<double, 2 * kFeatureCount> row{};
        if (fi) {
            const auto a = fi->to_array();
            std::copy(a.begin(), a.end(), row.begin());
        }
        if (fo) {
            const auto a = fo->to_array();
            std::copy(a.begin(), a.end(), row.begin() + kFeatureCount);
        }
        rows.push_back(row);
        out.segments.push_back(s);
        out.labels.push_back(s.activity_id);
    }
    out.features.resize(static_cast<Eigen::Index>(rows.size()), 2 * kFeatureCount);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            out.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    out.classes = out.labels;
    std::sort(out.classes.begin(), out.classes.end());
    out.classes.erase(std::unique(out.classes.begin(), out.classes.end()), out.classes.end());
    if (attack.kind == AttackKind::Image) {
        for (auto r : attack.representations) {
            out.images.push_back(encode_images(out.segments, in, outb, r, attack.gaf, attack.image_size));
        }
    }
    return out;
}

DatasetSplit split_samples(const PreparedSamples& samples, std::uint64_t seed)
{
    return split_dataset(samples.labels.size(), stage_seed(seed, SeedStream::Split), &samples.labels);
}

namespace {

FusionDataset fusion_rows(const PreparedSamples& s, const std::vector<std::size_t>& rows)
{
    FusionDataset d;
    for (const auto& set : s.images) {
        ImageSet sub;
        sub.representation = set.representation;
        for (auto r : rows) {
            sub.images.push_back(set.images[r]);
            sub.window_ids.push_back(set.window_ids[r]);
        }
        d.sets.push_back(std::move(sub));
    }
    for (auto r : rows) {
        d.labels.push_back(static_cast<int>(std::lower_bound(s.classes.begin(), s.classes.end(), s.labels[r]) -
                                            s.classes.begin()));
    }
    return d;
}

} // namespace

PipelineResult attack_on_rows(const PreparedSamples& samples,
                              const std::vector<std::size_t>& train_rows,
                              const std::vector<std::size_t>& validation_rows,
                              const std::vector<std::size_t>& eval_rows,
                              const AttackConfig& attack,
                              std::uint64_t seed)
{
    if (train_rows.empty() || eval_rows.empty()) {
        throw ContractError("attack: empty training or evaluation set");
    }
    PipelineResult res;
    res.eval_rows = eval_rows;
    for (auto r : eval_rows) {
        res.labels.push_back(samples.labels[r]);
    }
    const int K = static_cast<int>(samples.classes.size());
    if (attack.kind == AttackKind::Feature) {
        Eigen::MatrixXd xt(static_cast<Eigen::Index>(train_rows.size()), samples.features.cols());
        std::vector<int> yt;
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
            xt.row(static_cast<Eigen::Index>(i)) = samples.features.row(static_cast<Eigen::Index>(train_rows[i]));
            yt.push_back(samples.labels[train_rows[i]]);
        }
        Eigen::MatrixXd xe(static_cast<Eigen::Index>(eval_rows.size()), samples.features.cols());
        for (std::size_t i = 0; i < eval_rows.size(); ++i) {
            xe.row(static_cast<Eigen::Index>(i)) = samples.features.row(static_cast<Eigen::Index>(eval_rows[i]));
        }
        const auto model = in_stage("train", [&] {
            return train_classifier(attack.classifier, xt, yt, attack.classifier_hyper,
                                    stage_seed(seed, SeedStream::Model));
        });
        const auto ranked = in_stage("predict", [&] {
            return predict_topk(model, xe, static_cast<int>(model.classes().size()));
        });
        for (const auto& r : ranked) {
            res.ranked.push_back(full_ranking(r, samples.classes));
        }
    } else {
        if (samples.images.empty()) {
            throw StageError("encode", "no images were prepared for the image attack");
        }
        const FusionDataset train = fusion_rows(samples, train_rows);
        const FusionDataset val = fusion_rows(samples, validation_rows);
        const FusionDataset test = fusion_rows(samples, eval_rows);
        FusionNet net = in_stage("train", [&] {
            return build_fusion_net(attack.representations, K, attack.image_size,
                                    stage_seed(seed, SeedStream::NetInit));
        });
        res.training = in_stage("train", [&] {
            return train_fusion(net, train, attack.fusion, stage_seed(seed, SeedStream::Train),
                                val.size() > 0 ? &val : nullptr);
        });
        const auto ranked = in_stage("predict", [&] { return rank_classes(net.predict_proba(test), K); });
        for (const auto& r : ranked) {
            std::vector<int> ids;
            for (int c : r) {
                ids.push_back(samples.classes[static_cast<std::size_t>(c)]);
            }
            res.ranked.push_back(std::move(ids));
        }
    }
    res.report = in_stage("evaluate", [&] { return evaluate(res.ranked, res.labels, samples.classes); });
    res.report.metadata.seed = seed;
    res.report.metadata.attack = attack.name();
    if (attack.kind == AttackKind::Image) {
        for (auto r : attack.representations) {
            res.report.metadata.representations.push_back(to_string(r));
        }
    }
    res.report.metadata.train_windows = train_rows.size();
    res.report.metadata.test_windows = eval_rows.size();
    return res;
}

PipelineResult attack_pipeline(const Dataset& original,
                               const DefendedHome& defended,
                               const AttackConfig& attack,
                               std::uint64_t seed)
{
    const auto samples = in_stage("extract", [&] { return prepare_samples(original, defended, attack); });
    if (samples.classes.size() < 2) {
        throw StageError("extract", "fewer than 2 activity classes survive the motif filter");
    }
    const auto split = in_stage("split", [&] { return split_samples(samples, seed); });
    auto res = attack_on_rows(samples, split.train, split.validation, split.test, attack, seed);
    res.report.metadata.defense = defended.defense;
    res.report.ledger = defended.ledger;
    res.report.overhead_pct = defended.overhead_pct;
    return res;
}

PipelineResult run_pipeline(const Dataset& data, const PipelineConfig& cfg, std::uint64_t seed)
{
    const auto defended = in_stage("defend", [&] { return defend_home(data, cfg.defense, cfg.bank_motif, seed); });
    return attack_pipeline(data, defended, cfg.attack, seed);
}

} // namespace trafficbench
