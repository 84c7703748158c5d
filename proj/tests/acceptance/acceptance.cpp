// Acceptance suite. Prints one PASS/FAIL line per criterion; with a
// criterion name as the argument only that one runs. Exit status is
// nonzero when any criterion fails.
//
//   acceptance [AC1..AC8] [--write-golden]

#include "oracles.hpp"

#include <trafficbench/attack/pipeline.hpp>
#include <trafficbench/error.hpp>
#include <trafficbench/eval/sweep.hpp>
#include <trafficbench/motif.hpp>
#include <trafficbench/random.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

using namespace trafficbench;
namespace fs = std::filesystem;

namespace {

bool g_write_golden = false;

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Relative closeness with an absolute floor of 1 byte-equivalent.
bool close(double a, double b, double tol)
{
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

// ---------------------------------------------------------------------------
// Fixture: 4 devices, 14 synthetic activities, 2 h of 1 s data.

constexpr int kFixtureDevices = 4;
constexpr int kFixtureSeconds = 7200;
constexpr int kFixtureEvents = 16;

Dataset fixture(std::uint64_t seed)
{
    return dataset_from(
        synth_activity_home(seed, kFixtureDevices, kFixtureSeconds, kFixtureEvents, default_activity_templates()));
}

double peak_rate(const Dataset& d)
{
    double peak = 0.0;
    for (const auto& t : d.traces) {
        for (double v : t.rates) {
            peak = std::max(peak, v);
        }
    }
    return peak;
}

const MotifParams kBankMotif{2.0, 30};

DefenseConfig defense_for(DefenseMethod m, const Dataset& d)
{
    DefenseConfig c;
    c.method = m;
    c.bernoulli_p = 0.5;
    switch (m) {
    case DefenseMethod::PTI:
        c.injection_rate_per_hour = 60;
        break;
    case DefenseMethod::RTP:
        c.flatten_threshold_V = peak_rate(d);
        break;
    case DefenseMethod::HTR:
        c.flatten_threshold_V = 40.0;
        c.hmm_states = 3;
        break;
    default:
        break;
    }
    return c;
}

AttackConfig forest_attack()
{
    AttackConfig a;
    a.kind = AttackKind::Feature;
    a.classifier = ClassifierKind::RandomForest;
    a.motif.window_half_n = 15;
    return a;
}

AttackConfig fusion_attack()
{
    AttackConfig a = forest_attack();
    a.kind = AttackKind::Image;
    a.representations = {Representation::LineChart};
    a.image_size = 32;
    a.gaf.granularities = {1, 2, 4, 8};
    a.gaf.window_len = 32;
    a.fusion.epochs = 300;
    a.fusion.batch = 8;
    a.fusion.lr = 0.3;
    a.fusion.encoder_lr_scale = 3.0;
    return a;
}

double home_bytes(const std::vector<RateTrace>& traces)
{
    double s = 0.0;
    for (const auto& t : traces) {
        for (double v : t.rates) {
            s += v * 1000.0 * t.granularity_s;
        }
    }
    return s;
}

// ---------------------------------------------------------------------------

void for_each_matrix(int K, int max_count, const std::function<void(const ConfusionMatrix&)>& f)
{
    std::vector<int> ids;
    for (int k = 0; k < K; ++k) {
        ids.push_back(k);
    }
    ConfusionMatrix cm = make_confusion(ids);
    const int cells = K * K;
    std::vector<int> digits(static_cast<std::size_t>(cells), 0);
    while (true) {
        for (int c = 0; c < cells; ++c) {
            cm.counts[static_cast<std::size_t>(c / K)][static_cast<std::size_t>(c % K)] = digits[static_cast<std::size_t>(c)];
        }
        f(cm);
        int c = 0;
        while (c < cells && digits[static_cast<std::size_t>(c)] == max_count) {
            digits[static_cast<std::size_t>(c)] = 0;
            ++c;
        }
        if (c == cells) {
            return;
        }
        ++digits[static_cast<std::size_t>(c)];
    }
}

Outcome ac1()
{
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::size_t matrices = 0;
    auto track = [&](double a, double b) { worst = std::max(worst, std::abs(a - b)); };
    for (int K : {2, 3}) {
        for_each_matrix(K, 4, [&](const ConfusionMatrix& cm) {
            const auto pairs = oracle::expand(cm.counts);
            const auto macro = precision_recall_f1(cm, Averaging::Macro);
            const auto mref = oracle::macro_prf(pairs);
            const auto weighted = precision_recall_f1(cm, Averaging::Weighted);
            const auto wref = oracle::weighted_prf(pairs);
            track(macro.precision, mref.precision);
            track(macro.recall, mref.recall);
            track(macro.f1, mref.f1);
            track(weighted.precision, wref.precision);
            track(weighted.recall, wref.recall);
            track(weighted.f1, wref.f1);
            track(mcc(cm), oracle::correlation_mcc(pairs));
            if (K == 2) {
                track(mcc_binary(cm.counts[1][1], cm.counts[0][1], cm.counts[1][0], cm.counts[0][0]),
                      oracle::binary_mcc(pairs));
                track(mcc(cm), oracle::binary_mcc(pairs));
            }
            ++matrices;
        });
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-12 && secs < 60.0,
            fmt::format("{} matrices, max deviation {:.3g} (tol 1e-12), {:.1f} s (limit 60 s)", matrices, worst, secs)};
}

Outcome ac2()
{
    const auto t0 = Clock::now();
    Rng rng(2);
    bool symmetric = true;
    bool bounded = true;
    double diag = 0.0;
    double affine = 0.0;
    double identity = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto n = static_cast<std::size_t>(2 + rng.below(127));
        std::vector<double> x(n);
        for (auto& v : x) {
            v = rng.uniform(-100.0, 100.0);
        }
        const auto g = gaf_matrix(x);
        const auto xt = gaf_rescale(x);
        std::vector<double> y(n);
        const double a = rng.uniform(0.01, 100.0);
        const double b = rng.uniform(-1000.0, 1000.0);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = a * x[i] + b;
        }
        const auto gy = gaf_matrix(y);
        for (std::size_t i = 0; i < n; ++i) {
            diag = std::max(diag, std::abs(g(i, i) - (2.0 * xt[i] * xt[i] - 1.0)));
            for (std::size_t j = 0; j < n; ++j) {
                symmetric = symmetric && g(i, j) == g(j, i);
                bounded = bounded && g(i, j) >= -1.0 && g(i, j) <= 1.0;
                identity = std::max(identity, std::abs(g(i, j) - oracle::gaf_entry(xt[i], xt[j])));
                affine = std::max(affine, std::abs(gy(i, j) - g(i, j)));
            }
        }
    }
    const double secs = seconds_since(t0);
    const bool pass = symmetric && bounded && diag <= 1e-12 && affine <= 1e-10 && identity <= 1e-10 && secs < 30.0;
    return {pass,
            fmt::format("symmetric {}, bounded {}, diagonal {:.3g} (1e-12), affine {:.3g} (1e-10), "
                        "identity {:.3g} (1e-10), {:.1f} s (limit 30 s)",
                        symmetric, bounded, diag, affine, identity, secs)};
}

Outcome ac3()
{
    const auto t0 = Clock::now();
    Rng rng(3);
    int mismatches = 0;
    std::size_t motifs = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const auto len = static_cast<std::size_t>(1 + rng.below(1000));
        const bool quantized = trial % 2 == 0;
        RateTrace t;
        t.rates.resize(len);
        for (auto& v : t.rates) {
            v = quantized ? static_cast<double>(rng.below(8)) : rng.uniform(0.0, 10.0);
        }
        const double T = quantized ? static_cast<double>(rng.below(6)) : rng.uniform(0.0, 9.0);
        const int n = 1 + static_cast<int>(rng.below(40));
        const auto got = extract_motifs(t, T, n);
        const auto want = oracle::scan_motifs(t.rates, T, n);
        bool same = got.size() == want.size();
        for (std::size_t i = 0; same && i < got.size(); ++i) {
            same = got[i].center_index == want[i].center && got[i].start_index == want[i].begin &&
                   got[i].end_index() == want[i].end;
        }
        mismatches += same ? 0 : 1;
        motifs += got.size();
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && secs < 60.0,
            fmt::format("500 traces, {} motifs, {} mismatching traces, {:.1f} s (limit 60 s)", motifs, mismatches, secs)};
}

Outcome ac4()
{
    const auto t0 = Clock::now();
    std::map<std::string, int> failures;
    double worst_closure = 0.0;
    for (auto m : {DefenseMethod::PTI, DefenseMethod::RTP, DefenseMethod::HTR}) {
        const std::string name = to_string(m);
        failures[name] = 0;
        for (int run = 0; run < 100; ++run) {
            const auto data = fixture(1000 + static_cast<std::uint64_t>(run));
            const auto cfg = defense_for(m, data);
            const auto a = defend_home(data, cfg, kBankMotif, static_cast<std::uint64_t>(run));
            const auto b = defend_home(data, cfg, kBankMotif, static_cast<std::uint64_t>(run));
            bool ok = a.traces == b.traces && a.ledger == b.ledger;

            const double genuine = home_bytes(data.traces);
            const double total = home_bytes(a.traces);
            const double closure = std::abs(a.ledger.genuine_bytes + a.ledger.injected_bytes + a.ledger.padded_bytes - total) /
                                   std::max(1.0, total);
            worst_closure = std::max(worst_closure, closure);
            ok = ok && closure <= 1e-9 && close(a.ledger.genuine_bytes, genuine, 1e-9);

            if (m == DefenseMethod::HTR) {
                ok = ok && a.ledger.padded_bytes == 0.0 && close(total, genuine + a.ledger.injected_bytes, 1e-9);
            } else {
                for (std::size_t i = 0; ok && i < data.traces.size(); ++i) {
                    for (std::size_t k = 0; ok && k < data.traces[i].size(); ++k) {
                        ok = a.traces[i].rates[k] >= data.traces[i].rates[k];
                    }
                }
            }
            failures[name] += ok ? 0 : 1;
        }
    }
    int total_failures = 0;
    for (const auto& [_, n] : failures) {
        total_failures += n;
    }
    return {total_failures == 0,
            fmt::format("100 runs per method, failing runs pti {} rtp {} htr {}, worst closure {:.3g} (1e-9), {:.1f} s",
                        failures["pti"], failures["rtp"], failures["htr"], worst_closure, seconds_since(t0))};
}

FusionDataset random_images(const std::vector<Representation>& reps, int n, int size, int classes, std::uint64_t seed)
{
    Rng rng(seed);
    FusionDataset d;
    for (auto r : reps) {
        ImageSet set;
        set.representation = r;
        for (int i = 0; i < n; ++i) {
            ImageTensor img(size, size, r);
            for (auto& p : img.pixels) {
                p = static_cast<float>(rng.uniform());
            }
            set.images.push_back(std::move(img));
            set.window_ids.push_back(i);
        }
        d.sets.push_back(std::move(set));
    }
    for (int i = 0; i < n; ++i) {
        d.labels.push_back(i % classes);
    }
    return d;
}

Outcome ac5()
{
    const auto t0 = Clock::now();
    const std::vector<Representation> reps = {Representation::LineChart, Representation::GAF};
    const auto net = build_fusion_net(reps, 4, 64, 51);
    const auto batch = random_images(reps, 2, 64, 4, 52);
    const auto check = gradient_check(net, batch, 1e-5, 53, 256);

    auto single = build_fusion_net({Representation::LineChart}, 5, 64, 54);
    const auto one = random_images({Representation::LineChart}, 1, 64, 5, 55);
    FusionHyper h;
    h.epochs = 200;
    h.batch = 1;
    h.lr = 0.1;
    h.weight_decay = 0.0;
    const auto report = train_fusion(single, one, h, 56);
    const double floor = smoothed_entropy_floor(5, h.label_smoothing);
    const double final_loss = report.epoch_loss.back();

    auto again = build_fusion_net({Representation::LineChart}, 5, 64, 54);
    FusionHyper short_run = h;
    short_run.epochs = 20;
    auto first = build_fusion_net({Representation::LineChart}, 5, 64, 54);
    const auto r1 = train_fusion(first, one, short_run, 57);
    const auto r2 = train_fusion(again, one, short_run, 57);
    const bool deterministic = r1.checksum == r2.checksum && first.params() == again.params();

    const double secs = seconds_since(t0);
    const bool pass = check.max_relative_error <= 1e-4 && check.checked > 0 && final_loss <= floor + 0.05 &&
                      deterministic && secs < 300.0;
    return {pass,
            fmt::format("gradient check {:.3g} over {} params (1e-4), overfit loss {:.4f} vs floor {:.4f} + 0.05 "
                        "after 200 steps, checksum {} {}, {:.1f} s (limit 300 s)",
                        check.max_relative_error, check.checked, final_loss, floor,
                        deterministic ? "stable" : "differs", fmt::format("{:016x}", r1.checksum), secs)};
}

Outcome ac6()
{
    const auto t0 = Clock::now();
    std::vector<double> min_drop;
    std::vector<double> gap;
    std::string per_seed;
    // Homes 300-304 were not used while choosing the attack settings.
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto data = fixture(300 + s);
        const auto base = attack_pipeline(data, identity_defense(data), forest_attack(), s);
        double drop = HUGE_VAL;
        double htr_forest = 0.0;
        DefendedHome htr;
        for (auto m : {DefenseMethod::PTI, DefenseMethod::RTP, DefenseMethod::HTR}) {
            auto defended = defend_home(data, defense_for(m, data), kBankMotif, s);
            const auto r = attack_pipeline(data, defended, forest_attack(), s);
            drop = std::min(drop, base.report.mcc - r.report.mcc);
            if (m == DefenseMethod::HTR) {
                htr_forest = r.report.mcc;
                htr = std::move(defended);
            }
        }
        const auto fused = attack_pipeline(data, htr, fusion_attack(), s);
        min_drop.push_back(drop);
        gap.push_back(fused.report.mcc - htr_forest);
        per_seed += fmt::format(" [{:.3f} {:.3f}]", drop, gap.back());
    }
    const double md = median(min_drop);
    const double mg = median(gap);
    const double secs = seconds_since(t0);
    return {md >= 0.1 && mg >= 0.1 && secs < 900.0,
            fmt::format("median smallest MCC drop {:.3f} (>= 0.1), median fusion-minus-forest MCC on HTR {:.3f} "
                        "(>= 0.1), per seed [drop gap]:{}, {:.1f} s (limit 900 s)",
                        md, mg, per_seed, secs)};
}

Outcome ac7()
{
    const auto t0 = Clock::now();
    const auto data = fixture(100);
    const auto defended = defend_home(data, defense_for(DefenseMethod::HTR, data), kBankMotif, 7);
    AttackConfig knn = forest_attack();
    knn.classifier = ClassifierKind::KNearest;
    knn.classifier_hyper.k_neighbors = 1;
    const std::vector<double> levels = {0.0, 0.25, 0.5, 0.75, 1.0};
    const auto curve = adversary_confidence_sweep(data, defended, knn, levels, 7);
    const double slope = fitted_slope(levels, curve.mcc);
    const double rise = curve.mcc.back() - curve.mcc.front();
    std::string values;
    for (double v : curve.mcc) {
        values += fmt::format(" {:.3f}", v);
    }
    const double secs = seconds_since(t0);
    return {slope > 0.0 && rise >= 0.2 && secs < 300.0,
            fmt::format("MCC by level:{}, slope {:.3f} (> 0), MCC(1) - MCC(0) {:.3f} (>= 0.2), {:.1f} s (limit 300 s)",
                        values, slope, rise, secs)};
}

std::string read_bytes(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Renders the first kept window of the fixture in every representation.
std::vector<ImageTensor> golden_images()
{
    const auto data = fixture(100);
    AttackConfig a = forest_attack();
    a.kind = AttackKind::Image;
    a.image_size = 32;
    a.gaf.granularities = {1, 2, 4, 8};
    a.gaf.window_len = 32;
    const auto samples = prepare_samples(data, identity_defense(data), a);
    std::vector<ImageTensor> out;
    for (const auto& set : samples.images) {
        out.push_back(set.images.at(0));
    }
    return out;
}

Outcome ac8()
{
    const auto t0 = Clock::now();
    const fs::path golden = TRAFFICBENCH_GOLDEN_DIR;
    const auto tmp = fs::temp_directory_path() / "trafficbench_acceptance_ac8";
    fs::remove_all(tmp);
    fs::create_directories(tmp / "a");
    fs::create_directories(tmp / "b");

    int raster_mismatch = 0;
    const auto first = golden_images();
    const auto second = golden_images();
    for (std::size_t i = 0; i < first.size(); ++i) {
        const std::string name = to_string(first[i].representation) + ".ppm";
        export_raster(first[i], tmp / "a" / name);
        export_raster(second[i], tmp / "b" / name);
        if (g_write_golden) {
            fs::create_directories(golden);
            export_raster(first[i], golden / name);
        }
        const auto a = read_bytes(tmp / "a" / name);
        raster_mismatch += a == read_bytes(tmp / "b" / name) && fs::exists(golden / name) &&
                                   a == read_bytes(golden / name)
                               ? 0
                               : 1;
    }

    const auto data = fixture(100);
    const auto defended = defend_home(data, defense_for(DefenseMethod::PTI, data), kBankMotif, 8);
    for (const char* run : {"a", "b"}) {
        const auto r = attack_pipeline(data, defended, forest_attack(), 8);
        emit_report(std::vector<EvalReport>{r.report}, tmp / run / "report.json");
    }
    const bool report_same = read_bytes(tmp / "a" / "report.json") == read_bytes(tmp / "b" / "report.json");
    fs::remove_all(tmp);
    return {raster_mismatch == 0 && report_same,
            fmt::format("{} of {} rasters match golden and rerun, report JSON {}, {:.1f} s",
                        first.size() - static_cast<std::size_t>(raster_mismatch), first.size(),
                        report_same ? "identical" : "differs", seconds_since(t0))};
}

struct Criterion {
    const char* id;
    const char* title;
    Outcome (*run)();
};

const Criterion kCriteria[] = {
    {"AC1", "metric oracle equivalence", ac1},
    {"AC2", "GAF invariants", ac2},
    {"AC3", "motif extraction vs brute force", ac3},
    {"AC4", "defense ledger closure and conservation", ac4},
    {"AC5", "fusion-net numerical validity", ac5},
    {"AC6", "directional defense and image-attack effects", ac6},
    {"AC7", "adversary-confidence monotonicity", ac7},
    {"AC8", "bit-exact artifacts", ac8},
};

} // namespace

int main(int argc, char** argv)
{
    std::string only;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--write-golden") {
            g_write_golden = true;
        } else {
            only = arg;
        }
    }
    int failed = 0;
    int ran = 0;
    for (const auto& c : kCriteria) {
        if (!only.empty() && only != c.id) {
            continue;
        }
        ++ran;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %s %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    if (ran == 0) {
        std::fprintf(stderr, "unknown criterion '%s'\n", only.c_str());
        return 2;
    }
    return failed == 0 ? 0 : 1;
}
