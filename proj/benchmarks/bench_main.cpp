#include <trafficbench/attack/classifier.hpp>
#include <trafficbench/attack/fusion_net.hpp>
#include <trafficbench/imaging.hpp>
#include <trafficbench/motif.hpp>
#include <trafficbench/random.hpp>

#include <benchmark/benchmark.h>

using namespace trafficbench;

namespace {

RateTrace bursty_trace(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    RateTrace t;
    t.rates.resize(n);
    for (auto& v : t.rates) {
        v = rng.bernoulli(0.05) ? rng.exponential(0.1) : rng.uniform(0.0, 1.0);
    }
    return t;
}

void BM_ExtractMotifs(benchmark::State& state)
{
    const auto t = bursty_trace(static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(extract_motifs(t, 2.0, 30));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ExtractMotifs)->Arg(3600)->Arg(86400);

void BM_GafMatrix(benchmark::State& state)
{
    const auto t = bursty_trace(static_cast<std::size_t>(state.range(0)), 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(gaf_matrix(t.rates));
    }
}
BENCHMARK(BM_GafMatrix)->Arg(32)->Arg(128);

void BM_GafComposite(benchmark::State& state)
{
    const auto t = bursty_trace(4096, 3);
    GafConfig cfg;
    cfg.granularities = {1, 2, 4, 8};
    cfg.window_len = 32;
    for (auto _ : state) {
        benchmark::DoNotOptimize(encode_gaf_composite(t, 2048, cfg, static_cast<int>(state.range(0))));
    }
}
BENCHMARK(BM_GafComposite)->Arg(64)->Arg(224);

void BM_RandomForestTrain(benchmark::State& state)
{
    Rng rng(4);
    const int n = static_cast<int>(state.range(0));
    Eigen::MatrixXd x(n, 24);
    std::vector<int> y;
    for (int i = 0; i < n; ++i) {
        y.push_back(i % 14);
        for (int f = 0; f < 24; ++f) {
            x(i, f) = rng.normal() + (f % 14 == y.back() ? 2.0 : 0.0);
        }
    }
    ClassifierHyper h;
    h.n_trees = 50;
    for (auto _ : state) {
        benchmark::DoNotOptimize(train_classifier(ClassifierKind::RandomForest, x, y, h, 5));
    }
}
BENCHMARK(BM_RandomForestTrain)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_FusionForward(benchmark::State& state)
{
    const int size = static_cast<int>(state.range(0));
    const std::vector<Representation> reps(kAllRepresentations.begin(), kAllRepresentations.end());
    const auto net = build_fusion_net(reps, 14, size, 6);
    Rng rng(7);
    FusionDataset d;
    for (auto r : reps) {
        ImageSet set;
        set.representation = r;
        ImageTensor img(size, size, r);
        for (auto& p : img.pixels) {
            p = static_cast<float>(rng.uniform());
        }
        set.images.push_back(std::move(img));
        set.window_ids.push_back(0);
        d.sets.push_back(std::move(set));
    }
    d.labels.push_back(0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(net.forward(d, 0));
    }
}
BENCHMARK(BM_FusionForward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
