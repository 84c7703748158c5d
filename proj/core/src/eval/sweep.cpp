#include "trafficbench/eval/sweep.hpp"

#include "trafficbench/error.hpp"
#include "trafficbench/random.hpp"

#include <algorithm>
#include <cmath>

namespace trafficbench {

AdversaryConfidenceCurve adversary_confidence_sweep(const Dataset& original,
                                                    const DefendedHome& defended,
                                                    const AttackConfig& attack,
                                                    const std::vector<double>& levels,
                                                    std::uint64_t seed)
{
    if (levels.empty()) {
        throw ContractError("adversary_confidence_sweep: no knowledge levels");
    }
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!(levels[i] >= 0.0 && levels[i] <= 1.0) || (i > 0 && !(levels[i] > levels[i - 1]))) {
            throw ContractError("adversary_confidence_sweep: levels must increase within [0, 1]");
        }
    }
    const auto samples = prepare_samples(original, defended, attack);
    if (samples.classes.size() < 2) {
        throw StageError("extract", "fewer than 2 activity classes survive the motif filter");
    }
    const auto split = split_samples(samples, seed);

    AdversaryConfidenceCurve curve;
    for (std::size_t li = 0; li < levels.size(); ++li) {
        const double q = levels[li];
        std::vector<std::size_t> test = split.test;
        Rng rng(derive_seed(stage_seed(seed, SeedStream::Knowledge), li));
        rng.shuffle(std::span<std::size_t>(test));
        std::vector<std::size_t> train = split.train;
        std::vector<std::size_t> eval;
        if (q >= 1.0) {
            train.insert(train.end(), split.test.begin(), split.test.end());
            eval = split.test;
        } else {
            const auto exposed = static_cast<std::size_t>(std::floor(q * static_cast<double>(test.size())));
            train.insert(train.end(), test.begin(), test.begin() + static_cast<std::ptrdiff_t>(exposed));
            eval.assign(test.begin() + static_cast<std::ptrdiff_t>(exposed), test.end());
            std::sort(eval.begin(), eval.end());
        }
        std::sort(train.begin(), train.end());
        auto res = attack_on_rows(samples, train, split.validation, eval, attack, seed);
        res.report.metadata.defense = defended.defense;
        res.report.ledger = defended.ledger;
        res.report.overhead_pct = defended.overhead_pct;
        res.report.metadata.knowledge_level = q;
        curve.levels.push_back(q);
        curve.mcc.push_back(res.report.mcc);
        curve.reports.push_back(std::move(res.report));
    }
    return curve;
}

AdversaryConfidenceCurve adversary_confidence_sweep(const Dataset& data,
                                                    const PipelineConfig& cfg,
                                                    const std::vector<double>& levels,
                                                    std::uint64_t seed)
{
    const auto defended = defend_home(data, cfg.defense, cfg.bank_motif, seed);
    return adversary_confidence_sweep(data, defended, cfg.attack, levels, seed);
}

double fitted_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2) {
        throw ContractError("fitted_slope: need at least two paired points");
    }
    const auto n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

} // namespace trafficbench
