#pragma once

#include "trafficbench/attack/pipeline.hpp"
#include "trafficbench/eval/report.hpp"

#include <vector>

namespace trafficbench {

struct AdversaryConfidenceCurve {
    std::vector<double> levels;
    std::vector<double> mcc;
    std::vector<EvalReport> reports;
};

/// At level q a seeded floor(q * |test|) of the test windows joins the
/// attacker's training set and evaluation runs on the rest; at q = 1 the
/// attacker trains on every test window and is evaluated on all of them.
/// The split and the model seed are those of attack_pipeline, so level 0
/// reproduces the baseline report. Levels must be increasing within [0, 1].
AdversaryConfidenceCurve adversary_confidence_sweep(const Dataset& data,
                                                    const PipelineConfig& cfg,
                                                    const std::vector<double>& levels,
                                                    std::uint64_t seed);

/// Same sweep over an already defended home.
AdversaryConfidenceCurve adversary_confidence_sweep(const Dataset& original,
                                                    const DefendedHome& defended,
                                                    const AttackConfig& attack,
                                                    const std::vector<double>& levels,
                                                    std::uint64_t seed);

/// Least-squares slope of y over x.
double fitted_slope(const std::vector<double>& x, const std::vector<double>& y);

} // namespace trafficbench
