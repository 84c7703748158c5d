#pragma once

#include "trafficbench/eval/metrics.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace trafficbench {

inline constexpr const char* kReportSchema = "trafficbench/1";

/// One row of the per-class table; the aggregate row is labeled "all".
struct ClassRow {
    std::string label;
    std::int64_t support = 0;
    double top1 = 0.0;
    double top5 = 0.0;
    double mcc = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    bool operator==(const ClassRow&) const = default;
};

/// Byte totals across the defended traces.
struct DefenseLedger {
    double genuine_bytes = 0.0;
    double injected_bytes = 0.0;
    double padded_bytes = 0.0;

    bool operator==(const DefenseLedger&) const = default;
};

struct ReportMetadata {
    std::uint64_t seed = 0;
    std::string defense = "identity";
    std::string attack;
    std::vector<std::string> representations;
    std::size_t train_windows = 0;
    std::size_t test_windows = 0;
    double knowledge_level = 0.0;

    bool operator==(const ReportMetadata&) const = default;
};

struct EvalReport {
    double top1 = 0.0;
    double top5 = 0.0;
    PrecisionRecallF1 macro;
    PrecisionRecallF1 weighted;
    double mcc = 0.0;
    std::vector<ClassRow> per_class;
    ClassRow all;
    double epsilon_security = 0.0;
    double overhead_pct = 0.0;
    DefenseLedger ledger;
    ConfusionMatrix confusion;
    ReportMetadata metadata;

    bool operator==(const EvalReport&) const;
};

/// Metrics of ranked predictions against labels over the class catalog.
/// Top-5 uses k = min(5, classes); every ranking must be at least that long.
/// epsilon_security is set to the Top-1 accuracy.
EvalReport evaluate(const std::vector<std::vector<int>>& ranked,
                    const std::vector<int>& labels,
                    const std::vector<int>& classes);

/// Top-1 accuracy of the attack on the defended data.
double epsilon_security(const EvalReport& report);
/// Strongest of several attacks on the same defended data.
double epsilon_security(std::span<const EvalReport> reports);

void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

/// Wall-clock and peak resident memory of the producing process.
struct EnvironmentRecord {
    double wall_seconds = 0.0;
    std::int64_t peak_rss_kb = -1; ///< -1 when unavailable
};

/// Peak RSS of this process so far, or -1.
std::int64_t peak_rss_kb();

/// Fixed-width per-class tables, one block per report.
std::string render_report_table(std::span<const EvalReport> reports);

/// Writes the JSON document to `path` and the text rendering next to it
/// (same stem, ".txt"). The environment record, which differs between runs,
/// goes to a separate "<stem>.env.json" so the report itself is
/// reproducible. Throws ContractError on an empty list and IoError on a
/// write failure.
void emit_report(std::span<const EvalReport> reports,
                 const std::filesystem::path& path,
                 const EnvironmentRecord* environment = nullptr);

/// Parses a document written by emit_report.
std::vector<EvalReport> read_report(const std::filesystem::path& path);

} // namespace trafficbench
