#pragma once

#include <trafficbench/attack/pipeline.hpp>

#include <filesystem>
#include <optional>

namespace trafficbench::cli {

/// Store layout: traces.csv, labels.csv and manifest.json. A defended store
/// also records the defense name and its byte ledger in the manifest.
inline constexpr const char* kStoreSchema = "trafficbench-store/1";

struct IngestOptions {
    int granularity_s = 1;
    int impute_k = 3;
    std::optional<double> background_cap_kb_s;
};

struct IngestStats {
    std::size_t imputed = 0; ///< absent samples filled in, including alignment padding
    std::size_t clipped = 0; ///< samples lowered by the background cap
};

/// Pads every trace with absent samples to the common time span.
std::vector<RateTrace> align_traces(std::vector<RateTrace> traces);

/// Parses a trace CSV and a label CSV, aligns the traces, imputes absent
/// samples and applies the optional background cap. Parse errors name the
/// offending file.
Dataset ingest_csv(const std::filesystem::path& traces_csv,
                   const std::filesystem::path& labels_csv,
                   const IngestOptions& options,
                   IngestStats* stats = nullptr);

struct Store {
    Dataset data;
    std::optional<DefendedHome> defended; ///< data.traces are the defended traces when set
};

void write_store(const std::filesystem::path& dir, const Dataset& data, const DefendedHome* defended = nullptr);
Store read_store(const std::filesystem::path& dir);

/// The store's traffic as a defended home (identity when undefended).
DefendedHome as_defended(const Store& store);

} // namespace trafficbench::cli
