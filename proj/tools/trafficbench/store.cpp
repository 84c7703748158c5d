#include "store.hpp"

#include <trafficbench/error.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace trafficbench::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ifstream open_in(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(path.string(), "cannot open for reading");
    }
    return in;
}

void write_file(const fs::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) {
        throw IoError(path.string(), "write failed");
    }
}

/// Re-throws parse errors with the file name in front.
template <class F>
auto in_file(const fs::path& path, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

} // namespace

std::vector<RateTrace> align_traces(std::vector<RateTrace> traces)
{
    if (traces.empty()) {
        return traces;
    }
    std::int64_t lo = std::numeric_limits<std::int64_t>::max();
    std::int64_t hi = std::numeric_limits<std::int64_t>::min();
    for (const auto& t : traces) {
        if (t.granularity_s != traces.front().granularity_s) {
            throw ContractError("align_traces: mixed granularities");
        }
        lo = std::min(lo, t.start_epoch_s);
        hi = std::max(hi, t.end_epoch_s());
    }
    const int g = traces.front().granularity_s;
    const auto n = static_cast<std::size_t>((hi - lo) / g);
    for (auto& t : traces) {
        const auto offset = static_cast<std::size_t>((t.start_epoch_s - lo) / g);
        std::vector<double> rates(n, kAbsent);
        std::copy(t.rates.begin(), t.rates.end(), rates.begin() + static_cast<std::ptrdiff_t>(offset));
        t.rates = std::move(rates);
        t.start_epoch_s = lo;
    }
    return traces;
}

Dataset ingest_csv(const fs::path& traces_csv, const fs::path& labels_csv, const IngestOptions& options, IngestStats* stats)
{
    Dataset d;
    {
        auto in = open_in(traces_csv);
        d.traces = in_file(traces_csv, [&] { return parse_trace(in, options.granularity_s); });
    }
    if (d.traces.empty()) {
        throw FormatError(traces_csv.string() + ": no trace rows");
    }
    {
        auto in = open_in(labels_csv);
        d.labels = in_file(labels_csv, [&] { return parse_labels(in); });
    }
    IngestStats s;
    d.traces = align_traces(std::move(d.traces));
    for (auto& t : d.traces) {
        s.imputed += t.absent_count();
        if (t.has_absent()) {
            t = impute_knn(t, options.impute_k);
        }
        if (options.background_cap_kb_s) {
            auto f = background_filter(t, *options.background_cap_kb_s);
            s.clipped += f.clipped;
            t = std::move(f.trace);
        }
    }
    if (stats) {
        *stats = s;
    }
    return d;
}

void write_store(const fs::path& dir, const Dataset& data, const DefendedHome* defended)
{
    require_aligned(data.traces);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError(dir.string(), ec.message());
    }
    std::ostringstream traces;
    serialize_traces(traces, data.traces);
    write_file(dir / "traces.csv", traces.str());
    std::ostringstream labels;
    serialize_labels(labels, data.labels);
    write_file(dir / "labels.csv", labels.str());

    json keys = json::array();
    for (const auto& t : data.traces) {
        keys.push_back({t.device_id, to_string(t.direction)});
    }
    const auto& ref = data.traces.front();
    json manifest{{"schema", kStoreSchema},
                  {"granularity_s", ref.granularity_s},
                  {"start_epoch_s", ref.start_epoch_s},
                  {"samples", ref.size()},
                  {"traces", keys},
                  {"labels", data.labels.size()}};
    if (defended) {
        manifest["defense"] = {{"name", defended->defense},
                               {"genuine_bytes", defended->ledger.genuine_bytes},
                               {"injected_bytes", defended->ledger.injected_bytes},
                               {"padded_bytes", defended->ledger.padded_bytes},
                               {"overhead_pct", std::isfinite(defended->overhead_pct) ? json(defended->overhead_pct) : json("inf")}};
    }
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Store read_store(const fs::path& dir)
{
    const auto manifest_path = dir / "manifest.json";
    json m;
    {
        auto in = open_in(manifest_path);
        try {
            in >> m;
        } catch (const json::exception& e) {
            throw FormatError(manifest_path.string() + ": " + e.what());
        }
    }
    Store s;
    try {
        if (m.at("schema").get<std::string>() != kStoreSchema) {
            throw FormatError(manifest_path.string() + ": unsupported store schema " + m.at("schema").dump());
        }
        const int g = m.at("granularity_s").get<int>();
        const auto start = m.at("start_epoch_s").get<std::int64_t>();
        const auto samples = m.at("samples").get<std::size_t>();
        {
            const auto path = dir / "traces.csv";
            auto in = open_in(path);
            s.data.traces = in_file(path, [&] { return parse_trace(in, g); });
            if (s.data.traces.size() != m.at("traces").size()) {
                throw FormatError(path.string() + ": trace count differs from the manifest");
            }
            for (const auto& t : s.data.traces) {
                if (t.start_epoch_s != start || t.size() != samples || t.has_absent()) {
                    throw FormatError(path.string() + ": trace " + t.device_id + ":" + to_string(t.direction) +
                                      " does not cover the manifest time span");
                }
            }
        }
        {
            const auto path = dir / "labels.csv";
            auto in = open_in(path);
            s.data.labels = in_file(path, [&] { return parse_labels(in); });
        }
        if (m.contains("defense")) {
            const auto& d = m.at("defense");
            DefendedHome h;
            h.defense = d.at("name").get<std::string>();
            h.ledger.genuine_bytes = d.at("genuine_bytes").get<double>();
            h.ledger.injected_bytes = d.at("injected_bytes").get<double>();
            h.ledger.padded_bytes = d.at("padded_bytes").get<double>();
            h.overhead_pct = d.at("overhead_pct").is_number() ? d.at("overhead_pct").get<double>()
                                                               : std::numeric_limits<double>::infinity();
            h.traces = s.data.traces;
            s.defended = std::move(h);
        }
    } catch (const json::exception& e) {
        throw FormatError(manifest_path.string() + ": " + e.what());
    }
    return s;
}

DefendedHome as_defended(const Store& store)
{
    return store.defended ? *store.defended : identity_defense(store.data);
}

} // namespace trafficbench::cli
