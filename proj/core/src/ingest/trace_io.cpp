#include "trafficbench/error.hpp"
#include "trafficbench/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace trafficbench {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> out;
    std::size_t begin = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == sep) {
            out.push_back(trim(line.substr(begin, i - begin)));
            begin = i + 1;
        }
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out)
{
    if (s.empty()) {
        return false;
    }
    if (s.front() == '+') {
        s.remove_prefix(1);
    }
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

std::int64_t floor_div(std::int64_t a, std::int64_t b)
{
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) {
        --q;
    }
    return q;
}

std::string join_rows(const std::vector<std::size_t>& rows)
{
    std::ostringstream os;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i == 8 && rows.size() > 9) {
            os << ", ... (" << rows.size() << " total)";
            break;
        }
        os << (i ? ", " : "") << rows[i];
    }
    return os.str();
}

} // namespace

std::string to_string(Direction d)
{
    return d == Direction::In ? "in" : "out";
}

Direction parse_direction(const std::string& text)
{
    if (text == "in" || text == "In" || text == "IN") {
        return Direction::In;
    }
    if (text == "out" || text == "Out" || text == "OUT") {
        return Direction::Out;
    }
    throw FormatError("unknown direction '" + text + "' (expected in|out)");
}

bool is_standard_granularity(int granularity_s) noexcept
{
    return std::find(std::begin(kStandardGranularities), std::end(kStandardGranularities), granularity_s) !=
           std::end(kStandardGranularities);
}

bool RateTrace::has_absent() const noexcept
{
    return std::any_of(rates.begin(), rates.end(), is_absent);
}

std::size_t RateTrace::absent_count() const noexcept
{
    return static_cast<std::size_t>(std::count_if(rates.begin(), rates.end(), is_absent));
}

double RateTrace::volume_kb() const noexcept
{
    double sum = 0.0;
    for (double r : rates) {
        if (!is_absent(r)) {
            sum += r;
        }
    }
    return sum * granularity_s;
}

void RateTrace::validate() const
{
    if (granularity_s <= 0) {
        throw ContractError("granularity must be positive, got " + std::to_string(granularity_s));
    }
    for (std::size_t i = 0; i < rates.size(); ++i) {
        const double r = rates[i];
        if (!is_absent(r) && (r < 0.0 || !std::isfinite(r))) {
            throw ValidationError("trace " + device_id + "/" + to_string(direction) + " sample " +
                                  std::to_string(i) + " has invalid rate " + std::to_string(r));
        }
    }
}

// ---------------------------------------------------------------------------

std::vector<RateTrace> parse_trace(std::istream& csv, int granularity_s)
{
    if (granularity_s <= 0) {
        throw ContractError("granularity must be positive");
    }
    std::string line;
    if (!std::getline(csv, line)) {
        throw FormatError("empty trace CSV (missing header)");
    }
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) {
        line.erase(0, 3); // UTF-8 BOM
    }
    const auto header = split(line, ',');
    const std::vector<std::string_view> expected{"epoch_s", "device_id", "direction", "bytes"};
    if (header != expected) {
        throw FormatError("malformed trace CSV header '" + std::string(trim(line)) +
                          "' (expected epoch_s,device_id,direction,bytes)");
    }

    struct Cell {
        std::int64_t bucket;
        double bytes;
    };
    std::map<TraceKey, std::vector<Cell>> cells;
    std::vector<std::size_t> bad_timestamps;
    std::size_t row = 1;
    while (std::getline(csv, line)) {
        ++row;
        if (trim(line).empty()) {
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 4) {
            throw FormatError("row " + std::to_string(row) + ": expected 4 fields, got " + std::to_string(f.size()));
        }
        std::int64_t epoch = 0;
        if (!parse_number(f[0], epoch)) {
            bad_timestamps.push_back(row);
            continue;
        }
        if (f[1].empty()) {
            throw FormatError("row " + std::to_string(row) + ": empty device_id");
        }
        Direction dir;
        try {
            dir = parse_direction(std::string(f[2]));
        } catch (const FormatError& e) {
            throw FormatError("row " + std::to_string(row) + ": " + e.what());
        }
        double bytes = 0.0;
        if (!parse_number(f[3], bytes) || !std::isfinite(bytes)) {
            throw FormatError("row " + std::to_string(row) + ": unparseable byte count '" + std::string(f[3]) + "'");
        }
        if (bytes < 0.0) {
            throw ValidationError("row " + std::to_string(row) + ": negative byte count " + std::string(f[3]));
        }
        cells[{std::string(f[1]), dir}].push_back({floor_div(epoch, granularity_s), bytes});
    }
    if (!bad_timestamps.empty()) {
        throw FormatError("unparseable timestamp at row(s) " + join_rows(bad_timestamps));
    }

    std::vector<RateTrace> out;
    out.reserve(cells.size());
    for (auto& [key, rows] : cells) {
        std::int64_t lo = rows.front().bucket;
        std::int64_t hi = lo;
        for (const auto& c : rows) {
            lo = std::min(lo, c.bucket);
            hi = std::max(hi, c.bucket);
        }
        RateTrace t;
        t.device_id = key.first;
        t.direction = key.second;
        t.granularity_s = granularity_s;
        t.start_epoch_s = lo * granularity_s;
        t.rates.assign(static_cast<std::size_t>(hi - lo + 1), kAbsent);
        // Summation in bucket-then-input order keeps parsing deterministic.
        std::stable_sort(rows.begin(), rows.end(), [](const Cell& a, const Cell& b) { return a.bucket < b.bucket; });
        std::vector<double> sums(t.rates.size(), 0.0);
        for (const auto& c : rows) {
            const auto i = static_cast<std::size_t>(c.bucket - lo);
            sums[i] += c.bytes;
            t.rates[i] = 0.0;
        }
        const double scale = 1.0 / (1000.0 * granularity_s);
        for (std::size_t i = 0; i < t.rates.size(); ++i) {
            if (!is_absent(t.rates[i])) {
                t.rates[i] = sums[i] * scale;
            }
        }
        out.push_back(std::move(t));
    }
    return out;
}

void serialize_traces(std::ostream& out, const std::vector<RateTrace>& traces)
{
    out << "epoch_s,device_id,direction,bytes\n";
    char buf[64];
    for (const auto& t : traces) {
        const double to_bytes = 1000.0 * t.granularity_s;
        for (std::size_t i = 0; i < t.rates.size(); ++i) {
            if (is_absent(t.rates[i])) {
                continue;
            }
            std::snprintf(buf, sizeof buf, "%.6f", t.rates[i] * to_bytes);
            out << (t.start_epoch_s + static_cast<std::int64_t>(i) * t.granularity_s) << ',' << t.device_id << ','
                << to_string(t.direction) << ',' << buf << '\n';
        }
    }
}

// ---------------------------------------------------------------------------

std::vector<ActivityLabel> parse_labels(std::istream& csv)
{
    std::string line;
    if (!std::getline(csv, line)) {
        throw FormatError("empty label CSV (missing header)");
    }
    const auto header = split(line, ',');
    const std::vector<std::string_view> expected{"activity_id", "start_epoch_s", "end_epoch_s", "device_ids"};
    if (header != expected) {
        throw FormatError("malformed label CSV header '" + std::string(trim(line)) +
                          "' (expected activity_id,start_epoch_s,end_epoch_s,device_ids)");
    }
    std::vector<ActivityLabel> labels;
    std::size_t row = 1;
    while (std::getline(csv, line)) {
        ++row;
        if (trim(line).empty()) {
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 4) {
            throw FormatError("label row " + std::to_string(row) + ": expected 4 fields");
        }
        ActivityLabel l;
        if (!parse_number(f[0], l.activity_id) || !parse_number(f[1], l.start_epoch_s) ||
            !parse_number(f[2], l.end_epoch_s)) {
            throw FormatError("label row " + std::to_string(row) + ": unparseable integer field");
        }
        if (l.end_epoch_s <= l.start_epoch_s) {
            throw ValidationError("label row " + std::to_string(row) + ": empty or inverted window");
        }
        if (!f[3].empty()) {
            for (auto item : split(f[3], ';')) {
                if (item.empty()) {
                    continue;
                }
                const auto colon = item.rfind(':');
                if (colon == std::string_view::npos) {
                    l.device_events.insert({std::string(item), Direction::In});
                    l.device_events.insert({std::string(item), Direction::Out});
                } else {
                    try {
                        l.device_events.insert(
                            {std::string(item.substr(0, colon)), parse_direction(std::string(item.substr(colon + 1)))});
                    } catch (const FormatError& e) {
                        throw FormatError("label row " + std::to_string(row) + ": " + e.what());
                    }
                }
            }
        }
        labels.push_back(std::move(l));
    }
    return labels;
}

void serialize_labels(std::ostream& out, const std::vector<ActivityLabel>& labels)
{
    out << "activity_id,start_epoch_s,end_epoch_s,device_ids\n";
    for (const auto& l : labels) {
        out << l.activity_id << ',' << l.start_epoch_s << ',' << l.end_epoch_s << ',';
        std::map<std::string, int> mask; // bit 0 in, bit 1 out
        for (const auto& [dev, dir] : l.device_events) {
            mask[dev] |= dir == Direction::In ? 1 : 2;
        }
        bool first = true;
        for (const auto& [dev, m] : mask) {
            out << (first ? "" : ";") << dev;
            if (m == 1) {
                out << ":in";
            } else if (m == 2) {
                out << ":out";
            }
            first = false;
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------

LabelCatalog::LabelCatalog(std::vector<ActivityInfo> activities) : activities_(std::move(activities))
{
    for (std::size_t i = 0; i < activities_.size(); ++i) {
        if (!by_id_.emplace(activities_[i].activity_id, i).second) {
            throw ContractError("duplicate activity id " + std::to_string(activities_[i].activity_id));
        }
    }
}

const ActivityInfo& LabelCatalog::at(int activity_id) const
{
    const auto it = by_id_.find(activity_id);
    if (it == by_id_.end()) {
        throw ValidationError("activity id " + std::to_string(activity_id) + " not in label catalog");
    }
    return activities_[it->second];
}

void LabelCatalog::validate(const std::vector<ActivityLabel>& labels) const
{
    std::map<int, std::vector<std::pair<std::int64_t, std::int64_t>>> windows;
    for (const auto& l : labels) {
        at(l.activity_id);
        windows[l.activity_id].emplace_back(l.start_epoch_s, l.end_epoch_s);
    }
    for (auto& [id, w] : windows) {
        std::sort(w.begin(), w.end());
        for (std::size_t i = 1; i < w.size(); ++i) {
            if (w[i].first < w[i - 1].second) {
                throw ValidationError("activity " + std::to_string(id) + " has overlapping windows at epoch " +
                                      std::to_string(w[i].first));
            }
        }
    }
}

const std::vector<ReferenceActivity>& unsw_reference_activities()
{
    static const std::vector<ReferenceActivity> table = {
        {0, {{"InsteonCam", Direction::In}}, 2616},
        {1, {{"Amazon", Direction::In}, {"Amazon", Direction::Out}}, 956},
        {2, {{"BabyMonitor", Direction::Out}}, 844},
        {3, {{"Amazon", Direction::In}}, 711},
        {4, {{"PhotoFrame", Direction::In}}, 689},
        {5, {{"TPLinkCam", Direction::In}}, 484},
        {6, {{"TPLinkCam", Direction::In}, {"TPLinkCam", Direction::Out}}, 376},
        {7, {{"DropCam", Direction::Out}}, 298},
        {8, {{"TPLinkCam", Direction::In}, {"DropCam", Direction::Out}, {"TPLinkCam", Direction::Out}}, 228},
        {9, {{"SleepSensor", Direction::Out}}, 163},
        {10, {{"BelkinPlug", Direction::In}}, 139},
        {11, {{"Amazon", Direction::In}, {"InsteonCam", Direction::In}, {"Amazon", Direction::Out}}, 126},
        {12, {{"InsteonCam", Direction::In}, {"BabyMonitor", Direction::Out}}, 117},
        {13, {{"BabyMonitor", Direction::In}}, 116},
    };
    return table;
}

LabelCatalog unsw_activity_catalog()
{
    std::vector<ActivityInfo> infos;
    for (const auto& ref : unsw_reference_activities()) {
        ActivityInfo info;
        info.activity_id = ref.activity_id;
        std::string desc;
        for (const auto& k : ref.devices) {
            info.devices.insert(k);
            desc += (desc.empty() ? "" : ", ") + k.first + " (" + (k.second == Direction::In ? "In" : "Out") + ")";
        }
        info.description = desc;
        infos.push_back(std::move(info));
    }
    return LabelCatalog(std::move(infos));
}

} // namespace trafficbench
