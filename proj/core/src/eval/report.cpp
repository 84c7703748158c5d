#include "trafficbench/eval/report.hpp"

#include "trafficbench/error.hpp"

#include <nlohmann/json.hpp>

#include <sys/resource.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace trafficbench {

bool EvalReport::operator==(const EvalReport& o) const
{
    auto same = [](const PrecisionRecallF1& a, const PrecisionRecallF1& b) {
        return a.precision == b.precision && a.recall == b.recall && a.f1 == b.f1;
    };
    return top1 == o.top1 && top5 == o.top5 && same(macro, o.macro) && same(weighted, o.weighted) && mcc == o.mcc &&
           per_class == o.per_class && all == o.all && epsilon_security == o.epsilon_security &&
           overhead_pct == o.overhead_pct && ledger == o.ledger && confusion == o.confusion &&
           metadata == o.metadata;
}

EvalReport evaluate(const std::vector<std::vector<int>>& ranked,
                    const std::vector<int>& labels,
                    const std::vector<int>& classes)
{
    EvalReport r;
    r.confusion = build_confusion(ranked, labels, classes);
    const auto& cm = r.confusion;
    const int k5 = std::min<int>(5, static_cast<int>(cm.class_count()));
    r.top1 = topk_accuracy(ranked, labels, 1);
    r.top5 = topk_accuracy(ranked, labels, k5);
    r.macro = precision_recall_f1(cm, Averaging::Macro);
    r.weighted = precision_recall_f1(cm, Averaging::Weighted);
    r.mcc = mcc(cm);
    r.epsilon_security = r.top1;
    for (std::size_t c = 0; c < cm.class_count(); ++c) {
        const int id = cm.classes[c];
        std::vector<std::vector<int>> sub_ranked;
        std::vector<int> sub_labels;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == id) {
                sub_ranked.push_back(ranked[i]);
                sub_labels.push_back(id);
            }
        }
        ClassRow row;
        row.label = std::to_string(id);
        row.support = cm.support(c);
        row.top1 = topk_accuracy(sub_ranked, sub_labels, 1);
        row.top5 = topk_accuracy(sub_ranked, sub_labels, k5);
        row.mcc = class_mcc(cm, c);
        const auto prf = class_prf(cm, c);
        row.precision = prf.precision;
        row.recall = prf.recall;
        row.f1 = prf.f1;
        r.per_class.push_back(row);
    }
    r.all.label = "all";
    r.all.support = cm.total();
    r.all.top1 = r.top1;
    r.all.top5 = r.top5;
    r.all.mcc = r.mcc;
    r.all.precision = r.weighted.precision;
    r.all.recall = r.weighted.recall;
    r.all.f1 = r.weighted.f1;
    return r;
}

double epsilon_security(const EvalReport& report)
{
    return report.top1;
}

double epsilon_security(std::span<const EvalReport> reports)
{
    if (reports.empty()) {
        throw ContractError("epsilon_security: no reports");
    }
    double eps = 0.0;
    for (const auto& r : reports) {
        eps = std::max(eps, r.top1);
    }
    return eps;
}

namespace {

// JSON has no infinities; an unbounded overhead is written as a string.
nlohmann::json number(double v)
{
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    if (std::isnan(v)) {
        return "nan";
    }
    return v;
}

double read_number(const nlohmann::json& j)
{
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") {
            return std::numeric_limits<double>::infinity();
        }
        if (s == "-inf") {
            return -std::numeric_limits<double>::infinity();
        }
        return std::numeric_limits<double>::quiet_NaN();
    }
    return j.get<double>();
}

nlohmann::json row_json(const ClassRow& r)
{
    return {{"label", r.label}, {"support", r.support}, {"top1", r.top1}, {"top5", r.top5}, {"mcc", r.mcc},
            {"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}};
}

ClassRow row_from(const nlohmann::json& j)
{
    ClassRow r;
    r.label = j.at("label").get<std::string>();
    r.support = j.at("support").get<std::int64_t>();
    r.top1 = j.at("top1").get<double>();
    r.top5 = j.at("top5").get<double>();
    r.mcc = j.at("mcc").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    return r;
}

nlohmann::json prf_json(const PrecisionRecallF1& p)
{
    return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

PrecisionRecallF1 prf_from(const nlohmann::json& j)
{
    return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
}

std::string fixed(double v, int decimals)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

} // namespace

void to_json(nlohmann::json& j, const EvalReport& r)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.per_class) {
        rows.push_back(row_json(row));
    }
    j = nlohmann::json{
        {"metadata",
         {{"seed", r.metadata.seed},
          {"defense", r.metadata.defense},
          {"attack", r.metadata.attack},
          {"representations", r.metadata.representations},
          {"train_windows", r.metadata.train_windows},
          {"test_windows", r.metadata.test_windows},
          {"knowledge_level", r.metadata.knowledge_level}}},
        {"top1", r.top1},
        {"top5", r.top5},
        {"macro", prf_json(r.macro)},
        {"weighted", prf_json(r.weighted)},
        {"mcc", r.mcc},
        {"epsilon_security", r.epsilon_security},
        {"overhead_pct", number(r.overhead_pct)},
        {"ledger",
         {{"genuine_bytes", r.ledger.genuine_bytes},
          {"injected_bytes", r.ledger.injected_bytes},
          {"padded_bytes", r.ledger.padded_bytes}}},
        {"per_class", rows},
        {"all", row_json(r.all)},
        {"confusion", {{"classes", r.confusion.classes}, {"counts", r.confusion.counts}}},
    };
}

void from_json(const nlohmann::json& j, EvalReport& r)
{
    const auto& m = j.at("metadata");
    r.metadata.seed = m.at("seed").get<std::uint64_t>();
    r.metadata.defense = m.at("defense").get<std::string>();
    r.metadata.attack = m.at("attack").get<std::string>();
    r.metadata.representations = m.at("representations").get<std::vector<std::string>>();
    r.metadata.train_windows = m.at("train_windows").get<std::size_t>();
    r.metadata.test_windows = m.at("test_windows").get<std::size_t>();
    r.metadata.knowledge_level = m.at("knowledge_level").get<double>();
    r.top1 = j.at("top1").get<double>();
    r.top5 = j.at("top5").get<double>();
    r.macro = prf_from(j.at("macro"));
    r.weighted = prf_from(j.at("weighted"));
    r.mcc = j.at("mcc").get<double>();
    r.epsilon_security = j.at("epsilon_security").get<double>();
    r.overhead_pct = read_number(j.at("overhead_pct"));
    const auto& l = j.at("ledger");
    r.ledger.genuine_bytes = l.at("genuine_bytes").get<double>();
    r.ledger.injected_bytes = l.at("injected_bytes").get<double>();
    r.ledger.padded_bytes = l.at("padded_bytes").get<double>();
    r.per_class.clear();
    for (const auto& row : j.at("per_class")) {
        r.per_class.push_back(row_from(row));
    }
    r.all = row_from(j.at("all"));
    r.confusion.classes = j.at("confusion").at("classes").get<std::vector<int>>();
    r.confusion.counts = j.at("confusion").at("counts").get<std::vector<std::vector<std::int64_t>>>();
}

std::int64_t peak_rss_kb()
{
    rusage usage{};
    if (getrusage(RUSAGE_SELF, &usage) != 0) {
        return -1;
    }
    return static_cast<std::int64_t>(usage.ru_maxrss);
}

std::string render_report_table(std::span<const EvalReport> reports)
{
    static const char* headers[] = {"Activity", "Support", "Top 1", "Top 5", "MCC", "Precision", "Recall", "F1 score"};
    std::ostringstream out;
    for (std::size_t n = 0; n < reports.size(); ++n) {
        const auto& r = reports[n];
        if (n > 0) {
            out << '\n';
        }
        out << "defense=" << r.metadata.defense << " attack=" << r.metadata.attack << " seed=" << r.metadata.seed;
        if (!r.metadata.representations.empty()) {
            out << " representations=";
            for (std::size_t i = 0; i < r.metadata.representations.size(); ++i) {
                out << (i ? "+" : "") << r.metadata.representations[i];
            }
        }
        out << " knowledge=" << fixed(r.metadata.knowledge_level, 2) << " overhead_pct=" << fixed(r.overhead_pct, 2)
            << " epsilon=" << fixed(r.epsilon_security, 4) << '\n';

        std::vector<std::vector<std::string>> cells;
        auto add = [&](const ClassRow& row) {
            cells.push_back({row.label, std::to_string(row.support), fixed(row.top1, 4), fixed(row.top5, 4),
                             fixed(row.mcc, 4), fixed(row.precision, 4), fixed(row.recall, 4), fixed(row.f1, 4)});
        };
        for (const auto& row : r.per_class) {
            add(row);
        }
        add(r.all);
        std::vector<std::size_t> width(std::size(headers));
        for (std::size_t c = 0; c < width.size(); ++c) {
            width[c] = std::string(headers[c]).size();
            for (const auto& row : cells) {
                width[c] = std::max(width[c], row[c].size());
            }
        }
        auto line = [&](const std::vector<std::string>& row) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                out << (c ? " | " : "");
                if (c == 0) {
                    out << row[c] << std::string(width[c] - row[c].size(), ' ');
                } else {
                    out << std::string(width[c] - row[c].size(), ' ') << row[c];
                }
            }
            out << '\n';
        };
        line(std::vector<std::string>(std::begin(headers), std::end(headers)));
        std::size_t total = 0;
        for (auto w : width) {
            total += w;
        }
        out << std::string(total + 3 * (width.size() - 1), '-') << '\n';
        for (const auto& row : cells) {
            line(row);
        }
    }
    return out.str();
}

void emit_report(std::span<const EvalReport> reports,
                 const std::filesystem::path& path,
                 const EnvironmentRecord* environment)
{
    if (reports.empty()) {
        throw ContractError("emit_report: no reports to emit");
    }
    nlohmann::json doc;
    doc["schema"] = kReportSchema;
    doc["reports"] = nlohmann::json::array();
    for (const auto& r : reports) {
        doc["reports"].push_back(r);
    }
    auto write = [](const std::filesystem::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError(p.string(), "cannot open for writing");
        }
        out << text;
        if (!out) {
            throw IoError(p.string(), "write failed");
        }
    };
    write(path, doc.dump(2) + "\n");
    auto txt = path;
    txt.replace_extension(".txt");
    write(txt, render_report_table(reports));
    if (environment != nullptr) {
        nlohmann::json env{{"schema", kReportSchema},
                           {"wall_seconds", environment->wall_seconds},
                           {"peak_rss_kb", environment->peak_rss_kb}};
        auto env_path = path;
        env_path.replace_filename(path.stem().string() + ".env.json");
        write(env_path, env.dump(2) + "\n");
    }
}

std::vector<EvalReport> read_report(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError(path.string(), "cannot open for reading");
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    if (doc.value("schema", "") != kReportSchema) {
        throw FormatError(path.string() + ": unsupported report schema");
    }
    std::vector<EvalReport> out;
    for (const auto& r : doc.at("reports")) {
        out.push_back(r.get<EvalReport>());
    }
    return out;
}

} // namespace trafficbench
