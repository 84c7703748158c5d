#include <trafficbench/error.hpp>
#include <trafficbench/eval/report.hpp>
#include <trafficbench/random.hpp>

#include <nlohmann/json.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

using namespace trafficbench;

namespace {

/// Rankings over 14 classes where roughly half the windows are correct.
EvalReport sample_report(std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<int> classes;
    for (int c = 1; c <= 14; ++c) {
        classes.push_back(c);
    }
    std::vector<std::vector<int>> ranked;
    std::vector<int> labels;
    for (int i = 0; i < 140; ++i) {
        const int label = classes[static_cast<std::size_t>(i % 14)];
        auto r = classes;
        rng.shuffle(std::span<int>(r));
        if (rng.bernoulli(0.5)) {
            std::swap(r[0], *std::find(r.begin(), r.end(), label));
        }
        ranked.push_back(r);
        labels.push_back(label);
    }
    auto rep = evaluate(ranked, labels, classes);
    rep.metadata.seed = seed;
    rep.metadata.attack = "feature/random_forest";
    rep.ledger = {1000.0, 250.0, 0.5};
    rep.overhead_pct = 25.05;
    return rep;
}

std::filesystem::path temp_dir(const std::string& name)
{
    auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace

TEST(Report, EvaluateFillsTableAndEpsilon)
{
    const auto r = sample_report(1);
    ASSERT_EQ(r.per_class.size(), 14u);
    EXPECT_EQ(r.all.label, "all");
    EXPECT_EQ(r.all.support, 140);
    EXPECT_DOUBLE_EQ(r.epsilon_security, r.top1);
    EXPECT_DOUBLE_EQ(epsilon_security(r), r.top1);
    EXPECT_GE(r.top5, r.top1);
    std::int64_t support = 0;
    for (const auto& row : r.per_class) {
        support += row.support;
    }
    EXPECT_EQ(support, 140);
}

TEST(Report, EpsilonIsStrongestAttack)
{
    const std::vector<EvalReport> reports = {sample_report(1), sample_report(2), sample_report(3)};
    double best = 0.0;
    for (const auto& r : reports) {
        best = std::max(best, r.top1);
    }
    EXPECT_DOUBLE_EQ(epsilon_security(reports), best);
    EXPECT_THROW(epsilon_security(std::span<const EvalReport>{}), ContractError);
}

TEST(Report, JsonRoundTrip)
{
    const auto r = sample_report(4);
    const nlohmann::json j = r;
    const auto back = j.get<EvalReport>();
    EXPECT_EQ(back, r);
    EXPECT_EQ(nlohmann::json(back).dump(), j.dump());
}

TEST(Report, EmitAndReadBack)
{
    const auto dir = temp_dir("tb_report_test");
    const std::vector<EvalReport> reports = {sample_report(5), sample_report(6)};
    EnvironmentRecord env{1.5, peak_rss_kb()};
    emit_report(reports, dir / "report.json", &env);
    EXPECT_TRUE(std::filesystem::exists(dir / "report.txt"));
    EXPECT_TRUE(std::filesystem::exists(dir / "report.env.json"));
    EXPECT_EQ(read_report(dir / "report.json"), reports);

    std::ifstream txt(dir / "report.txt");
    const std::string text((std::istreambuf_iterator<char>(txt)), std::istreambuf_iterator<char>());
    EXPECT_NE(text.find("all"), std::string::npos);

    // Without the environment the report bytes are unchanged.
    std::ifstream a(dir / "report.json");
    const std::string first((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    emit_report(reports, dir / "again.json");
    std::ifstream b(dir / "again.json");
    const std::string second((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    EXPECT_EQ(first, second);

    EXPECT_THROW(emit_report({}, dir / "empty.json"), ContractError);
    EXPECT_THROW(read_report(dir / "missing.json"), IoError);
    std::filesystem::remove_all(dir);
}

TEST(Report, RenderedTableHasOneLinePerClass)
{
    const std::vector<EvalReport> reports = {sample_report(7)};
    const auto text = render_report_table(reports);
    std::size_t lines = 0;
    for (char c : text) {
        lines += c == '\n';
    }
    EXPECT_GE(lines, 15u);
}
