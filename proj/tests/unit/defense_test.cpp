#include <trafficbench/defense.hpp>
#include <trafficbench/error.hpp>

#include <nlohmann/json.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace trafficbench;

namespace {

double bytes_of(const RateTrace& t)
{
    double s = 0.0;
    for (double v : t.rates) {
        s += v;
    }
    return s * 1000.0 * t.granularity_s;
}

struct Fixture {
    SynthHome home;
    MotifBank bank;
    double peak = 0.0;
};

Fixture fixture(std::uint64_t seed)
{
    Fixture f;
    f.home = synth_activity_home(seed, 4, 3600, 6, default_activity_templates());
    f.bank = build_motif_bank(f.home.traces, 2.0, 30);
    for (const auto& t : f.home.traces) {
        for (double v : t.rates) {
            f.peak = std::max(f.peak, v);
        }
    }
    return f;
}

DefenseConfig config(DefenseMethod m, double peak, std::uint64_t seed)
{
    DefenseConfig c;
    c.method = m;
    c.seed = seed;
    c.bernoulli_p = 0.5;
    c.injection_rate_per_hour = 30;
    c.hmm_states = 3;
    c.flatten_threshold_V = m == DefenseMethod::RTP ? peak : 40.0;
    return c;
}

void expect_ledger_closes(const RateTrace& original, const DefenseOutcome& o)
{
    const double genuine = bytes_of(original);
    const double total = bytes_of(o.reshaped);
    EXPECT_NEAR(o.genuine_bytes, genuine, 1e-9 * std::max(1.0, genuine));
    EXPECT_NEAR(o.genuine_bytes + o.injected_bytes + o.padded_bytes, total, 1e-9 * std::max(1.0, total));
    if (genuine > 0) {
        EXPECT_NEAR(o.overhead_pct, 100.0 * (total - genuine) / genuine, 1e-9 * std::max(1.0, o.overhead_pct));
    }
    EXPECT_NO_THROW(validate_outcome(original, o));
}

} // namespace

TEST(Defense, PtiAndRtpNeverLowerARate)
{
    const auto f = fixture(1);
    for (auto m : {DefenseMethod::PTI, DefenseMethod::RTP}) {
        for (std::size_t i = 0; i < f.home.traces.size(); ++i) {
            const auto& t = f.home.traces[i];
            const auto o = apply_defense(t, config(m, f.peak, 10 + i), {&f.bank, nullptr, nullptr});
            ASSERT_EQ(o.reshaped.size(), t.size());
            for (std::size_t k = 0; k < t.size(); ++k) {
                ASSERT_GE(o.reshaped.rates[k], t.rates[k]) << to_string(m) << " sample " << k;
            }
            expect_ledger_closes(t, o);
        }
    }
}

TEST(Defense, RtpPadsEveryActiveSampleToV)
{
    const auto f = fixture(2);
    const auto& t = f.home.traces[0];
    const auto cfg = config(DefenseMethod::RTP, f.peak, 3);
    const auto o = apply_rtp(t, f.bank, cfg);
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t.rates[k] > 0.0) {
            ASSERT_NEAR(o.reshaped.rates[k], cfg.flatten_threshold_V, 1e-9);
        }
    }
    auto low = cfg;
    low.flatten_threshold_V = f.peak / 2;
    EXPECT_THROW(apply_rtp(t, f.bank, low), ContractError);
}

TEST(Defense, HtrConservesGenuineBytesAndCapsRate)
{
    const auto f = fixture(3);
    const auto model = fit_markov_model(f.home.labels, f.bank, 3, 5);
    for (std::size_t i = 0; i < f.home.traces.size(); ++i) {
        const auto& t = f.home.traces[i];
        const auto cfg = config(DefenseMethod::HTR, f.peak, 20 + i);
        const auto o = apply_htr(t, model, cfg);
        EXPECT_EQ(o.padded_bytes, 0.0);
        const double genuine = bytes_of(t);
        EXPECT_NEAR(bytes_of(o.reshaped), genuine + o.injected_bytes, 1e-9 * (genuine + o.injected_bytes));
        for (std::size_t k = 0; k + 1 < o.reshaped.size(); ++k) {
            ASSERT_LE(o.reshaped.rates[k], cfg.flatten_threshold_V + 1e-12);
        }
        expect_ledger_closes(t, o);
    }
}

TEST(Defense, FlattenBufferedCarriesExcessForward)
{
    const auto y = flatten_buffered({5, 0, 0, 7, 1}, 3);
    EXPECT_EQ(y, (std::vector<double>{3, 2, 0, 3, 5}));
    const auto tail = flatten_buffered({0, 9}, 3);
    EXPECT_EQ(tail, (std::vector<double>{0, 9})); // backlog released at the end
}

TEST(Defense, InjectionSkipsOverlapsAndClipsAtEnd)
{
    RateTrace t;
    t.rates.assign(10, 1.0);
    Motif m;
    m.samples = {2, 2, 2, 2};
    const auto o = inject_motifs(t, {{0, &m, 1.0}, {2, &m, 1.0}, {8, &m, 0.5}});
    ASSERT_EQ(o.injected_windows.size(), 2u);
    EXPECT_EQ(o.injected_windows[0], (IndexRange{0, 4}));
    EXPECT_EQ(o.injected_windows[1], (IndexRange{8, 10}));
    EXPECT_EQ(o.reshaped.rates[8], 2.0);
    EXPECT_NEAR(o.injected_bytes, (8.0 + 2.0) * 1000.0, 1e-9);
    expect_ledger_closes(t, o);
}

TEST(Defense, PoissonScheduleRate)
{
    RateTrace t;
    t.rates.assign(36000, 0.0); // 10 h
    Rng rng(4);
    const auto s = draw_injection_schedule(t, 120.0, 1.0, rng);
    EXPECT_NEAR(static_cast<double>(s.size()), 1200.0, 4 * std::sqrt(1200.0));
    EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
    Rng rng2(4);
    const auto thinned = draw_injection_schedule(t, 120.0, 0.25, rng2);
    EXPECT_NEAR(static_cast<double>(thinned.size()), 300.0, 4 * std::sqrt(300.0));
}

TEST(Defense, RerunsAreIdentical)
{
    const auto f = fixture(5);
    const auto model = fit_markov_model(f.home.labels, f.bank, 3, 1);
    for (auto m : {DefenseMethod::PTI, DefenseMethod::RTP, DefenseMethod::HTR}) {
        const auto cfg = config(m, f.peak, 77);
        const DefenseContext ctx{&f.bank, &model, nullptr};
        const auto a = apply_defense(f.home.traces[1], cfg, ctx);
        const auto b = apply_defense(f.home.traces[1], cfg, ctx);
        EXPECT_EQ(a.reshaped, b.reshaped);
        EXPECT_EQ(a.injected_bytes, b.injected_bytes);
    }
}

TEST(Defense, EmptyBankIsRejected)
{
    RateTrace flat;
    flat.rates.assign(100, 0.5);
    EXPECT_THROW(build_motif_bank({flat}, 2.0, 5), EmptyBankError);
    EXPECT_THROW(apply_pti(flat, MotifBank{}, config(DefenseMethod::PTI, 1.0, 0)), EmptyBankError);
}

TEST(Defense, OverheadConventions)
{
    EXPECT_EQ(overhead_percent(0.0, 0.0), 0.0);
    EXPECT_TRUE(std::isinf(overhead_percent(0.0, 5.0)));
    EXPECT_DOUBLE_EQ(overhead_percent(200.0, 50.0), 25.0);
}

TEST(Defense, ConfigValidationAndJson)
{
    DefenseConfig c = config(DefenseMethod::HTR, 1.0, 9);
    EXPECT_NO_THROW(c.validate());
    const nlohmann::json j = c;
    const auto back = j.get<DefenseConfig>();
    EXPECT_EQ(back.method, c.method);
    EXPECT_EQ(back.flatten_threshold_V, c.flatten_threshold_V);
    EXPECT_EQ(back.hmm_states, c.hmm_states);
    c.bernoulli_p = 1.5;
    EXPECT_THROW(c.validate(), ContractError);
    c = config(DefenseMethod::HTR, 1.0, 9);
    c.hmm_states = 1;
    EXPECT_THROW(c.validate(), ContractError);
    const auto plugin = nlohmann::json{{"method", "identity"}}.get<DefenseConfig>();
    EXPECT_EQ(plugin.method, DefenseMethod::Plugin);
    EXPECT_EQ(plugin.plugin_name, "identity");
}

TEST(Defense, PluginRegistry)
{
    DefenseRegistry reg;
    EXPECT_TRUE(reg.contains("identity"));
    RateTrace t;
    t.rates = {1, 2, 3};
    DefenseConfig cfg;
    cfg.method = DefenseMethod::Plugin;
    cfg.plugin_name = "identity";
    const auto o = reg.apply("identity", t, cfg);
    EXPECT_EQ(o.reshaped, t);
    EXPECT_EQ(o.overhead_pct, 0.0);

    reg.add("double", [](const RateTrace& in, const DefenseConfig&) {
        RateTrace out = in;
        for (auto& v : out.rates) {
            v *= 2;
        }
        return make_outcome(in, out);
    });
    EXPECT_NEAR(reg.apply("double", t, cfg).overhead_pct, 100.0, 1e-12);
    EXPECT_THROW(reg.add("double", [](const RateTrace& in, const DefenseConfig&) { return make_outcome(in, in); }),
                 RegistrationError);
    EXPECT_THROW(reg.add("rtp", [](const RateTrace& in, const DefenseConfig&) { return make_outcome(in, in); }),
                 RegistrationError);

    reg.add("broken", [](const RateTrace& in, const DefenseConfig&) {
        DefenseOutcome o = make_outcome(in, in);
        o.injected_bytes = 1.0; // ledger no longer closes
        return o;
    });
    EXPECT_THROW(reg.apply("broken", t, cfg), ValidationError);
}

TEST(Markov, ModelIsStochasticAndSimulates)
{
    const auto f = fixture(6);
    const auto model = fit_markov_model(f.home.labels, f.bank, 3, 2);
    ASSERT_TRUE(model.fitted);
    ASSERT_EQ(model.n_states, 3);
    for (const auto& row : model.transition) {
        EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-12);
    }
    EXPECT_NEAR(std::accumulate(model.initial.begin(), model.initial.end(), 0.0), 1.0, 1e-12);
    Rng rng(1);
    const auto events = simulate_markov_events(model, 0.0, 36000.0, rng);
    ASSERT_FALSE(events.empty());
    for (std::size_t i = 0; i < events.size(); ++i) {
        EXPECT_GE(events[i].epoch_s, 0.0);
        EXPECT_LT(events[i].epoch_s, 36000.0);
        EXPECT_GE(events[i].state, 0);
        EXPECT_LT(events[i].state, 3);
        if (i > 0) {
            EXPECT_GE(events[i].epoch_s, events[i - 1].epoch_s);
        }
    }
}
