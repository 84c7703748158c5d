#include "trafficbench/defense.hpp"

#include "trafficbench/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace trafficbench {

namespace {

double bytes_per_rate_unit(const RateTrace& t)
{
    return 1000.0 * t.granularity_s;
}

bool close_rel(double a, double b, double tol = 1e-9)
{
    return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

void finalize_ledger(DefenseOutcome& out, const RateTrace& original)
{
    out.genuine_bytes = trace_bytes(original);
    out.overhead_pct = overhead_percent(out.genuine_bytes, out.injected_bytes + out.padded_bytes);
}

void require_complete(const RateTrace& trace, const char* who)
{
    if (trace.has_absent()) {
        throw ContractError(std::string(who) + ": trace has absent samples; impute first");
    }
}

} // namespace

std::string to_string(DefenseMethod m)
{
    switch (m) {
    case DefenseMethod::PTI:
        return "pti";
    case DefenseMethod::RTP:
        return "rtp";
    case DefenseMethod::HTR:
        return "htr";
    case DefenseMethod::Plugin:
        return "plugin";
    }
    return "unknown";
}

DefenseMethod parse_defense_method(const std::string& text)
{
    std::string s = text;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "pti") {
        return DefenseMethod::PTI;
    }
    if (s == "rtp") {
        return DefenseMethod::RTP;
    }
    if (s == "htr") {
        return DefenseMethod::HTR;
    }
    if (s == "plugin") {
        return DefenseMethod::Plugin;
    }
    throw ContractError("unknown defense method '" + text + "'");
}

void DefenseConfig::validate() const
{
    if (!(bernoulli_p >= 0.0 && bernoulli_p <= 1.0)) {
        throw ContractError("defense: bernoulli_p must lie in [0, 1]");
    }
    if (!(injection_rate_per_hour >= 0.0)) {
        throw ContractError("defense: injection rate must be non-negative");
    }
    if (!(flatten_threshold_V > 0.0)) {
        throw ContractError("defense: flatten threshold V must be positive");
    }
    if (hmm_states < 2) {
        throw ContractError("defense: hmm_states must be >= 2");
    }
    if (method == DefenseMethod::Plugin && plugin_name.empty()) {
        throw ContractError("defense: plugin method requires a plugin name");
    }
}

void to_json(nlohmann::json& j, const DefenseConfig& cfg)
{
    j = nlohmann::json{{"method", to_string(cfg.method)},
                       {"flatten_threshold_kb_s", cfg.flatten_threshold_V},
                       {"injection_rate_per_hour", cfg.injection_rate_per_hour},
                       {"bernoulli_p", cfg.bernoulli_p},
                       {"hmm_states", cfg.hmm_states},
                       {"seed", cfg.seed}};
    if (!cfg.plugin_name.empty()) {
        j["plugin"] = cfg.plugin_name;
    }
}

void from_json(const nlohmann::json& j, DefenseConfig& cfg)
{
    DefenseConfig d;
    const auto method = j.value("method", std::string("pti"));
    try {
        d.method = parse_defense_method(method);
    } catch (const ContractError&) {
        // Any other name refers to a registered plugin.
        d.method = DefenseMethod::Plugin;
        d.plugin_name = method;
    }
    if (j.contains("plugin")) {
        d.plugin_name = j.at("plugin").get<std::string>();
    }
    d.flatten_threshold_V = j.value("flatten_threshold_kb_s", d.flatten_threshold_V);
    d.injection_rate_per_hour = j.value("injection_rate_per_hour", d.injection_rate_per_hour);
    d.bernoulli_p = j.value("bernoulli_p", d.bernoulli_p);
    d.hmm_states = j.value("hmm_states", d.hmm_states);
    d.seed = j.value("seed", d.seed);
    cfg = d;
}

// ---------------------------------------------------------------------------

MotifBank::MotifBank(std::vector<Motif> motifs, double threshold, int window_half_n)
    : motifs_(std::move(motifs)), threshold_(threshold), window_half_n_(window_half_n)
{
    for (std::size_t i = 0; i < motifs_.size(); ++i) {
        by_device_[motifs_[i].trace_ref.first].push_back(i);
    }
}

const std::vector<std::size_t>& MotifBank::for_device(const std::string& device_id) const
{
    static const std::vector<std::size_t> none;
    const auto it = by_device_.find(device_id);
    return it == by_device_.end() ? none : it->second;
}

MotifBank build_motif_bank(const std::vector<RateTrace>& traces, double threshold, int window_half_n)
{
    if (traces.empty()) {
        throw ContractError("build_motif_bank: no traces");
    }
    std::vector<Motif> all;
    for (const auto& t : traces) {
        auto m = extract_motifs(t, threshold, window_half_n);
        all.insert(all.end(), std::make_move_iterator(m.begin()), std::make_move_iterator(m.end()));
    }
    if (all.empty()) {
        throw EmptyBankError("build_motif_bank: no motif above threshold " + std::to_string(threshold) +
                             " in " + std::to_string(traces.size()) + " trace(s)");
    }
    return MotifBank(std::move(all), threshold, window_half_n);
}

// ---------------------------------------------------------------------------

double trace_bytes(const RateTrace& trace)
{
    return trace.volume_kb() * 1000.0;
}

double overhead_percent(double genuine_bytes, double added_bytes)
{
    if (genuine_bytes > 0.0) {
        return 100.0 * added_bytes / genuine_bytes;
    }
    return added_bytes == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

DefenseOutcome make_outcome(const RateTrace& original, RateTrace reshaped)
{
    DefenseOutcome out;
    out.injected_bytes = trace_bytes(reshaped) - trace_bytes(original);
    out.reshaped = std::move(reshaped);
    finalize_ledger(out, original);
    return out;
}

void validate_outcome(const RateTrace& original, const DefenseOutcome& outcome)
{
    const auto& r = outcome.reshaped;
    if (r.granularity_s != original.granularity_s || r.start_epoch_s != original.start_epoch_s ||
        r.size() != original.size()) {
        throw ValidationError("defense outcome is not aligned with its input trace");
    }
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (!(r.rates[i] >= 0.0) || !std::isfinite(r.rates[i])) {
            throw ValidationError("defense outcome has invalid rate " + std::to_string(r.rates[i]) + " at sample " +
                                  std::to_string(i));
        }
    }
    std::size_t last_end = 0;
    for (const auto& w : outcome.injected_windows) {
        if (w.begin >= w.end || w.end > r.size() || w.begin < last_end) {
            throw ValidationError("defense outcome has overlapping or out-of-bounds injected windows");
        }
        last_end = w.end;
    }
    const double genuine = trace_bytes(original);
    if (!close_rel(outcome.genuine_bytes, genuine)) {
        throw ValidationError("defense ledger genuine volume does not match the input trace");
    }
    const double added = trace_bytes(r) - genuine;
    if (!close_rel(outcome.injected_bytes + outcome.padded_bytes, added, 1e-9)) {
        throw ValidationError("defense ledger does not close: injected + padded != reshaped - original");
    }
    const double expected = overhead_percent(outcome.genuine_bytes, outcome.injected_bytes + outcome.padded_bytes);
    if (!(std::isinf(expected) && std::isinf(outcome.overhead_pct)) && !close_rel(outcome.overhead_pct, expected)) {
        throw ValidationError("defense ledger overhead does not follow 100*(injected+padded)/genuine");
    }
}

double compute_overhead(const RateTrace& original, const DefenseOutcome& outcome)
{
    const auto& r = outcome.reshaped;
    if (r.granularity_s != original.granularity_s || r.start_epoch_s != original.start_epoch_s ||
        r.size() != original.size()) {
        throw ContractError("compute_overhead: traces are not aligned");
    }
    double sum_o = 0.0;
    double sum_r = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        sum_o += original.rates[i];
        sum_r += r.rates[i];
    }
    const double unit = bytes_per_rate_unit(original);
    return overhead_percent(sum_o * unit, (sum_r - sum_o) * unit);
}

double default_flatten_threshold(const std::vector<RateTrace>& traces)
{
    std::vector<double> all;
    for (const auto& t : traces) {
        for (double v : t.rates) {
            if (!is_absent(v)) {
                all.push_back(v);
            }
        }
    }
    if (all.empty()) {
        throw ContractError("default_flatten_threshold: no samples");
    }
    std::sort(all.begin(), all.end());
    // Linear interpolation between closest ranks.
    const double pos = 0.95 * static_cast<double>(all.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, all.size() - 1);
    const double v = all[lo] + (pos - static_cast<double>(lo)) * (all[hi] - all[lo]);
    return v > 0.0 ? v : 1.0;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> draw_injection_schedule(const RateTrace& trace, double rate_per_hour, double p, Rng& rng)
{
    std::vector<std::size_t> out;
    if (rate_per_hour <= 0.0 || trace.size() == 0) {
        return out;
    }
    const double duration = static_cast<double>(trace.size()) * trace.granularity_s;
    const double rate_per_s = rate_per_hour / 3600.0;
    double t = 0.0;
    while (true) {
        t += rng.exponential(rate_per_s);
        if (t >= duration) {
            break;
        }
        if (rng.bernoulli(p)) {
            out.push_back(static_cast<std::size_t>(t / trace.granularity_s));
        }
    }
    return out;
}

DefenseOutcome inject_motifs(const RateTrace& trace, const std::vector<Placement>& placements)
{
    require_complete(trace, "inject_motifs");
    DefenseOutcome out;
    out.reshaped = trace;
    const double unit = bytes_per_rate_unit(trace);
    std::size_t occupied_until = 0;
    for (const auto& pl : placements) {
        if (!pl.motif || pl.motif->samples.empty() || pl.index >= trace.size()) {
            continue;
        }
        if (!out.injected_windows.empty() && pl.index < occupied_until) {
            continue;
        }
        const std::size_t end = std::min(trace.size(), pl.index + pl.motif->samples.size());
        for (std::size_t i = pl.index; i < end; ++i) {
            const double add = pl.motif->samples[i - pl.index] * pl.scale;
            out.reshaped.rates[i] += add;
            out.injected_bytes += add * unit;
        }
        out.injected_windows.push_back({pl.index, end});
        occupied_until = end;
    }
    finalize_ledger(out, trace);
    return out;
}

DefenseOutcome apply_pti(const RateTrace& trace, const MotifBank& bank, const DefenseConfig& cfg)
{
    cfg.validate();
    if (bank.empty()) {
        throw EmptyBankError("apply_pti: motif bank is empty");
    }
    Rng rng(cfg.seed);
    const auto instants = draw_injection_schedule(trace, cfg.injection_rate_per_hour, cfg.bernoulli_p, rng);
    std::vector<Placement> placements;
    placements.reserve(instants.size());
    for (std::size_t at : instants) {
        placements.push_back({at, &bank[rng.below(bank.size())], 1.0});
    }
    return inject_motifs(trace, placements);
}

// ---------------------------------------------------------------------------

DefenseOutcome apply_rtp(const RateTrace& trace, const MotifBank& bank, const DefenseConfig& cfg)
{
    cfg.validate();
    require_complete(trace, "apply_rtp");
    if (bank.empty()) {
        throw EmptyBankError("apply_rtp: motif bank is empty");
    }
    const double V = cfg.flatten_threshold_V;
    const auto& x = trace.rates;
    const double peak = x.empty() ? 0.0 : *std::max_element(x.begin(), x.end());
    if (V < peak) {
        throw ContractError("apply_rtp: flatten threshold " + std::to_string(V) + " KB/s is below the trace peak " +
                            std::to_string(peak) + " KB/s");
    }
    Rng rng(cfg.seed);
    const double unit = bytes_per_rate_unit(trace);
    DefenseOutcome out;
    out.reshaped = trace;
    auto& y = out.reshaped.rates;

    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0) {
            out.padded_bytes += (V - x[i]) * unit;
            y[i] = V;
        }
    }

    const std::size_t slot = static_cast<std::size_t>(2 * bank.window_half_n() + 1);
    std::size_t i = 0;
    while (i < x.size()) {
        if (x[i] > 0.0) {
            ++i;
            continue;
        }
        std::size_t idle_end = i;
        while (idle_end < x.size() && x[idle_end] == 0.0) {
            ++idle_end;
        }
        for (std::size_t s = i; s + slot <= idle_end; s += slot) {
            if (!rng.bernoulli(cfg.bernoulli_p)) {
                continue;
            }
            const Motif& m = bank[rng.below(bank.size())];
            const double m_peak = *std::max_element(m.samples.begin(), m.samples.end());
            if (!(m_peak > 0.0)) {
                continue;
            }
            const double scale = V / m_peak;
            const std::size_t len = std::min(slot, m.samples.size());
            for (std::size_t k = 0; k < len; ++k) {
                const double fake = m.samples[k] * scale;
                out.injected_bytes += fake * unit;
                out.padded_bytes += (V - fake) * unit;
                y[s + k] = V;
            }
            out.injected_windows.push_back({s, s + len});
        }
        i = idle_end;
    }
    finalize_ledger(out, trace);
    return out;
}

// ---------------------------------------------------------------------------

std::vector<double> flatten_buffered(const std::vector<double>& rates, double cap)
{
    std::vector<double> out(rates.size());
    double backlog = 0.0;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        const double available = rates[i] + backlog;
        out[i] = std::min(available, cap);
        backlog = available - out[i];
    }
    if (!out.empty() && backlog > 0.0) {
        out.back() += backlog;
    }
    return out;
}

std::vector<SimulatedEvent> simulate_markov_events(const MarkovUserModel& model,
                                                   double begin_epoch_s,
                                                   double end_epoch_s,
                                                   Rng& rng)
{
    if (!model.fitted) {
        throw ContractError("simulate_markov_events: model is not fitted");
    }
    auto sample = [&](const std::vector<double>& probs) {
        const double u = rng.uniform();
        double acc = 0.0;
        for (std::size_t k = 0; k < probs.size(); ++k) {
            acc += probs[k];
            if (u < acc) {
                return static_cast<int>(k);
            }
        }
        return static_cast<int>(probs.size() - 1);
    };
    std::vector<SimulatedEvent> events;
    int state = sample(model.initial);
    double t = begin_epoch_s + rng.exponential(1.0 / model.mean_dwell_s[static_cast<std::size_t>(state)]);
    while (t < end_epoch_s) {
        events.push_back({t, state});
        state = sample(model.transition[static_cast<std::size_t>(state)]);
        t += rng.exponential(1.0 / model.mean_dwell_s[static_cast<std::size_t>(state)]);
    }
    return events;
}

DefenseOutcome apply_htr(const RateTrace& trace, const MarkovUserModel& model, const DefenseConfig& cfg)
{
    cfg.validate();
    require_complete(trace, "apply_htr");
    if (!model.fitted) {
        throw ContractError("apply_htr: Markov user model is not fitted");
    }
    Rng rng(cfg.seed);
    const auto events = simulate_markov_events(model, static_cast<double>(trace.start_epoch_s),
                                               static_cast<double>(trace.end_epoch_s()), rng);
    std::vector<const Motif*> any_state;
    for (const auto& e : model.emissions) {
        for (const auto& m : e) {
            any_state.push_back(&m);
        }
    }
    std::vector<Placement> placements;
    for (const auto& ev : events) {
        const bool keep = rng.bernoulli(cfg.bernoulli_p);
        const auto& catalog = model.emissions[static_cast<std::size_t>(ev.state)];
        const Motif* m = nullptr;
        if (!catalog.empty()) {
            m = &catalog[rng.below(catalog.size())];
        } else if (!any_state.empty()) {
            m = any_state[rng.below(any_state.size())];
        }
        if (!keep || !m) {
            continue;
        }
        const auto index =
            static_cast<std::size_t>((ev.epoch_s - static_cast<double>(trace.start_epoch_s)) / trace.granularity_s);
        placements.push_back({index, m, 1.0});
    }
    DefenseOutcome out = inject_motifs(trace, placements);
    out.reshaped.rates = flatten_buffered(out.reshaped.rates, cfg.flatten_threshold_V);
    finalize_ledger(out, trace);
    return out;
}

// ---------------------------------------------------------------------------

DefenseRegistry::DefenseRegistry()
{
    plugins_["identity"] = [](const RateTrace& t, const DefenseConfig&) { return make_outcome(t, t); };
}

void DefenseRegistry::add(const std::string& name, DefensePlugin plugin)
{
    if (name.empty() || !plugin) {
        throw RegistrationError("defense plugin needs a name and a callable");
    }
    if (plugins_.count(name) || name == "pti" || name == "rtp" || name == "htr") {
        throw RegistrationError("defense plugin '" + name + "' is already registered");
    }
    plugins_.emplace(name, std::move(plugin));
}

std::vector<std::string> DefenseRegistry::names() const
{
    std::vector<std::string> out;
    for (const auto& [name, fn] : plugins_) {
        out.push_back(name);
    }
    return out;
}

DefenseOutcome DefenseRegistry::apply(const std::string& name, const RateTrace& trace, const DefenseConfig& cfg) const
{
    const auto it = plugins_.find(name);
    if (it == plugins_.end()) {
        throw ContractError("unknown defense plugin '" + name + "'");
    }
    DefenseOutcome out = it->second(trace, cfg);
    validate_outcome(trace, out);
    return out;
}

DefenseRegistry& default_registry()
{
    static DefenseRegistry registry;
    return registry;
}

void register_defense_plugin(const std::string& name, DefensePlugin plugin)
{
    default_registry().add(name, std::move(plugin));
}

DefenseOutcome apply_defense(const RateTrace& trace, const DefenseConfig& cfg, const DefenseContext& ctx)
{
    switch (cfg.method) {
    case DefenseMethod::PTI:
        if (!ctx.bank) {
            throw EmptyBankError("pti: no motif bank supplied");
        }
        return apply_pti(trace, *ctx.bank, cfg);
    case DefenseMethod::RTP:
        if (!ctx.bank) {
            throw EmptyBankError("rtp: no motif bank supplied");
        }
        return apply_rtp(trace, *ctx.bank, cfg);
    case DefenseMethod::HTR:
        if (!ctx.model) {
            throw ContractError("htr: no Markov user model supplied");
        }
        return apply_htr(trace, *ctx.model, cfg);
    case DefenseMethod::Plugin:
        return (ctx.registry ? *ctx.registry : default_registry()).apply(cfg.plugin_name, trace, cfg);
    }
    throw ContractError("unknown defense method");
}

} // namespace trafficbench
