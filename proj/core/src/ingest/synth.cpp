#include "trafficbench/error.hpp"
#include "trafficbench/ingest.hpp"
#include "trafficbench/random.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace trafficbench {

DeviceProfile synth_device_profile(int device_index)
{
    static const DeviceProfile table[] = {
        {"dev0", 80.0, 0.30, 2, 6, 1},
        {"dev1", 35.0, 1.60, 4, 3, 3},
        {"dev2", 120.0, 0.15, 1, 12, 0},
        {"dev3", 55.0, 0.80, 3, 9, 5},
    };
    if (device_index < 0) {
        throw ContractError("device index must be non-negative");
    }
    if (device_index < 4) {
        return table[device_index];
    }
    const int d = device_index;
    DeviceProfile p;
    p.device_id = "dev" + std::to_string(d);
    p.amplitude_in = 30.0 + static_cast<double>((d * 37) % 90);
    p.out_ratio = 0.2 + 0.15 * (d % 9);
    p.ramp_s = 1 + d % 4;
    p.plateau_s = 2 + (d * 5) % 11;
    p.out_lag_s = d % 6;
    return p;
}

std::vector<ActivityTemplate> default_activity_templates()
{
    using D = Direction;
    return {
        {0, {{0, D::In}}},
        {1, {{0, D::In}, {0, D::Out}}},
        {2, {{1, D::Out}}},
        {3, {{1, D::In}}},
        {4, {{2, D::In}}},
        {5, {{3, D::In}}},
        {6, {{3, D::In}, {3, D::Out}}},
        {7, {{2, D::Out}}},
        {8, {{3, D::In}, {2, D::Out}, {3, D::Out}}},
        {9, {{1, D::In}, {1, D::Out}}},
        {10, {{0, D::Out}}},
        {11, {{0, D::In}, {1, D::In}, {0, D::Out}}},
        {12, {{0, D::In}, {1, D::Out}}},
        {13, {{2, D::In}, {2, D::Out}}},
    };
}

namespace {

constexpr double kNoiseProbability = 0.05;
constexpr double kNoiseMax = 0.8;
constexpr double kAmplitudeJitter = 0.15;
constexpr double kPlateauRipple = 0.05;

/// Triangular ramp up, plateau, ramp down. Returns the samples written.
int stamp_burst(std::vector<double>& rates, int onset, double amplitude, int ramp, int plateau, Rng& rng)
{
    int pos = onset;
    auto put = [&](double v) {
        if (pos >= 0 && pos < static_cast<int>(rates.size())) {
            rates[static_cast<std::size_t>(pos)] += v;
        }
        ++pos;
    };
    for (int k = 1; k <= ramp; ++k) {
        put(amplitude * k / (ramp + 1));
    }
    for (int k = 0; k < plateau; ++k) {
        put(amplitude * (1.0 + kPlateauRipple * (2.0 * rng.uniform() - 1.0)));
    }
    for (int k = ramp; k >= 1; --k) {
        put(amplitude * k / (ramp + 1));
    }
    return pos - onset;
}

} // namespace

SynthHome synth_activity_home(std::uint64_t seed,
                              int n_devices,
                              int duration_s,
                              int events_per_activity,
                              const std::vector<ActivityTemplate>& activities)
{
    if (n_devices <= 0 || duration_s <= 0 || events_per_activity <= 0) {
        throw ContractError("synth: all arguments must be positive");
    }
    if (activities.empty()) {
        throw ContractError("synth: no activity templates");
    }
    SynthHome home;
    for (int d = 0; d < n_devices; ++d) {
        home.devices.push_back(synth_device_profile(d));
    }

    int longest = 0;
    std::vector<ActivityInfo> infos;
    for (const auto& a : activities) {
        ActivityInfo info;
        info.activity_id = a.activity_id;
        std::set<int> inbound;
        for (const auto& [dev, dir] : a.members) {
            if (dev < 0 || dev >= n_devices) {
                throw ContractError("synth: activity " + std::to_string(a.activity_id) + " references device " +
                                    std::to_string(dev) + " but only " + std::to_string(n_devices) + " exist");
            }
            info.devices.insert({home.devices[static_cast<std::size_t>(dev)].device_id, dir});
            if (dir == Direction::In) {
                inbound.insert(dev);
            }
        }
        for (const auto& [dev, dir] : a.members) {
            const auto& p = home.devices[static_cast<std::size_t>(dev)];
            const int lag = (dir == Direction::Out && inbound.count(dev)) ? p.out_lag_s : 0;
            // +1 plateau sample of jitter headroom
            longest = std::max(longest, lag + 2 * p.ramp_s + p.plateau_s + 1);
        }
        for (const auto& k : info.devices) {
            info.description += (info.description.empty() ? "" : ", ") + k.first + " (" +
                                (k.second == Direction::In ? "In" : "Out") + ")";
        }
        infos.push_back(std::move(info));
    }
    home.catalog = LabelCatalog(std::move(infos));

    const int total_events = static_cast<int>(activities.size()) * events_per_activity;
    const int slot = duration_s / total_events;
    if (slot < longest + 2) {
        throw ContractError("synth: duration " + std::to_string(duration_s) + " s too short for " +
                            std::to_string(total_events) + " events of up to " + std::to_string(longest) + " s");
    }

    Rng rng(seed);
    std::vector<std::vector<double>> rates(static_cast<std::size_t>(2 * n_devices),
                                           std::vector<double>(static_cast<std::size_t>(duration_s), 0.0));
    for (auto& r : rates) {
        for (double& v : r) {
            if (rng.bernoulli(kNoiseProbability)) {
                v = rng.uniform(0.05, kNoiseMax);
            }
        }
    }

    std::vector<std::size_t> order;
    for (std::size_t a = 0; a < activities.size(); ++a) {
        for (int e = 0; e < events_per_activity; ++e) {
            order.push_back(a);
        }
    }
    rng.shuffle(std::span<std::size_t>(order));

    for (std::size_t s = 0; s < order.size(); ++s) {
        const auto& act = activities[order[s]];
        const int slot_begin = static_cast<int>(s) * slot;
        const int onset = slot_begin + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(slot - longest - 1)));
        const double jitter = 1.0 + kAmplitudeJitter * (2.0 * rng.uniform() - 1.0);
        const int plateau_delta = static_cast<int>(rng.below(3)) - 1;

        std::set<int> inbound;
        for (const auto& [dev, dir] : act.members) {
            if (dir == Direction::In) {
                inbound.insert(dev);
            }
        }
        int end = onset + 1;
        for (const auto& [dev, dir] : act.members) {
            const auto& p = home.devices[static_cast<std::size_t>(dev)];
            const int plateau = std::max(1, p.plateau_s + plateau_delta);
            const bool out = dir == Direction::Out;
            const int lag = (out && inbound.count(dev)) ? p.out_lag_s : 0;
            const double amp = p.amplitude_in * (out ? p.out_ratio : 1.0) * jitter;
            auto& trace = rates[static_cast<std::size_t>(2 * dev + (out ? 1 : 0))];
            const int len = stamp_burst(trace, onset + lag, amp, p.ramp_s, plateau, rng);
            end = std::max(end, onset + lag + len);
        }
        ActivityLabel label;
        label.activity_id = act.activity_id;
        for (const auto& [dev, dir] : act.members) {
            label.device_events.insert({home.devices[static_cast<std::size_t>(dev)].device_id, dir});
        }
        label.start_epoch_s = kSynthStartEpoch + onset;
        label.end_epoch_s = kSynthStartEpoch + end;
        home.labels.push_back(std::move(label));
    }
    std::stable_sort(home.labels.begin(), home.labels.end(),
                     [](const ActivityLabel& a, const ActivityLabel& b) { return a.start_epoch_s < b.start_epoch_s; });

    for (int d = 0; d < n_devices; ++d) {
        for (int o = 0; o < 2; ++o) {
            RateTrace t;
            t.device_id = home.devices[static_cast<std::size_t>(d)].device_id;
            t.direction = o ? Direction::Out : Direction::In;
            t.granularity_s = 1;
            t.start_epoch_s = kSynthStartEpoch;
            t.rates = std::move(rates[static_cast<std::size_t>(2 * d + o)]);
            home.traces.push_back(std::move(t));
        }
    }
    std::sort(home.traces.begin(), home.traces.end(),
              [](const RateTrace& a, const RateTrace& b) { return key_of(a) < key_of(b); });
    return home;
}

SynthHome synth_home(std::uint64_t seed, int n_devices, int duration_s, int events_per_device)
{
    if (n_devices <= 0) {
        throw ContractError("synth: all arguments must be positive");
    }
    std::vector<ActivityTemplate> templates;
    for (int d = 0; d < n_devices; ++d) {
        templates.push_back({d, {{d, Direction::In}, {d, Direction::Out}}});
    }
    return synth_activity_home(seed, n_devices, duration_s, events_per_device, templates);
}

} // namespace trafficbench
