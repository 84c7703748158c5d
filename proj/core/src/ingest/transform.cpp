#include "trafficbench/error.hpp"
#include "trafficbench/ingest.hpp"
#include "trafficbench/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace trafficbench {

RateTrace resample(const RateTrace& trace, int new_granularity_s)
{
    if (new_granularity_s <= 0 || new_granularity_s % trace.granularity_s != 0) {
        throw ContractError("resample: " + std::to_string(new_granularity_s) + " s is not a positive multiple of " +
                            std::to_string(trace.granularity_s) + " s");
    }
    const std::size_t factor = static_cast<std::size_t>(new_granularity_s / trace.granularity_s);
    RateTrace out;
    out.device_id = trace.device_id;
    out.direction = trace.direction;
    out.granularity_s = new_granularity_s;
    out.start_epoch_s = trace.start_epoch_s;
    const std::size_t n = trace.rates.size();
    out.rates.reserve((n + factor - 1) / factor);
    for (std::size_t begin = 0; begin < n; begin += factor) {
        const std::size_t end = std::min(begin + factor, n);
        double sum = 0.0;
        std::size_t present = 0;
        for (std::size_t i = begin; i < end; ++i) {
            if (!is_absent(trace.rates[i])) {
                sum += trace.rates[i];
                ++present;
            }
        }
        if (present == 0) {
            out.rates.push_back(kAbsent);
            continue;
        }
        // Past-the-end samples of a trailing partial bucket count as zeros.
        const std::size_t missing_tail = factor - (end - begin);
        out.rates.push_back(sum / static_cast<double>(present + missing_tail));
    }
    return out;
}

RateTrace impute_knn(const RateTrace& trace, int k)
{
    if (k <= 0) {
        throw ContractError("impute_knn: k must be positive");
    }
    std::vector<std::size_t> present;
    present.reserve(trace.rates.size());
    for (std::size_t i = 0; i < trace.rates.size(); ++i) {
        if (!is_absent(trace.rates[i])) {
            present.push_back(i);
        }
    }
    if (present.size() < static_cast<std::size_t>(k)) {
        throw ContractError("impute_knn: " + std::to_string(present.size()) + " present samples, need at least " +
                            std::to_string(k));
    }
    RateTrace out = trace;
    if (present.size() == trace.rates.size()) {
        return out;
    }
    for (std::size_t i = 0; i < trace.rates.size(); ++i) {
        if (!is_absent(trace.rates[i])) {
            continue;
        }
        // right: first present index > i; left walks down from right - 1.
        auto right = static_cast<std::ptrdiff_t>(std::lower_bound(present.begin(), present.end(), i) - present.begin());
        auto left = right - 1;
        const auto np = static_cast<std::ptrdiff_t>(present.size());
        double sum = 0.0;
        for (int taken = 0; taken < k; ++taken) {
            bool take_left = false;
            if (left < 0) {
                take_left = false;
            } else if (right >= np) {
                take_left = true;
            } else {
                take_left = (i - present[static_cast<std::size_t>(left)]) <= (present[static_cast<std::size_t>(right)] - i);
            }
            if (take_left) {
                sum += trace.rates[present[static_cast<std::size_t>(left--)]];
            } else {
                sum += trace.rates[present[static_cast<std::size_t>(right++)]];
            }
        }
        out.rates[i] = sum / k;
    }
    return out;
}

FilterResult background_filter(const RateTrace& trace, double cap_kb_s)
{
    if (!(cap_kb_s > 0.0)) {
        throw ContractError("background_filter: cap must be positive");
    }
    FilterResult r{trace, 0};
    for (double& v : r.trace.rates) {
        if (!is_absent(v) && v > cap_kb_s) {
            v = cap_kb_s;
            ++r.clipped;
        }
    }
    return r;
}

// ---------------------------------------------------------------------------

namespace {

/// Distributes `total` over weights proportionally, flooring and handing the
/// remainder out by largest fractional part (ties to the lower position),
/// never exceeding caps.
std::vector<std::size_t> apportion(const std::vector<double>& exact,
                                   const std::vector<std::size_t>& caps,
                                   std::size_t total)
{
    std::vector<std::size_t> alloc(exact.size());
    std::size_t used = 0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
        alloc[i] = std::min(caps[i], static_cast<std::size_t>(std::floor(exact[i] + 1e-9)));
        used += alloc[i];
    }
    std::vector<std::size_t> order(exact.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return (exact[a] - alloc[a]) > (exact[b] - alloc[b]);
    });
    while (used < total) {
        bool progressed = false;
        for (std::size_t i : order) {
            if (used == total) {
                break;
            }
            if (alloc[i] < caps[i]) {
                ++alloc[i];
                ++used;
                progressed = true;
            }
        }
        if (!progressed) {
            break;
        }
    }
    return alloc;
}

} // namespace

DatasetSplit split_dataset(std::size_t n_items, std::uint64_t seed, const std::vector<int>* labels, SplitRatios ratios)
{
    if (n_items < 3) {
        throw ContractError("split_dataset: need at least 3 items, got " + std::to_string(n_items));
    }
    if (labels && labels->size() != n_items) {
        throw ContractError("split_dataset: label count does not match item count");
    }
    const auto n_train = static_cast<std::size_t>(std::llround(ratios.train * static_cast<double>(n_items)));
    const auto n_val = static_cast<std::size_t>(std::llround(ratios.validation * static_cast<double>(n_items)));

    DatasetSplit split;
    split.seed = seed;
    Rng rng(seed);

    if (!labels) {
        std::vector<std::size_t> perm(n_items);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(std::span<std::size_t>(perm));
        split.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.validation.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                                perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
        split.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
    } else {
        std::map<int, std::vector<std::size_t>> by_class;
        for (std::size_t i = 0; i < n_items; ++i) {
            by_class[(*labels)[i]].push_back(i);
        }
        std::vector<std::vector<std::size_t>> members;
        for (auto& [label, idx] : by_class) {
            rng.shuffle(std::span<std::size_t>(idx));
            members.push_back(idx);
        }
        const double n = static_cast<double>(n_items);
        std::vector<double> exact_train;
        std::vector<std::size_t> caps;
        for (const auto& m : members) {
            exact_train.push_back(static_cast<double>(m.size()) * static_cast<double>(n_train) / n);
            caps.push_back(m.size());
        }
        const auto train_alloc = apportion(exact_train, caps, n_train);
        std::vector<double> exact_val;
        for (std::size_t c = 0; c < members.size(); ++c) {
            exact_val.push_back(static_cast<double>(members[c].size()) * static_cast<double>(n_val) / n);
            caps[c] = members[c].size() - train_alloc[c];
        }
        const auto val_alloc = apportion(exact_val, caps, n_val);
        for (std::size_t c = 0; c < members.size(); ++c) {
            const auto& m = members[c];
            for (std::size_t j = 0; j < m.size(); ++j) {
                if (j < train_alloc[c]) {
                    split.train.push_back(m[j]);
                } else if (j < train_alloc[c] + val_alloc[c]) {
                    split.validation.push_back(m[j]);
                } else {
                    split.test.push_back(m[j]);
                }
            }
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

} // namespace trafficbench
