#include "trafficbench/defense.hpp"

#include "trafficbench/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace trafficbench {

namespace {

using Point = std::array<double, 2>;

double dist2(const Point& a, const Point& b)
{
    return (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]);
}

/// Seeded k-means++ followed by Lloyd iterations. Ties go to the lower
/// cluster index; empty clusters keep their previous center.
std::vector<int> kmeans(const std::vector<Point>& pts, int k, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<Point> centers;
    centers.push_back(pts[rng.below(pts.size())]);
    while (static_cast<int>(centers.size()) < k) {
        std::vector<double> d(pts.size());
        double total = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) {
                best = std::min(best, dist2(pts[i], c));
            }
            d[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double u = rng.uniform() * total;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                u -= d[i];
                if (u < 0.0) {
                    pick = i;
                    break;
                }
                pick = i;
            }
        } else {
            pick = rng.below(pts.size());
        }
        centers.push_back(pts[pick]);
    }

    std::vector<int> assign(pts.size(), -1);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            int best = 0;
            double best_d = dist2(pts[i], centers[0]);
            for (int c = 1; c < k; ++c) {
                const double dc = dist2(pts[i], centers[static_cast<std::size_t>(c)]);
                if (dc < best_d) {
                    best_d = dc;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        if (!changed) {
            break;
        }
        for (int c = 0; c < k; ++c) {
            Point sum{0.0, 0.0};
            int count = 0;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                if (assign[i] == c) {
                    sum[0] += pts[i][0];
                    sum[1] += pts[i][1];
                    ++count;
                }
            }
            if (count > 0) {
                centers[static_cast<std::size_t>(c)] = {sum[0] / count, sum[1] / count};
            }
        }
    }
    return assign;
}

} // namespace

MarkovUserModel fit_markov_model(const std::vector<ActivityLabel>& labels,
                                 const MotifBank& bank,
                                 int n_states,
                                 std::uint64_t seed)
{
    if (n_states < 2) {
        throw ContractError("fit_markov_model: need at least 2 states");
    }
    std::vector<ActivityLabel> seq = labels;
    std::stable_sort(seq.begin(), seq.end(),
                     [](const ActivityLabel& a, const ActivityLabel& b) { return a.start_epoch_s < b.start_epoch_s; });

    std::map<int, std::pair<Point, int>> per_activity; // sums, count
    for (const auto& l : seq) {
        auto& [sum, count] = per_activity[l.activity_id];
        const double hour = static_cast<double>(((l.start_epoch_s % 86400) + 86400) % 86400) / 3600.0;
        sum[0] += hour;
        sum[1] += static_cast<double>(l.end_epoch_s - l.start_epoch_s);
        ++count;
    }
    if (per_activity.size() < 2) {
        throw ContractError("fit_markov_model: need at least 2 distinct activities, got " +
                            std::to_string(per_activity.size()));
    }
    if (static_cast<int>(per_activity.size()) < n_states) {
        throw ContractError("fit_markov_model: " + std::to_string(per_activity.size()) +
                            " distinct activities cannot populate " + std::to_string(n_states) + " states");
    }

    std::vector<int> ids;
    std::vector<Point> pts;
    for (const auto& [id, acc] : per_activity) {
        ids.push_back(id);
        pts.push_back({acc.first[0] / acc.second, acc.first[1] / acc.second});
    }
    for (int dim = 0; dim < 2; ++dim) {
        double mean = 0.0;
        for (const auto& p : pts) {
            mean += p[static_cast<std::size_t>(dim)];
        }
        mean /= static_cast<double>(pts.size());
        double var = 0.0;
        for (const auto& p : pts) {
            var += (p[static_cast<std::size_t>(dim)] - mean) * (p[static_cast<std::size_t>(dim)] - mean);
        }
        const double sd = std::sqrt(var / static_cast<double>(pts.size()));
        for (auto& p : pts) {
            p[static_cast<std::size_t>(dim)] = sd > 0.0 ? (p[static_cast<std::size_t>(dim)] - mean) / sd : 0.0;
        }
    }
    const auto assign = kmeans(pts, n_states, seed);

    MarkovUserModel model;
    model.n_states = n_states;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        model.activity_state[ids[i]] = assign[i];
    }

    const auto S = static_cast<std::size_t>(n_states);
    std::vector<std::vector<double>> counts(S, std::vector<double>(S, 0.0));
    std::vector<double> visits(S, 0.0);
    std::vector<double> dwell_sum(S, 0.0);
    std::vector<double> dwell_count(S, 0.0);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const auto s = static_cast<std::size_t>(model.activity_state.at(seq[i].activity_id));
        visits[s] += 1.0;
        if (i + 1 < seq.size()) {
            const auto t = static_cast<std::size_t>(model.activity_state.at(seq[i + 1].activity_id));
            counts[s][t] += 1.0;
            dwell_sum[s] += static_cast<double>(seq[i + 1].start_epoch_s - seq[i].start_epoch_s);
            dwell_count[s] += 1.0;
        }
    }
    double all_dwell = 0.0;
    double all_count = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
        all_dwell += dwell_sum[s];
        all_count += dwell_count[s];
    }
    const double fallback_dwell = all_count > 0.0 && all_dwell > 0.0 ? all_dwell / all_count : 3600.0;

    model.transition.assign(S, std::vector<double>(S, 0.0));
    model.initial.assign(S, 0.0);
    model.mean_dwell_s.assign(S, fallback_dwell);
    for (std::size_t s = 0; s < S; ++s) {
        double row = 0.0;
        for (std::size_t t = 0; t < S; ++t) {
            row += counts[s][t];
        }
        for (std::size_t t = 0; t < S; ++t) {
            model.transition[s][t] = (counts[s][t] + 1.0) / (row + static_cast<double>(S));
        }
        model.initial[s] = (visits[s] + 1.0) / (static_cast<double>(seq.size()) + static_cast<double>(S));
        if (dwell_count[s] > 0.0 && dwell_sum[s] > 0.0) {
            model.mean_dwell_s[s] = dwell_sum[s] / dwell_count[s];
        }
    }

    model.emissions.assign(S, {});
    for (const auto& m : bank.motifs()) {
        // Labels are sorted by start; find the last one starting at or before the motif center.
        auto it = std::upper_bound(seq.begin(), seq.end(), m.center_epoch_s,
                                   [](std::int64_t t, const ActivityLabel& l) { return t < l.start_epoch_s; });
        while (it != seq.begin()) {
            --it;
            if (m.center_epoch_s < it->end_epoch_s) {
                model.emissions[static_cast<std::size_t>(model.activity_state.at(it->activity_id))].push_back(m);
                break;
            }
            // Windows of different activities may overlap; keep looking a little further back.
            if (m.center_epoch_s - it->start_epoch_s > 86400) {
                break;
            }
        }
    }
    model.fitted = true;
    return model;
}

} // namespace trafficbench
