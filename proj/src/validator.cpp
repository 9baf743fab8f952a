#include <cmath>

#include "davrp/env.hpp"

namespace davrp {

// Deliberately re-derives everything from the raw sequence and the instance:
// its own distances, loads, clock and route splits. Keep it that way — this
// is the cross-check for the incremental masking logic, not a client of it.
std::vector<Violation> validate_solution(const Instance& inst, const std::vector<int>& seq) {
    constexpr double tol = 1e-9;
    std::vector<Violation> out;
    const int n = inst.num_customers();
    const VariantSpec& v = inst.variant;

    if (seq.empty() || seq.front() != 0) {
        out.push_back({0, "sequence must start at the depot"});
        return out;
    }
    for (size_t t = 0; t < seq.size(); ++t)
        if (seq[t] < 0 || seq[t] > n) {
            out.push_back({static_cast<int>(t), "node index out of range"});
            return out;
        }
    for (size_t t = 1; t < seq.size(); ++t)
        if (seq[t] == 0 && seq[t - 1] == 0)
            out.push_back({static_cast<int>(t), "empty route (consecutive depot visits)"});
    if (seq.back() != 0 && !v.open_route)
        out.push_back({static_cast<int>(seq.size()) - 1, "closed route does not end at the depot"});

    std::vector<int> times(n + 1, 0);
    for (int node : seq)
        if (node != 0) ++times[node];
    for (int i = 1; i <= n; ++i) {
        if (times[i] == 0) out.push_back({-1, "customer " + std::to_string(i) + " unvisited"});
        if (times[i] > 1) out.push_back({-1, "customer " + std::to_string(i) + " visited twice"});
    }

    auto dist = [&](int a, int b) {
        return std::hypot(inst.xs[a] - inst.xs[b], inst.ys[a] - inst.ys[b]);
    };

    // Walk the routes. `t0` indexes the depot token that opens each route.
    size_t t0 = 0;
    while (t0 + 1 < seq.size()) {
        size_t t1 = t0 + 1;
        while (t1 < seq.size() && seq[t1] != 0) ++t1;
        const bool returns = t1 < seq.size();  // an explicit closing depot token
        const size_t first = t0 + 1, last = t1 - 1;
        if (first > last) {  // empty segment, already flagged above
            t0 = t1;
            continue;
        }

        long line_load = 0, back_load = 0;
        bool seen_backhaul = false;
        double clock = 0.0, length = 0.0;
        int prev = 0;
        for (size_t t = first; t <= last; ++t) {
            const int c = seq[t];
            const int dem = inst.demands[c];
            if (dem > 0) {
                line_load += dem;
                if (seen_backhaul)
                    out.push_back({static_cast<int>(t), "linehaul after backhaul in route"});
            } else if (dem < 0) {
                back_load += -dem;
                seen_backhaul = true;
            }
            const double leg = dist(prev, c);
            length += leg;
            if (v.time_window) {
                const double arrive = clock + leg;
                if (arrive + inst.service[c] > inst.tw_end[c] + tol)
                    out.push_back({static_cast<int>(t), "time window missed at customer " +
                                                            std::to_string(c)});
                clock = std::max(arrive, inst.tw_start[c]) + inst.service[c];
            } else {
                clock += leg;
            }
            prev = c;
        }
        if (line_load > inst.capacity)
            out.push_back({static_cast<int>(first), "linehaul load exceeds capacity"});
        if (back_load > inst.capacity)
            out.push_back({static_cast<int>(first), "backhaul load exceeds capacity"});
        if (!v.open_route && returns) {
            const double ret = dist(prev, 0);
            length += ret;
            if (v.time_window && clock + ret > kHorizon + tol)
                out.push_back({static_cast<int>(t1), "route exceeds the planning horizon"});
        }
        if (v.duration_limit && length > inst.dist_limit + tol)
            out.push_back({static_cast<int>(first), "route exceeds the distance limit"});
        t0 = returns ? t1 : seq.size();
    }
    return out;
}

}  // namespace davrp
