#include "davrp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace davrp {

namespace {
constexpr double kTol = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

std::optional<double> route_eval(const Problem& p, const int* customers, int len) {
    const Instance& inst = p.inst;
    const VariantSpec& v = inst.variant;
    long line = 0, back = 0;
    bool seen_back = false;
    double clock = 0.0, length = 0.0;
    int prev = 0;
    for (int i = 0; i < len; ++i) {
        const int c = customers[i];
        const int dem = inst.demands[c];
        if (dem > 0) {
            if (seen_back) return std::nullopt;  // linehaul after backhaul
            line += dem;
        } else if (dem < 0) {
            back += -dem;
            seen_back = true;
        }
        const double leg = p.dist(prev, c);
        length += leg;
        if (v.time_window) {
            const double arrive = clock + leg;
            if (arrive + inst.service[c] > inst.tw_end[c] + kTol) return std::nullopt;
            clock = std::max(arrive, inst.tw_start[c]) + inst.service[c];
        }
        prev = c;
    }
    if (line > inst.capacity || back > inst.capacity) return std::nullopt;
    if (!v.open_route) {
        const double ret = p.dist(prev, 0);
        length += ret;
        if (v.time_window && clock + ret > kHorizon + kTol) return std::nullopt;
    }
    if (v.duration_limit && length > inst.dist_limit + kTol) return std::nullopt;
    return length;
}

ExactResult exact_solve(const Problem& p) {
    const int n = p.inst.num_customers();
    if (n > 8) throw std::invalid_argument("exact_solve supports up to 8 customers");
    ExactResult res;
    if (n == 0) {
        res.solution = make_solution({0}, p);
        return res;
    }

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 1);
    double best_cost = kInf;
    std::vector<int> best_seq;

    std::vector<double> dp(n + 1);
    std::vector<int> cut(n + 1);
    do {
        dp[0] = 0.0;
        for (int j = 1; j <= n; ++j) {
            dp[j] = kInf;
            cut[j] = -1;
            for (int i = 0; i < j; ++i) {
                if (dp[i] == kInf) continue;
                ++res.routes_checked;
                auto c = route_eval(p, perm.data() + i, j - i);
                if (c && dp[i] + *c < dp[j]) {
                    dp[j] = dp[i] + *c;
                    cut[j] = i;
                }
            }
        }
        if (dp[n] < best_cost) {
            best_cost = dp[n];
            // Recover the split points and materialize the visit sequence.
            std::vector<int> bounds;
            for (int j = n; j > 0; j = cut[j]) bounds.push_back(j);
            std::reverse(bounds.begin(), bounds.end());
            best_seq = {0};
            int i = 0;
            for (int b : bounds) {
                for (; i < b; ++i) best_seq.push_back(perm[i]);
                best_seq.push_back(0);
            }
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    if (best_cost == kInf) {
        res.feasible = false;
        res.solution = Solution{};
        return res;
    }
    res.solution = make_solution(best_seq, p);
    return res;
}

Solution nn_construct(const Problem& p) {
    State st = reset(p, 1)[0];
    const int n = p.inst.num_customers();
    while (!st.done) {
        ActionMask m = feasible_actions(st, p);
        int best = -1;
        double bd = kInf;
        for (int a = 1; a <= n; ++a)
            if (m.feasible[a] && p.dist(st.last_node, a) < bd) {
                bd = p.dist(st.last_node, a);
                best = a;
            }
        if (best >= 0)
            step(st, best, p);
        else if (m.feasible[0])
            step(st, 0, p);
        else
            throw std::runtime_error("nearest-neighbor construction is stuck");
    }
    return make_solution(st.sequence, p);
}

Solution two_opt(const Solution& start, const Problem& p) {
    const bool open = p.inst.variant.open_route;
    std::vector<std::vector<int>> routes;  // customers only
    for (const auto& r : decompose_routes(start.sequence, open)) {
        std::vector<int> cust(r.begin() + 1, open ? r.end() : r.end() - 1);
        routes.push_back(std::move(cust));
    }

    const long long cap = 10LL * std::max(1, p.inst.num_customers());
    long long accepted = 0;
    bool improved = true;
    while (improved && accepted < cap) {
        improved = false;
        for (auto& route : routes) {
            const int m = static_cast<int>(route.size());
            if (m < 2) continue;
            auto cur = route_eval(p, route.data(), m);
            if (!cur) throw std::logic_error("two_opt: invalid incumbent route");
            for (int i = 0; i < m - 1 && !improved; ++i)
                for (int j = i + 1; j < m && !improved; ++j) {
                    std::reverse(route.begin() + i, route.begin() + j + 1);
                    auto cand = route_eval(p, route.data(), m);
                    if (cand && *cand < *cur - 1e-12) {
                        improved = true;
                        ++accepted;
                    } else {
                        std::reverse(route.begin() + i, route.begin() + j + 1);  // undo
                    }
                }
            if (improved) break;  // rescan from the first route
        }
    }

    std::vector<int> seq = {0};
    for (const auto& route : routes) {
        seq.insert(seq.end(), route.begin(), route.end());
        seq.push_back(0);
    }
    return make_solution(seq, p);
}

}  // namespace davrp
