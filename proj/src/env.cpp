#include "davrp/env.hpp"

#include <algorithm>
#include <cmath>

namespace davrp {

std::vector<State> reset(const Problem& p, int n_starts) {
    if (n_starts <= 0) throw std::invalid_argument("n_starts must be positive");
    const int n = p.inst.num_customers();
    State s;
    s.sequence = {0};
    s.visited.assign(n + 1, 0);
    s.linehaul_left = 0;
    for (int i = 1; i <= n; ++i)
        if (p.inst.demands[i] > 0) ++s.linehaul_left;
    s.route_len_left = p.inst.variant.duration_limit ? p.inst.dist_limit : kDistLimitMax;
    s.done = n == 0;
    return std::vector<State>(n_starts, s);
}

int violated_rule(const State& s, const Problem& p, int action) {
    const Instance& inst = p.inst;
    const VariantSpec& v = inst.variant;
    if (action == 0) return s.last_node == 0 ? 1 : 0;

    if (s.visited[action]) return 1;

    const double d_in = p.dist(s.last_node, action);
    if (v.time_window) {
        if (!v.open_route &&
            s.clock + d_in + inst.service[action] + p.dist(action, 0) > kHorizon)
            return 2;
    }
    if (v.duration_limit) {
        const double need = v.open_route ? d_in : d_in + p.dist(action, 0);
        if (s.route_len_left < need) return 2;
    }
    if (v.time_window) {
        if (s.clock + d_in + inst.service[action] > inst.tw_end[action]) return 3;
    }
    const int demand = inst.demands[action];
    if (v.backhaul && demand < 0 && s.linehaul_left > 0) return 4;
    const double nd = p.norm_demand[action];
    if (demand > 0) {
        if (nd > s.cap_linehaul) return 5;
    } else if (demand < 0) {
        if (-nd > s.cap_backhaul) return 5;
    }
    return 0;
}

ActionMask feasible_actions(const State& s, const Problem& p) {
    if (s.done) throw EnvError(0, "feasible_actions called on a finished state");
    const int n = p.inst.num_customers();
    ActionMask m;
    m.feasible.assign(n + 1, 0);
    for (int a = 0; a <= n; ++a) m.feasible[a] = violated_rule(s, p, a) == 0;
    return m;
}

void step(State& s, int action, const Problem& p) {
    if (s.done) throw EnvError(0, "step called on a finished state");
    const int n = p.inst.num_customers();
    if (action < 0 || action > n) throw EnvError(0, "action index out of range");
    if (int r = violated_rule(s, p, action); r != 0)
        throw EnvError(r, "infeasible action " + std::to_string(action) + ": violates rule " +
                              std::to_string(r));

    const Instance& inst = p.inst;
    const VariantSpec& v = inst.variant;
    if (action == 0) {
        s.sequence.push_back(0);
        s.last_node = 0;
        s.cap_linehaul = 1.0;
        s.cap_backhaul = 1.0;
        s.clock = 0.0;
        s.route_len_left = v.duration_limit ? inst.dist_limit : kDistLimitMax;
        if (s.visited_count == n) s.done = true;
        return;
    }

    const double d_in = p.dist(s.last_node, action);
    s.sequence.push_back(action);
    s.visited[action] = 1;
    ++s.visited_count;
    const int demand = inst.demands[action];
    if (demand > 0) {
        s.cap_linehaul -= p.norm_demand[action];
        --s.linehaul_left;
    } else if (demand < 0) {
        s.cap_backhaul -= -p.norm_demand[action];
    }
    if (v.time_window)
        s.clock = std::max(s.clock + d_in, inst.tw_start[action]) + inst.service[action];
    else
        s.clock += d_in;
    if (v.duration_limit) s.route_len_left -= d_in;
    s.last_node = action;

    if (v.open_route && s.visited_count == n) {
        // No return leg to drive; emit the closing token and stop.
        s.sequence.push_back(0);
        s.last_node = 0;
        s.done = true;
    }
}

double sequence_cost(const std::vector<int>& seq, const Problem& p) {
    const bool open = p.inst.variant.open_route;
    double cost = 0.0;
    for (size_t t = 0; t + 1 < seq.size(); ++t) {
        if (open && seq[t + 1] == 0) continue;
        cost += p.dist(seq[t], seq[t + 1]);
    }
    return cost;
}

Solution make_solution(std::vector<int> seq, const Problem& p) {
    Solution sol;
    sol.cost = sequence_cost(seq, p);
    sol.routes = decompose_routes(seq, p.inst.variant.open_route);
    sol.sequence = std::move(seq);
    return sol;
}

double reward(const Solution& sol, const Problem& p) { return -sequence_cost(sol.sequence, p); }

std::vector<std::vector<int>> decompose_routes(const std::vector<int>& seq, bool open) {
    if (seq.empty() || seq.front() != 0)
        throw std::invalid_argument("sequence must start at the depot");
    std::vector<std::vector<int>> routes;
    std::vector<int> cur = {0};
    for (size_t t = 1; t < seq.size(); ++t) {
        if (seq[t] == 0) {
            if (cur.size() == 1)
                throw std::invalid_argument("empty route (consecutive depot visits)");
            if (!open) cur.push_back(0);
            routes.push_back(std::move(cur));
            cur = {0};
        } else {
            cur.push_back(seq[t]);
        }
    }
    if (cur.size() > 1) routes.push_back(std::move(cur));  // sequence ended mid-route
    return routes;
}

}  // namespace davrp
