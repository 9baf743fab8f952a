#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "davrp/instance.hpp"

namespace davrp {

// Instance bundled with the derived data every hot loop needs.
struct Problem {
    Instance inst;
    DistanceMatrix dist;
    std::vector<double> norm_demand;  // signed demand / capacity

    static Problem from(Instance inst) {
        Problem p;
        p.dist = distance_matrix(inst);
        p.norm_demand.resize(inst.num_nodes());
        for (int i = 0; i < inst.num_nodes(); ++i) p.norm_demand[i] = inst.normalized_demand(i);
        p.inst = std::move(inst);
        return p;
    }
};

struct State {
    std::vector<int> sequence;          // starts with the depot token
    std::vector<std::uint8_t> visited;  // size n+1, index 0 unused
    int visited_count = 0;
    int linehaul_left = 0;  // unvisited customers with positive demand
    int last_node = 0;
    double cap_linehaul = 1.0;  // remaining normalized delivery capacity
    double cap_backhaul = 1.0;  // remaining normalized pickup capacity
    double clock = 0.0;
    double route_len_left = kDistLimitMax;
    bool done = false;
};

struct ActionMask {
    std::vector<std::uint8_t> feasible;  // size n+1, slot 0 = depot

    bool any() const {
        for (auto f : feasible)
            if (f) return true;
        return false;
    }
    int count() const {
        int c = 0;
        for (auto f : feasible) c += f != 0;
        return c;
    }
};

struct Solution {
    std::vector<int> sequence;
    double cost = 0.0;
    std::vector<std::vector<int>> routes;
};

struct EnvError : std::runtime_error {
    int rule;  // 1..5 masking rule, 0 for structural misuse
    EnvError(int r, const std::string& msg) : std::runtime_error(msg), rule(r) {}
};

std::vector<State> reset(const Problem& p, int n_starts);

// 0 if `action` is allowed in `s`, otherwise the lowest violated rule number:
// 1 revisit / depot-after-depot, 2 cannot close the route afterwards,
// 3 misses the time window, 4 backhaul before linehauls are exhausted,
// 5 exceeds remaining capacity.
int violated_rule(const State& s, const Problem& p, int action);

ActionMask feasible_actions(const State& s, const Problem& p);

void step(State& s, int action, const Problem& p);

// Sum of traversed edge lengths; edges into the depot are free for open
// variants (no return legs).
double sequence_cost(const std::vector<int>& seq, const Problem& p);

Solution make_solution(std::vector<int> seq, const Problem& p);

double reward(const Solution& sol, const Problem& p);

// Splits a depot-delimited visit sequence into per-route node lists. Closed
// routes keep both depot endpoints, open routes drop the trailing one.
std::vector<std::vector<int>> decompose_routes(const std::vector<int>& seq, bool open);

struct Violation {
    int position;  // index into the sequence (or -1 for global checks)
    std::string what;
};

// Independent re-check of a finished sequence against every constraint the
// instance carries. Shares no logic with feasible_actions/step on purpose.
std::vector<Violation> validate_solution(const Instance& inst, const std::vector<int>& seq);

}  // namespace davrp
