#pragma once

#include <optional>

#include "davrp/env.hpp"

namespace davrp {

struct ExactResult {
    Solution solution;
    bool feasible = true;        // false when no feasible solution exists
    long long routes_checked = 0;
};

// Optimal depot-delimited solution by exhausting customer permutations with
// an optimal-split dynamic program over each one. Intended for n <= 8.
ExactResult exact_solve(const Problem& p);

// Greedy construction: repeatedly drive to the nearest customer the masking
// rules allow, returning to the depot when nothing else fits.
Solution nn_construct(const Problem& p);

// Intra-route 2-opt (segment reversal) with full constraint re-checks per
// move; first-improvement, capped at 10 * n accepted moves.
Solution two_opt(const Solution& start, const Problem& p);

// Cost of one route given as customer list (no depot tokens), or nullopt if
// it violates any constraint of the instance. Exposed for tests.
std::optional<double> route_eval(const Problem& p, const int* customers, int len);

}  // namespace davrp
