#pragma once

#include <iosfwd>
#include <map>

#include "davrp/env.hpp"

namespace davrp {

// Subset of the TSPLIB95 format used by the classic capacitated benchmark
// sets (EUC_2D node coordinates, demand and depot sections).
struct CvrplibInstance {
    std::string name;
    int dimension = 0;
    int capacity = 0;
    std::vector<double> xs, ys;  // in file order, 0-based
    std::vector<int> demands;
    int depot = 0;  // 0-based index into the arrays
};

CvrplibInstance parse_cvrplib(std::istream& is);
CvrplibInstance parse_cvrplib_file(const std::string& path);

// Benchmark instance mapped onto the unit square (uniform min-max scaling,
// aspect ratio preserved, depot moved to index 0).
struct CvrplibProblem {
    CvrplibInstance raw;
    Instance unit;            // capacity-only variant
    std::vector<int> ids;     // unit node index -> raw 0-based index
};

CvrplibProblem to_unit_problem(const CvrplibInstance& raw);

// Benchmark objective: Euclidean legs on the original coordinates rounded to
// the nearest integer, summed over a depot-delimited unit-index sequence.
long long rounded_cost(const CvrplibProblem& cp, const std::vector<int>& unit_seq);

// name -> best known objective, from a `name,cost` CSV (header optional).
std::map<std::string, double> read_best_known(const std::string& path);

}  // namespace davrp
