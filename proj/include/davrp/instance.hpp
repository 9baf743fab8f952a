#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "davrp/variant.hpp"

namespace davrp {

// Route-length budget used as the neutral featurization value when the
// duration-limit constraint is inactive (upper end of the sampled range).
inline constexpr double kDistLimitMax = 3.0;

// Planning horizon for time-window instances (depot closes at this time).
inline constexpr double kHorizon = 4.6;

// Node 0 is always the depot. Customer i lives at index i (1..n).
struct Instance {
    VariantSpec variant;
    std::vector<double> xs, ys;  // size n+1
    std::vector<int> demands;    // size n+1, demands[0] == 0, signed
    int capacity = 0;

    // Populated only when variant.time_window is set (size n+1; depot row
    // holds [0, horizon, 0]).
    std::vector<double> tw_start, tw_end, service;

    // Populated only when variant.duration_limit is set.
    double dist_limit = 0.0;

    int num_customers() const { return static_cast<int>(xs.size()) - 1; }
    int num_nodes() const { return static_cast<int>(xs.size()); }

    double normalized_demand(int i) const {
        return static_cast<double>(demands[i]) / static_cast<double>(capacity);
    }
};

struct DistanceMatrix {
    int n = 0;                // number of nodes
    std::vector<double> d;    // row-major n*n

    double operator()(int i, int j) const { return d[static_cast<size_t>(i) * n + j]; }
};

inline DistanceMatrix distance_matrix(const std::vector<double>& xs,
                                      const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("coordinate size mismatch");
    DistanceMatrix m;
    m.n = static_cast<int>(xs.size());
    m.d.assign(static_cast<size_t>(m.n) * m.n, 0.0);
    for (int i = 0; i < m.n; ++i)
        for (int j = 0; j < m.n; ++j)
            m.d[static_cast<size_t>(i) * m.n + j] = std::hypot(xs[i] - xs[j], ys[i] - ys[j]);
    return m;
}

inline DistanceMatrix distance_matrix(const Instance& inst) {
    return distance_matrix(inst.xs, inst.ys);
}

}  // namespace davrp
