#pragma once

#include <cstdint>
#include <random>

#include "davrp/instance.hpp"

namespace davrp {

struct GenOptions {
    int capacity_override = 0;  // 0 = use the size-based convention
};

// Size-based capacity convention: 40 at n=50, 50 at n=100, interpolated as
// 30 + ceil(n/5) elsewhere and capped at 50 beyond n=100.
int default_capacity(int n);

// Signed demands for customers 1..n (slot 0 stays zero). With backhauls
// active, each customer flips to a negative draw with probability 0.2.
std::vector<int> gen_demands(int n, bool backhaul, std::mt19937_64& rng);

// Time-window attributes for all nodes. Depot gets [0, horizon, 0]; customer
// windows are placed so that a direct depot round trip is always feasible.
void gen_time_windows(const std::vector<double>& xs, const std::vector<double>& ys,
                      std::mt19937_64& rng, std::vector<double>& tw_start,
                      std::vector<double>& tw_end, std::vector<double>& service);

// Upper end of the feasible window-start ratio for a customer at distance d0
// from the depot (window start is e = (1 + (ratio-1)*y) * d0 for y in [0,1]).
double tw_start_upper(double d0, double service, double width);

// Route length budget drawn from U(2*max depot distance, kDistLimitMax).
double gen_distance_limit(double max_depot_dist, std::mt19937_64& rng);

Instance generate_instance(int n, const VariantSpec& variant, std::uint64_t seed,
                           const GenOptions& opt = {});

}  // namespace davrp
