#pragma once

#include <array>
#include <iosfwd>

#include "davrp/model.hpp"

namespace davrp {

// The eight axis flips / transpositions of the unit square, identity first.
// Distances (and so feasibility and cost) are preserved up to rounding.
std::array<Instance, 8> augment8(const Instance& inst);

struct EvalOptions {
    bool aug8 = false;       // best over the eight coordinate symmetries
    bool prompt_all = false; // best over all 32 prompt bit patterns
    int k_override = 0;      // sparse fan-in at inference, 0 = model default
    int n_starts = 0;        // 0 -> one start per customer
};

struct InstanceEval {
    double cost = 0.0;
    Solution best;  // node indices refer to the original instance
};

InstanceEval evaluate_instance(ModelParams<float>& mp, const Problem& p,
                               const EvalOptions& opt);

struct EvalRow {
    std::string variant;
    int n = 0;
    double mean_obj = 0.0;
    double gap = std::numeric_limits<double>::quiet_NaN();  // vs reference costs
    double time_s = 0.0;
};

// Evaluates a homogeneous instance set; `ref_costs` (optional, same order)
// yields the mean relative gap.
EvalRow evaluate_set(ModelParams<float>& mp, const std::vector<Problem>& set,
                     const EvalOptions& opt, const std::vector<double>* ref_costs = nullptr);

// Encoder attention statistics. Writes per-customer depot attention
// (layer,head,instance,customer,weight) and, for time-window instances,
// pair compatibility vs. mean attention (p_value,weight).
void attention_stats(ModelParams<float>& mp, const std::vector<Problem>& set,
                     std::ostream& depot_csv, std::ostream& tw_csv);

// Window-compatibility score of ordered customer pair (i, j): positive iff
// serving j directly after i can respect j's window when leaving i at its
// earliest finish.
double pair_compatibility(const Instance& inst, int i, int j);

}  // namespace davrp
