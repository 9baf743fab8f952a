#include "davrp/generator.hpp"

#include <algorithm>
#include <cmath>

namespace davrp {

int default_capacity(int n) {
    if (n <= 0) throw std::invalid_argument("instance size must be positive");
    if (n > 100) return 50;
    return 30 + (n + 4) / 5;
}

std::vector<int> gen_demands(int n, bool backhaul, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> mag(1, 9);
    std::vector<int> linehaul(n);
    for (int i = 0; i < n; ++i) linehaul[i] = mag(rng);

    std::vector<int> out(n + 1, 0);
    if (!backhaul) {
        for (int i = 0; i < n; ++i) out[i + 1] = linehaul[i];
        return out;
    }
    std::vector<int> back(n);
    for (int i = 0; i < n; ++i) back[i] = mag(rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        double y = unit(rng);
        out[i + 1] = y < 0.2 ? -back[i] : linehaul[i];
    }
    return out;
}

double tw_start_upper(double d0, double service, double width) {
    return (kHorizon - service - width) / d0 - 1.0;
}

void gen_time_windows(const std::vector<double>& xs, const std::vector<double>& ys,
                      std::mt19937_64& rng, std::vector<double>& tw_start,
                      std::vector<double>& tw_end, std::vector<double>& service) {
    const int nodes = static_cast<int>(xs.size());
    tw_start.assign(nodes, 0.0);
    tw_end.assign(nodes, 0.0);
    service.assign(nodes, 0.0);
    tw_end[0] = kHorizon;

    std::uniform_real_distribution<double> serv_d(0.15, 0.18);
    std::uniform_real_distribution<double> width_d(0.18, 0.20);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<double> width(nodes, 0.0);
    for (int i = 1; i < nodes; ++i) service[i] = serv_d(rng);
    for (int i = 1; i < nodes; ++i) width[i] = width_d(rng);
    for (int i = 1; i < nodes; ++i) {
        double d0 = std::hypot(xs[i] - xs[0], ys[i] - ys[0]);
        double up = tw_start_upper(d0, service[i], width[i]);
        double y = unit(rng);
        tw_start[i] = (1.0 + (up - 1.0) * y) * d0;
        tw_end[i] = tw_start[i] + width[i];
    }
}

double gen_distance_limit(double max_depot_dist, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> lim(2.0 * max_depot_dist, kDistLimitMax);
    return lim(rng);
}

Instance generate_instance(int n, const VariantSpec& variant, std::uint64_t seed,
                           const GenOptions& opt) {
    if (n <= 0) throw std::invalid_argument("instance size must be positive");
    Instance inst;
    inst.variant = variant;
    inst.capacity = opt.capacity_override > 0 ? opt.capacity_override : default_capacity(n);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    inst.xs.resize(n + 1);
    inst.ys.resize(n + 1);
    for (int i = 0; i <= n; ++i) {
        inst.xs[i] = unit(rng);
        inst.ys[i] = unit(rng);
    }
    if (variant.time_window) {
        // A customer exactly on the depot would make the window-start ratio
        // undefined, so redraw such points.
        for (int i = 1; i <= n; ++i)
            while (inst.xs[i] == inst.xs[0] && inst.ys[i] == inst.ys[0]) {
                inst.xs[i] = unit(rng);
                inst.ys[i] = unit(rng);
            }
    }

    inst.demands = gen_demands(n, variant.backhaul, rng);
    if (variant.time_window)
        gen_time_windows(inst.xs, inst.ys, rng, inst.tw_start, inst.tw_end, inst.service);
    if (variant.duration_limit) {
        double maxd = 0.0;
        for (int i = 1; i <= n; ++i)
            maxd = std::max(maxd, std::hypot(inst.xs[i] - inst.xs[0], inst.ys[i] - inst.ys[0]));
        inst.dist_limit = gen_distance_limit(maxd, rng);
    }
    return inst;
}

}  // namespace davrp
