#include "davrp/eval.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

namespace davrp {

std::array<Instance, 8> augment8(const Instance& inst) {
    std::array<Instance, 8> out;
    for (int a = 0; a < 8; ++a) {
        Instance t = inst;
        for (std::size_t i = 0; i < t.xs.size(); ++i) {
            double x = inst.xs[i], y = inst.ys[i];
            if (a & 1) x = 1.0 - x;
            if (a & 2) y = 1.0 - y;
            if (a & 4) std::swap(x, y);
            t.xs[i] = x;
            t.ys[i] = y;
        }
        out[a] = std::move(t);
    }
    return out;
}

InstanceEval evaluate_instance(ModelParams<float>& mp, const Problem& p,
                               const EvalOptions& opt) {
    const int n = p.inst.num_customers();
    const int starts = opt.n_starts > 0 ? opt.n_starts : n;
    const int saved_k = mp.cfg.top_k;
    if (opt.k_override > 0) mp.cfg.top_k = opt.k_override;

    std::vector<std::array<double, 5>> prompts;
    if (opt.prompt_all) {
        for (int bits = 0; bits < 32; ++bits)
            prompts.push_back({static_cast<double>(bits & 1), static_cast<double>((bits >> 1) & 1),
                               static_cast<double>((bits >> 2) & 1),
                               static_cast<double>((bits >> 3) & 1),
                               static_cast<double>((bits >> 4) & 1)});
    } else {
        prompts.push_back(p.inst.variant.multi_hot());
    }

    std::vector<Problem> views;
    if (opt.aug8) {
        for (Instance& a : augment8(p.inst)) views.push_back(Problem::from(std::move(a)));
    } else {
        views.push_back(p);
    }

    InstanceEval best;
    best.cost = std::numeric_limits<double>::infinity();
    ta::Tape<float> tape;
    tape.set_grad_enabled(false);
    for (const Problem& view : views) {
        for (const auto& prompt : prompts) {
            tape.reset();
            auto ro = rollout(tape, mp, view, starts, Decode::Greedy, nullptr, &prompt);
            for (const Solution& sol : ro.solutions) {
                // Solutions index nodes, so they transfer to the original
                // instance directly; score them there.
                const double c = sequence_cost(sol.sequence, p);
                if (c < best.cost) {
                    best.cost = c;
                    best.best = make_solution(sol.sequence, p);
                }
            }
        }
    }
    mp.cfg.top_k = saved_k;
    return best;
}

EvalRow evaluate_set(ModelParams<float>& mp, const std::vector<Problem>& set,
                     const EvalOptions& opt, const std::vector<double>* ref_costs) {
    if (set.empty()) throw std::invalid_argument("evaluate_set: empty set");
    if (ref_costs && ref_costs->size() != set.size())
        throw std::invalid_argument("evaluate_set: reference size mismatch");
    EvalRow row;
    row.variant = set[0].inst.variant.name();
    row.n = set[0].inst.num_customers();
    const auto t0 = std::chrono::steady_clock::now();
    double total = 0.0, gap = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const double c = evaluate_instance(mp, set[i], opt).cost;
        total += c;
        if (ref_costs) gap += (c - (*ref_costs)[i]) / (*ref_costs)[i];
    }
    const auto t1 = std::chrono::steady_clock::now();
    row.mean_obj = total / static_cast<double>(set.size());
    if (ref_costs) row.gap = gap / static_cast<double>(set.size());
    row.time_s = std::chrono::duration<double>(t1 - t0).count();
    return row;
}

double pair_compatibility(const Instance& inst, int i, int j) {
    const double d = std::hypot(inst.xs[i] - inst.xs[j], inst.ys[i] - inst.ys[j]);
    return (inst.tw_end[j] - inst.tw_start[i]) - d - (inst.service[i] + inst.service[j]);
}

void attention_stats(ModelParams<float>& mp, const std::vector<Problem>& set,
                     std::ostream& depot_csv, std::ostream& tw_csv) {
    depot_csv << "layer,head,instance,customer,weight\n";
    tw_csv << "p_value,weight\n";
    ta::Tape<float> tape;
    tape.set_grad_enabled(false);
    for (std::size_t idx = 0; idx < set.size(); ++idx) {
        const Problem& p = set[idx];
        const int n = p.inst.num_customers();
        tape.reset();
        AttnRecorder rec;
        encode(tape, mp, p, &rec);

        // mean over global-branch layers and heads of customer->customer rows
        std::vector<double> mean_w(static_cast<std::size_t>(n + 1) * (n + 1), 0.0);
        int layers_seen = 0;
        for (const AttnRecord& r : rec.records) {
            if (r.branch != 'g') continue;
            ++layers_seen;
            for (int i = 1; i <= n; ++i) {
                depot_csv << r.layer << ',' << r.head << ',' << idx << ',' << i << ','
                          << r.w[static_cast<std::size_t>(i) * r.cols + 0] << '\n';
                for (int j = 0; j <= n; ++j)
                    mean_w[static_cast<std::size_t>(i) * (n + 1) + j] +=
                        r.w[static_cast<std::size_t>(i) * r.cols + j];
            }
        }
        if (p.inst.variant.time_window && layers_seen > 0) {
            for (int i = 1; i <= n; ++i)
                for (int j = 1; j <= n; ++j) {
                    if (i == j) continue;
                    tw_csv << pair_compatibility(p.inst, i, j) << ','
                           << mean_w[static_cast<std::size_t>(i) * (n + 1) + j] / layers_seen
                           << '\n';
                }
        }
    }
}

}  // namespace davrp
