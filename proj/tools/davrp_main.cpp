// Command-line front end: dataset generation, training, evaluation,
// solving, validation, classic baselines and benchmark-file support.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "davrp/baselines.hpp"
#include "davrp/checkpoint.hpp"
#include "davrp/config.hpp"
#include "davrp/cvrplib.hpp"
#include "davrp/dataset_io.hpp"
#include "davrp/eval.hpp"
#include "davrp/rng.hpp"
#include "davrp/trainer.hpp"

namespace {

using namespace davrp;

std::vector<Problem> load_problems(const std::string& path) {
    std::vector<Problem> out;
    for (Instance& inst : read_instances_file(path)) out.push_back(Problem::from(std::move(inst)));
    if (out.empty()) throw std::runtime_error("no instances in " + path);
    return out;
}

// reference costs: `instance_id,cost[,optimal_flag]` rows, id = 0-based index
std::vector<double> load_ref_costs(const std::string& path, std::size_t count) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open reference file " + path);
    std::vector<double> costs(count, std::numeric_limits<double>::quiet_NaN());
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line.rfind("instance_id", 0) == 0) continue;
        std::istringstream ls(line);
        std::string id_s, cost_s;
        if (!std::getline(ls, id_s, ',') || !std::getline(ls, cost_s, ',')) continue;
        const std::size_t id = std::stoul(id_s);
        if (id >= count) throw std::runtime_error("reference id out of range: " + id_s);
        costs[id] = std::stod(cost_s);
    }
    for (std::size_t i = 0; i < count; ++i)
        if (!std::isfinite(costs[i]))
            throw std::runtime_error("missing reference cost for instance " + std::to_string(i));
    return costs;
}

int cmd_generate(int n, const std::string& variant, int count, std::uint64_t seed,
                 const std::string& out, int capacity) {
    auto v = VariantSpec::from_name(variant);
    if (!v) throw std::runtime_error("unknown variant: " + variant);
    GenOptions opt;
    opt.capacity_override = capacity;
    std::ofstream os(out, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + out);
    for (int i = 0; i < count; ++i)
        write_instance(os, generate_instance(n, *v, mix64(seed, i), opt));
    std::cout << "wrote " << count << " " << variant << " instances (n=" << n << ") to " << out
              << "\n";
    return 0;
}

int cmd_train(const std::string& profile, const std::string& config_path,
              const std::string& out_dir, std::uint64_t seed, int epochs) {
    TrainConfig cfg = profile == "paper" ? paper_profile() : desk_profile();
    if (!config_path.empty()) apply_config(cfg, parse_config_file(config_path));
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed != 0) cfg.seed = seed;
    if (epochs > 0) cfg.epochs = epochs;
    train(cfg, &std::cout);
    std::cout << "checkpoint: " << cfg.out_dir << "/model.ckpt\n";
    return 0;
}

EvalOptions make_eval_options(bool aug8, bool prompt_aug, int k, int n_starts) {
    EvalOptions opt;
    opt.aug8 = aug8;
    opt.prompt_all = prompt_aug;
    opt.k_override = k;
    opt.n_starts = n_starts;
    return opt;
}

int cmd_eval(const std::string& model_path, const std::string& data, bool aug8, bool prompt_aug,
             int k, int n_starts, const std::string& ref_path, const std::string& csv_path) {
    ModelParams<float> mp = load_model(model_path);
    std::vector<Problem> all = load_problems(data);
    const EvalOptions opt = make_eval_options(aug8, prompt_aug, k, n_starts);

    std::vector<double> refs;
    if (!ref_path.empty()) refs = load_ref_costs(ref_path, all.size());

    // group by variant, preserving first-seen order
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const std::string name = all[i].inst.variant.name();
        if (!groups.count(name)) order.push_back(name);
        groups[name].push_back(i);
    }

    std::ostringstream csv;
    csv << "variant,n,mean_obj,gap,time_s\n";
    for (const std::string& name : order) {
        std::vector<Problem> set;
        std::vector<double> set_refs;
        for (std::size_t i : groups[name]) {
            set.push_back(all[i]);
            if (!refs.empty()) set_refs.push_back(refs[i]);
        }
        EvalRow row = evaluate_set(mp, set, opt, refs.empty() ? nullptr : &set_refs);
        csv << row.variant << ',' << row.n << ',' << std::setprecision(10) << row.mean_obj << ',';
        if (std::isfinite(row.gap)) csv << row.gap;
        csv << ',' << row.time_s << '\n';
        std::cout << row.variant << " n=" << row.n << " mean_obj=" << row.mean_obj;
        if (std::isfinite(row.gap)) std::cout << " gap=" << row.gap * 100.0 << "%";
        std::cout << " time=" << row.time_s << "s\n";
    }
    if (!csv_path.empty()) {
        std::ofstream os(csv_path, std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + csv_path);
        os << csv.str();
    }
    return 0;
}

int cmd_solve(const std::string& model_path, const std::string& instance_path,
              const std::string& out_path, bool aug8, bool prompt_aug, int k, int n_starts) {
    ModelParams<float> mp = load_model(model_path);
    Instance inst = read_instance_file(instance_path);
    Problem p = Problem::from(std::move(inst));
    InstanceEval ev = evaluate_instance(mp, p, make_eval_options(aug8, prompt_aug, k, n_starts));
    auto violations = validate_solution(p.inst, ev.best.sequence);
    if (!violations.empty()) {
        for (const auto& v : violations) std::cerr << "violation: " << v.what << "\n";
        return 1;
    }
    if (!out_path.empty()) write_solution_file(out_path, ev.best);
    std::cout << std::setprecision(10) << "cost " << ev.cost << "\n";
    return 0;
}

int cmd_validate(const std::string& instance_path, const std::string& solution_path) {
    Instance inst = read_instance_file(instance_path);
    SolutionFileData sol = read_solution_file(solution_path);
    auto violations = validate_solution(inst, sol.sequence);
    Problem p = Problem::from(inst);
    const double actual = sequence_cost(sol.sequence, p);
    if (std::abs(actual - sol.cost) > 1e-6 * std::max(1.0, std::abs(actual)))
        violations.push_back({-1, "stated cost " + std::to_string(sol.cost) +
                                      " does not match recomputed " + std::to_string(actual)});
    if (violations.empty()) {
        std::cout << "valid (cost " << std::setprecision(10) << actual << ")\n";
        return 0;
    }
    for (const auto& v : violations)
        std::cout << "violation at " << v.position << ": " << v.what << "\n";
    return 1;
}

int cmd_baseline(const std::string& algo, const std::string& data, const std::string& csv_path) {
    std::vector<Problem> set = load_problems(data);
    std::ostringstream csv;
    csv << "instance_id,cost,optimal_flag\n";
    double total = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        double cost = 0.0;
        int optimal = 0;
        if (algo == "exact") {
            ExactResult r = exact_solve(set[i]);
            if (!r.feasible) {
                std::cerr << "instance " << i << ": no feasible solution\n";
                return 1;
            }
            cost = r.solution.cost;
            optimal = 1;
        } else if (algo == "nn") {
            cost = nn_construct(set[i]).cost;
        } else if (algo == "nn2opt") {
            cost = two_opt(nn_construct(set[i]), set[i]).cost;
        } else {
            throw std::runtime_error("unknown baseline: " + algo);
        }
        csv << i << ',' << std::setprecision(17) << cost << ',' << optimal << '\n';
        total += cost;
    }
    std::cout << algo << " mean_cost=" << std::setprecision(10) << total / set.size() << " over "
              << set.size() << " instances\n";
    if (!csv_path.empty()) {
        std::ofstream os(csv_path, std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + csv_path);
        os << csv.str();
    }
    return 0;
}

int cmd_cvrplib(const std::string& path, const std::string& model_path,
                const std::string& best_known_path, bool aug8, bool prompt_aug, int k,
                int n_starts, const std::string& csv_path) {
    ModelParams<float> mp = load_model(model_path);
    std::map<std::string, double> best_known;
    if (!best_known_path.empty()) best_known = read_best_known(best_known_path);

    std::ostringstream csv;
    csv << "name,n,cost,best_known,gap\n";
    CvrplibProblem cp = to_unit_problem(parse_cvrplib_file(path));
    Problem p = Problem::from(cp.unit);
    InstanceEval ev = evaluate_instance(mp, p, make_eval_options(aug8, prompt_aug, k, n_starts));
    auto violations = validate_solution(p.inst, ev.best.sequence);
    if (!violations.empty()) {
        for (const auto& v : violations) std::cerr << "violation: " << v.what << "\n";
        return 1;
    }
    const long long obj = rounded_cost(cp, ev.best.sequence);
    std::cout << cp.raw.name << " n=" << cp.raw.dimension - 1 << " cost=" << obj;
    csv << cp.raw.name << ',' << cp.raw.dimension - 1 << ',' << obj << ',';
    if (auto it = best_known.find(cp.raw.name); it != best_known.end()) {
        const double gap = (static_cast<double>(obj) - it->second) / it->second;
        std::cout << " best_known=" << it->second << " gap=" << std::setprecision(4)
                  << gap * 100.0 << "%";
        csv << it->second << ',' << gap;
    } else {
        csv << ',';
    }
    std::cout << "\n";
    csv << '\n';
    if (!csv_path.empty()) {
        std::ofstream os(csv_path, std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + csv_path);
        os << csv.str();
    }
    return 0;
}

int cmd_attn_stats(const std::string& model_path, int n, int count, std::uint64_t seed,
                   const std::string& out_dir) {
    ModelParams<float> mp = load_model(model_path);
    std::filesystem::create_directories(out_dir);
    auto variant = VariantSpec::from_name("vrptw");
    std::vector<Problem> set;
    for (int i = 0; i < count; ++i)
        set.push_back(Problem::from(generate_instance(n, *variant, mix64(seed, 0xa77, i))));
    std::ofstream depot(out_dir + "/attn_depot.csv", std::ios::trunc);
    std::ofstream tw(out_dir + "/attn_tw.csv", std::ios::trunc);
    if (!depot || !tw) throw std::runtime_error("cannot open attention output files");
    attention_stats(mp, set, depot, tw);
    std::cout << "wrote " << out_dir << "/attn_depot.csv and " << out_dir << "/attn_tw.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"neural solver for multi-constraint vehicle routing"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "global seed (0 keeps per-command defaults)");

    // generate
    auto* gen = app.add_subcommand("generate", "write random instances to a file");
    int g_n = 20, g_count = 1, g_capacity = 0;
    std::string g_variant = "cvrp", g_out = "instances.vrp";
    gen->add_option("--n", g_n, "customers per instance");
    gen->add_option("--variant", g_variant, "variant name, e.g. cvrp, ovrpbltw");
    gen->add_option("--count", g_count, "number of instances");
    gen->add_option("--capacity", g_capacity, "capacity override (0 = size convention)");
    gen->add_option("--out", g_out, "output file")->required();

    // train
    auto* tr = app.add_subcommand("train", "train a policy");
    std::string t_profile = "desk", t_config, t_out;
    int t_epochs = 0;
    tr->add_option("--profile", t_profile, "desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    tr->add_option("--config", t_config, "key = value overrides file");
    tr->add_option("--out", t_out, "run directory");
    tr->add_option("--epochs", t_epochs, "epoch count override");

    // shared model-inference options
    auto add_infer = [](CLI::App* c, std::string& model, bool& aug8, bool& prompt_aug, int& k,
                        int& starts) {
        c->add_option("--model", model, "checkpoint path")->required();
        c->add_flag("--aug8", aug8, "best over the 8 coordinate symmetries");
        c->add_flag("--prompt-aug", prompt_aug, "best over all 32 prompt patterns");
        c->add_option("--k", k, "sparse attention fan-in override");
        c->add_option("--n-starts", starts, "number of rollout starts (0 = one per customer)");
    };

    auto* ev = app.add_subcommand("eval", "evaluate a model on a dataset");
    std::string e_model, e_data, e_ref, e_csv;
    bool e_aug8 = false, e_prompt = false;
    int e_k = 0, e_starts = 0;
    add_infer(ev, e_model, e_aug8, e_prompt, e_k, e_starts);
    ev->add_option("--data", e_data, "instance file")->required();
    ev->add_option("--ref", e_ref, "reference costs (instance_id,cost,optimal_flag)");
    ev->add_option("--csv", e_csv, "write the report as CSV");

    auto* so = app.add_subcommand("solve", "solve one instance");
    std::string s_model, s_instance, s_out;
    bool s_aug8 = false, s_prompt = false;
    int s_k = 0, s_starts = 0;
    add_infer(so, s_model, s_aug8, s_prompt, s_k, s_starts);
    so->add_option("--instance", s_instance, "instance file")->required();
    so->add_option("--out", s_out, "solution output file");

    auto* va = app.add_subcommand("validate", "check a solution file against an instance");
    std::string v_instance, v_solution;
    va->add_option("--instance", v_instance)->required();
    va->add_option("--solution", v_solution)->required();

    auto* ba = app.add_subcommand("baseline", "run a classical baseline");
    std::string b_algo = "nn", b_data, b_csv;
    ba->add_option("--algo", b_algo, "exact, nn or nn2opt")
        ->check(CLI::IsMember({"exact", "nn", "nn2opt"}));
    ba->add_option("--data", b_data, "instance file")->required();
    ba->add_option("--csv", b_csv, "write per-instance costs as CSV");

    auto* cv = app.add_subcommand("cvrplib", "evaluate on a TSPLIB-format benchmark file");
    std::string c_path, c_model, c_best, c_csv;
    bool c_aug8 = false, c_prompt = false;
    int c_k = 0, c_starts = 0;
    add_infer(cv, c_model, c_aug8, c_prompt, c_k, c_starts);
    cv->add_option("--path", c_path, "benchmark .vrp file")->required();
    cv->add_option("--best-known", c_best, "name,cost CSV for gaps");
    cv->add_option("--csv", c_csv, "write the report as CSV");

    auto* at = app.add_subcommand("attn-stats", "dump encoder attention statistics");
    std::string a_model, a_out = "attn";
    int a_n = 20, a_count = 8;
    at->add_option("--model", a_model, "checkpoint path")->required();
    at->add_option("--n", a_n, "customers per instance");
    at->add_option("--count", a_count, "instances to analyze");
    at->add_option("--out-dir", a_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed())
            return cmd_generate(g_n, g_variant, g_count, seed ? seed : 1, g_out, g_capacity);
        if (tr->parsed()) return cmd_train(t_profile, t_config, t_out, seed, t_epochs);
        if (ev->parsed())
            return cmd_eval(e_model, e_data, e_aug8, e_prompt, e_k, e_starts, e_ref, e_csv);
        if (so->parsed())
            return cmd_solve(s_model, s_instance, s_out, s_aug8, s_prompt, s_k, s_starts);
        if (va->parsed()) return cmd_validate(v_instance, v_solution);
        if (ba->parsed()) return cmd_baseline(b_algo, b_data, b_csv);
        if (cv->parsed())
            return cmd_cvrplib(c_path, c_model, c_best, c_aug8, c_prompt, c_k, c_starts, c_csv);
        if (at->parsed()) return cmd_attn_stats(a_model, a_n, a_count, seed ? seed : 3, a_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
