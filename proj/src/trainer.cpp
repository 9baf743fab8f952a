#include "davrp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "davrp/checkpoint.hpp"
#include "davrp/rng.hpp"

namespace davrp {

double TrainConfig::lr_for_epoch(int epoch) const {
    double f = lr;
    for (int m : milestones)
        if (epoch > m) f *= lr_gamma;
    return f;
}

TrainConfig desk_profile() { return TrainConfig{}; }

TrainConfig paper_profile() {
    TrainConfig c;
    c.model.d_h = 128;
    c.model.n_heads = 8;
    c.model.n_layers = 6;
    c.model.d_ff = 512;
    c.model.d_prompt = 512;
    c.tasks.clear();
    for (const VariantSpec& v : VariantSpec::all16()) c.tasks.push_back(v.name());
    c.n = 100;
    c.batch = 256;
    c.instances_per_epoch = 100000;
    c.epochs = 300;
    return c;
}

void AdamW::init(const std::vector<ta::Param<float>*>& ps) {
    steps = 0;
    m.clear();
    v.clear();
    for (const auto* p : ps) {
        m.emplace_back(p->size(), 0.0f);
        v.emplace_back(p->size(), 0.0f);
    }
}

void AdamW::update(const std::vector<ta::Param<float>*>& ps, double lr) {
    if (m.size() != ps.size()) throw std::logic_error("AdamW not initialized for these params");
    ++steps;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
    for (std::size_t i = 0; i < ps.size(); ++i) {
        ta::Param<float>& p = *ps[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double g = p.grad[j];
            m[i][j] = static_cast<float>(beta1 * m[i][j] + (1.0 - beta1) * g);
            v[i][j] = static_cast<float>(beta2 * v[i][j] + (1.0 - beta2) * g * g);
            const double mh = m[i][j] / bc1;
            const double vh = v[i][j] / bc2;
            p.value[j] = static_cast<float>(
                p.value[j] - lr * (mh / (std::sqrt(vh) + eps) + weight_decay * p.value[j]));
        }
    }
}

void AdamW::save(const std::string& path, const std::vector<ta::Param<float>*>& ps) const {
    std::vector<ta::Param<float>> slots;
    slots.reserve(2 * ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
        ta::Param<float> pm;
        pm.name = "adam.m." + ps[i]->name;
        pm.shape = {static_cast<int>(m[i].size())};
        pm.value = m[i];
        slots.push_back(std::move(pm));
        ta::Param<float> pv;
        pv.name = "adam.v." + ps[i]->name;
        pv.shape = {static_cast<int>(v[i].size())};
        pv.value = v[i];
        slots.push_back(std::move(pv));
    }
    std::vector<const ta::Param<float>*> ptrs;
    for (auto& s : slots) ptrs.push_back(&s);
    save_tensors(path, ptrs, {{"steps", std::to_string(steps)}});
}

bool AdamW::load(const std::string& path, const std::vector<ta::Param<float>*>& ps) {
    if (!file_exists(path)) return false;
    init(ps);
    std::vector<ta::Param<float>> slots;
    slots.reserve(2 * ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
        ta::Param<float> pm;
        pm.name = "adam.m." + ps[i]->name;
        pm.shape = {static_cast<int>(ps[i]->size())};
        pm.value.resize(ps[i]->size());
        slots.push_back(std::move(pm));
        ta::Param<float> pv;
        pv.name = "adam.v." + ps[i]->name;
        pv.shape = {static_cast<int>(ps[i]->size())};
        pv.value.resize(ps[i]->size());
        slots.push_back(std::move(pv));
    }
    std::vector<ta::Param<float>*> ptrs;
    for (auto& s : slots) ptrs.push_back(&s);
    std::map<std::string, std::string> meta;
    load_tensors(path, ptrs, &meta);
    for (std::size_t i = 0; i < ps.size(); ++i) {
        m[i] = slots[2 * i].value;
        v[i] = slots[2 * i + 1].value;
    }
    if (auto it = meta.find("steps"); it != meta.end()) steps = std::stoll(it->second);
    return true;
}

std::vector<double> pomo_advantages(const std::vector<double>& rewards) {
    if (rewards.empty()) throw std::invalid_argument("no rewards");
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(rewards.size());
    std::vector<double> adv(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = rewards[i] - mean;
    return adv;
}

double clip_global_norm(const std::vector<ta::Param<float>*>& ps, double max_norm) {
    double sq = 0.0;
    for (const auto* p : ps)
        for (float g : p->grad) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const float s = static_cast<float>(max_norm / norm);
        for (auto* p : ps)
            for (float& g : p->grad) g *= s;
    }
    return norm;
}

StepStats reinforce_step(ModelParams<float>& mp, const std::vector<Problem>& batch,
                         int n_starts, AdamW& opt, double lr, double clip_norm,
                         std::mt19937_64& rng) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    mp.zero_grad();
    StepStats st;
    const float inv_b = 1.0f / static_cast<float>(batch.size());
    ta::Tape<float> tape;
    long traj_total = 0;
    for (const Problem& p : batch) {
        tape.reset();
        auto ro = rollout(tape, mp, p, n_starts, Decode::Sample, &rng);
        std::vector<double> adv = pomo_advantages(ro.rewards);
        std::vector<float> advf(adv.begin(), adv.end());
        const int S = static_cast<int>(adv.size());
        ta::Ten weighted = tape.mul(ro.logprob, tape.constant(advf, S, 1));
        ta::Ten loss = tape.scale(tape.mean_all(weighted), -1.0f);
        const double lval = tape.scalar(loss);
        if (!std::isfinite(lval)) throw std::runtime_error("non-finite training loss");
        st.loss += lval;
        for (double r : ro.rewards) st.mean_cost -= r;
        traj_total += S;
        tape.backward(tape.scale(loss, inv_b));
    }
    st.loss /= static_cast<double>(batch.size());
    st.mean_cost /= static_cast<double>(traj_total);
    auto ps = mp.all();
    st.grad_norm = clip_global_norm(ps, clip_norm);
    if (!std::isfinite(st.grad_norm)) throw std::runtime_error("non-finite gradient norm");
    opt.update(ps, lr);
    return st;
}

double validate_greedy(ModelParams<float>& mp, const std::vector<Problem>& set, int n_starts) {
    ta::Tape<float> tape;
    tape.set_grad_enabled(false);
    double total = 0.0;
    for (const Problem& p : set) {
        tape.reset();
        auto ro = rollout(tape, mp, p, n_starts, Decode::Greedy, nullptr);
        double best = ro.rewards[0];
        for (double r : ro.rewards) best = std::max(best, r);
        total += -best;
    }
    return total / static_cast<double>(set.size());
}

void train(const TrainConfig& cfg, std::ostream* progress) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    const std::string ckpt = cfg.out_dir + "/model.ckpt";
    const std::string optpath = cfg.out_dir + "/model.opt";
    const std::string metrics = cfg.out_dir + "/metrics.csv";

    std::vector<VariantSpec> tasks;
    for (const std::string& t : cfg.tasks) {
        auto v = VariantSpec::from_name(t);
        if (!v) throw std::invalid_argument("unknown task: " + t);
        tasks.push_back(*v);
    }
    if (tasks.empty()) throw std::invalid_argument("no tasks configured");

    ModelParams<float> mp = ModelParams<float>::make(cfg.model, mix64(cfg.seed, 0x1717));
    auto ps = mp.all();
    AdamW opt;
    opt.weight_decay = cfg.weight_decay;
    opt.init(ps);
    int start_epoch = 0;
    if (file_exists(ckpt)) {
        std::map<std::string, std::string> meta;
        load_tensors(ckpt, ps, &meta);
        if (auto it = meta.find("epoch"); it != meta.end()) start_epoch = std::stoi(it->second);
        opt.load(optpath, ps);
        if (progress) *progress << "resuming from epoch " << start_epoch << "\n";
    }

    GenOptions gen_opt;
    gen_opt.capacity_override = cfg.capacity_override;
    std::vector<std::vector<Problem>> val_sets(tasks.size());
    for (std::size_t ti = 0; ti < tasks.size(); ++ti)
        for (int i = 0; i < cfg.val_instances; ++i)
            val_sets[ti].push_back(Problem::from(
                generate_instance(cfg.n, tasks[ti], mix64(cfg.seed, 0x7a1, ti, i), gen_opt)));

    const bool fresh_csv = !file_exists(metrics);
    std::ofstream csv(metrics, std::ios::app);
    if (!csv) throw std::runtime_error("cannot open " + metrics);
    if (fresh_csv) csv << "epoch,variant,mean_cost,loss,lr\n";

    const int steps = std::max(1, cfg.instances_per_epoch / cfg.batch);
    for (int epoch = start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
        std::mt19937_64 rng(mix64(cfg.seed, 0xe90c4, epoch));
        const double lr = cfg.lr_for_epoch(epoch);
        double loss_sum = 0.0, cost_sum = 0.0;
        for (int stp = 0; stp < steps; ++stp) {
            const VariantSpec& var = tasks[rng() % tasks.size()];
            std::vector<Problem> batch;
            batch.reserve(cfg.batch);
            for (int i = 0; i < cfg.batch; ++i)
                batch.push_back(Problem::from(
                    generate_instance(cfg.n, var, mix64(cfg.seed, epoch, stp, i), gen_opt)));
            StepStats st =
                reinforce_step(mp, batch, cfg.starts(), opt, lr, cfg.clip_norm, rng);
            loss_sum += st.loss;
            cost_sum += st.mean_cost;
        }
        const double epoch_loss = loss_sum / steps;
        for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
            const double val = validate_greedy(mp, val_sets[ti], cfg.starts());
            csv << epoch << ',' << tasks[ti].name() << ',' << val << ',' << epoch_loss << ','
                << lr << '\n';
            if (progress)
                *progress << "[epoch " << epoch << "/" << cfg.epochs << "] " << tasks[ti].name()
                          << " val=" << val << " loss=" << epoch_loss
                          << " train_cost=" << cost_sum / steps << " lr=" << lr << std::endl;
        }
        csv.flush();

        auto meta = cfg.model.to_map();
        meta["epoch"] = std::to_string(epoch);
        meta["n"] = std::to_string(cfg.n);
        meta["seed"] = std::to_string(cfg.seed);
        std::vector<const ta::Param<float>*> cps(ps.begin(), ps.end());
        save_tensors(ckpt, cps, meta);
        opt.save(optpath, ps);
    }
}

ModelParams<float> load_model(const std::string& ckpt_path) {
    const auto meta = read_meta_file(ckpt_path + ".meta");
    if (meta.empty())
        throw std::runtime_error("missing or empty checkpoint sidecar " + ckpt_path + ".meta");
    ModelParams<float> mp = ModelParams<float>::make(ModelConfig::from_map(meta), 0);
    auto ps = mp.all();
    load_tensors(ckpt_path, ps);
    return mp;
}

void save_model(const std::string& ckpt_path, ModelParams<float>& mp,
                std::map<std::string, std::string> extra_meta) {
    auto meta = mp.cfg.to_map();
    for (auto& [k, v] : extra_meta) meta[k] = v;
    auto ps = mp.all();
    std::vector<const ta::Param<float>*> cps(ps.begin(), ps.end());
    save_tensors(ckpt_path, cps, meta);
}

}  // namespace davrp
