#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "davrp/generator.hpp"
#include "davrp/model.hpp"

namespace davrp {

struct TrainConfig {
    ModelConfig model;
    std::vector<std::string> tasks{"cvrp"};
    int n = 20;
    int capacity_override = 0;
    int batch = 64;
    int instances_per_epoch = 10000;
    int epochs = 20;
    int n_starts = 0;  // 0 -> one start per customer
    double lr = 3e-4;
    double weight_decay = 1e-6;
    double clip_norm = 1.0;
    double lr_gamma = 0.1;
    std::vector<int> milestones{270, 295};
    int val_instances = 256;
    std::uint64_t seed = 1;
    std::string out_dir = "run";

    int starts() const { return n_starts > 0 ? n_starts : n; }
    double lr_for_epoch(int epoch) const;  // epoch is 1-based
};

// Small desk-scale setup that trains in well under an hour on one core.
TrainConfig desk_profile();
// Full-scale setup matching the published training recipe.
TrainConfig paper_profile();

struct AdamW {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double weight_decay = 1e-6;
    long long steps = 0;
    std::vector<std::vector<float>> m, v;

    void init(const std::vector<ta::Param<float>*>& ps);
    void update(const std::vector<ta::Param<float>*>& ps, double lr);
    void save(const std::string& path, const std::vector<ta::Param<float>*>& ps) const;
    bool load(const std::string& path, const std::vector<ta::Param<float>*>& ps);
};

// Shared-baseline advantages: reward minus the mean over the start set.
std::vector<double> pomo_advantages(const std::vector<double>& rewards);

// Scales gradients so their global L2 norm is at most max_norm; returns the
// pre-clip norm.
double clip_global_norm(const std::vector<ta::Param<float>*>& ps, double max_norm);

struct StepStats {
    double loss = 0.0;
    double grad_norm = 0.0;
    double mean_cost = 0.0;
};

// One REINFORCE update over a batch of instances: sampled multi-start
// rollouts, shared-baseline advantages, mean surrogate loss, clipped AdamW.
StepStats reinforce_step(ModelParams<float>& mp, const std::vector<Problem>& batch,
                         int n_starts, AdamW& opt, double lr, double clip_norm,
                         std::mt19937_64& rng);

// Mean best-of-starts greedy cost over a fixed instance set.
double validate_greedy(ModelParams<float>& mp, const std::vector<Problem>& set, int n_starts);

// Full training loop with per-epoch validation, metrics.csv logging and
// atomic, resumable checkpoints under cfg.out_dir.
void train(const TrainConfig& cfg, std::ostream* progress = nullptr);

// Rebuilds a model from a checkpoint written by train() (the sidecar carries
// the architecture).
ModelParams<float> load_model(const std::string& ckpt_path);
void save_model(const std::string& ckpt_path, ModelParams<float>& mp,
                std::map<std::string, std::string> extra_meta = {});

}  // namespace davrp
