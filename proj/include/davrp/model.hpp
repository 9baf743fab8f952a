#pragma once

// Constructive routing policy: a prompt-conditioned dual-branch transformer
// encoder over the node set plus an autoregressive masked pointer decoder.
// Everything is templated on the scalar type so gradient checks can run the
// exact same graph in double precision.

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <unordered_map>

#include "davrp/env.hpp"
#include "davrp/tensor.hpp"

namespace davrp {

enum class SparseFn { Softmax, Entmax15, Sparsemax };
enum class TopkStyle { Logits, Literal };
enum class PromptPos { Global, Sparse };

struct ModelConfig {
    int d_h = 64;       // embedding width
    int n_heads = 4;
    int n_layers = 3;
    int d_ff = 256;     // gated feed-forward hidden width
    int d_prompt = 0;   // prompt MLP hidden width, 0 -> 4*d_h
    double clip = 10.0; // logit clipping scale
    int top_k = 0;      // sparse-branch fan-in, 0 -> ceil(n/2) per instance
    SparseFn sparse_fn = SparseFn::Softmax;
    TopkStyle topk_style = TopkStyle::Logits;
    PromptPos prompt_pos = PromptPos::Global;
    bool use_prompt = true;  // false: the prompt row is an all-zero constant
    bool use_sparse = true;  // false: single dense branch, no fusion

    int prompt_hidden() const { return d_prompt > 0 ? d_prompt : 4 * d_h; }
    int head_dim() const {
        if (d_h % n_heads != 0) throw std::invalid_argument("d_h must divide into heads");
        return d_h / n_heads;
    }
    int effective_k(int n_customers) const {
        return top_k > 0 ? top_k : (n_customers + 1) / 2;
    }

    std::map<std::string, std::string> to_map() const;
    static ModelConfig from_map(const std::map<std::string, std::string>& m);
};

inline const char* to_string(SparseFn f) {
    switch (f) {
        case SparseFn::Softmax: return "softmax";
        case SparseFn::Entmax15: return "entmax15";
        case SparseFn::Sparsemax: return "sparsemax";
    }
    return "?";
}
inline const char* to_string(TopkStyle s) {
    return s == TopkStyle::Logits ? "logits" : "literal";
}
inline const char* to_string(PromptPos p) {
    return p == PromptPos::Global ? "global" : "sparse";
}

inline SparseFn sparse_fn_from(const std::string& s) {
    if (s == "softmax") return SparseFn::Softmax;
    if (s == "entmax15") return SparseFn::Entmax15;
    if (s == "sparsemax") return SparseFn::Sparsemax;
    throw std::invalid_argument("unknown sparse function: " + s);
}
inline TopkStyle topk_style_from(const std::string& s) {
    if (s == "logits") return TopkStyle::Logits;
    if (s == "literal") return TopkStyle::Literal;
    throw std::invalid_argument("unknown top-k style: " + s);
}
inline PromptPos prompt_pos_from(const std::string& s) {
    if (s == "global") return PromptPos::Global;
    if (s == "sparse") return PromptPos::Sparse;
    throw std::invalid_argument("unknown prompt position: " + s);
}

inline std::map<std::string, std::string> ModelConfig::to_map() const {
    std::map<std::string, std::string> m;
    m["d_h"] = std::to_string(d_h);
    m["n_heads"] = std::to_string(n_heads);
    m["n_layers"] = std::to_string(n_layers);
    m["d_ff"] = std::to_string(d_ff);
    m["d_prompt"] = std::to_string(d_prompt);
    m["clip"] = std::to_string(clip);
    m["top_k"] = std::to_string(top_k);
    m["sparse_fn"] = to_string(sparse_fn);
    m["topk_style"] = to_string(topk_style);
    m["prompt_pos"] = to_string(prompt_pos);
    m["use_prompt"] = use_prompt ? "1" : "0";
    m["use_sparse"] = use_sparse ? "1" : "0";
    return m;
}

inline ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& m) {
    ModelConfig c;
    auto geti = [&](const char* k, int dflt) {
        auto it = m.find(k);
        return it == m.end() ? dflt : std::stoi(it->second);
    };
    c.d_h = geti("d_h", c.d_h);
    c.n_heads = geti("n_heads", c.n_heads);
    c.n_layers = geti("n_layers", c.n_layers);
    c.d_ff = geti("d_ff", c.d_ff);
    c.d_prompt = geti("d_prompt", c.d_prompt);
    c.top_k = geti("top_k", c.top_k);
    if (auto it = m.find("clip"); it != m.end()) c.clip = std::stod(it->second);
    if (auto it = m.find("sparse_fn"); it != m.end()) c.sparse_fn = sparse_fn_from(it->second);
    if (auto it = m.find("topk_style"); it != m.end()) c.topk_style = topk_style_from(it->second);
    if (auto it = m.find("prompt_pos"); it != m.end()) c.prompt_pos = prompt_pos_from(it->second);
    if (auto it = m.find("use_prompt"); it != m.end()) c.use_prompt = it->second != "0";
    if (auto it = m.find("use_sparse"); it != m.end()) c.use_sparse = it->second != "0";
    return c;
}

template <typename T>
struct ModelParams {
    ModelConfig cfg;
    std::vector<std::unique_ptr<ta::Param<T>>> store;

    ta::Param<T>& at(const std::string& name) {
        for (auto& p : store)
            if (p->name == name) return *p;
        throw std::out_of_range("no parameter named " + name);
    }

    std::vector<ta::Param<T>*> all() {
        std::vector<ta::Param<T>*> v;
        v.reserve(store.size());
        for (auto& p : store) v.push_back(p.get());
        return v;
    }
    std::vector<const ta::Param<T>*> all() const {
        std::vector<const ta::Param<T>*> v;
        v.reserve(store.size());
        for (auto& p : store) v.push_back(p.get());
        return v;
    }

    void zero_grad() {
        for (auto& p : store) std::fill(p->grad.begin(), p->grad.end(), T(0));
    }

    std::size_t param_count() const {
        std::size_t c = 0;
        for (auto& p : store) c += p->size();
        return c;
    }

    template <typename U>
    ModelParams<U> cast() const {
        ModelParams<U> out;
        out.cfg = cfg;
        for (auto& p : store) {
            auto q = std::make_unique<ta::Param<U>>();
            q->name = p->name;
            q->shape = p->shape;
            q->value.resize(p->value.size());
            for (std::size_t i = 0; i < p->value.size(); ++i)
                q->value[i] = static_cast<U>(p->value[i]);
            q->grad.assign(q->value.size(), U(0));
            out.store.push_back(std::move(q));
        }
        return out;
    }

    static ModelParams make(const ModelConfig& cfg, std::uint64_t seed) {
        ModelParams mp;
        mp.cfg = cfg;
        std::mt19937_64 rng(seed);
        auto mk = [&](const std::string& name, std::vector<int> shape, bool is_gain = false) {
            auto p = std::make_unique<ta::Param<T>>();
            p->name = name;
            p->shape = shape;
            std::size_t total = 1;
            for (int d : shape) total *= static_cast<std::size_t>(d);
            p->value.resize(total);
            p->grad.assign(total, T(0));
            if (is_gain) {
                std::fill(p->value.begin(), p->value.end(), T(1));
            } else {
                const int fan_in = shape.size() == 2 ? shape[0] : shape[0];
                const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
                std::uniform_real_distribution<double> u(-bound, bound);
                for (auto& v : p->value) v = static_cast<T>(u(rng));
            }
            mp.store.push_back(std::move(p));
        };
        const int d = cfg.d_h, da = cfg.prompt_hidden(), dff = cfg.d_ff;

        mk("prompt.Wa", {5, da});
        mk("prompt.ba", {da});
        mk("prompt.Wb", {da, d});
        mk("prompt.bb", {d});
        mk("embed.W", {7, d});
        mk("embed.b", {d});
        for (int l = 0; l < cfg.n_layers; ++l) {
            const std::string base = "enc." + std::to_string(l) + ".";
            for (const char* br : {"g.", "s."}) {
                const std::string b = base + br;
                mk(b + "Wq", {d, d});
                mk(b + "Wk", {d, d});
                mk(b + "Wv", {d, d});
                mk(b + "Wo", {d, d});
                mk(b + "norm1", {d}, true);
                mk(b + "ff.W1", {d, dff});
                mk(b + "ff.b1", {dff});
                mk(b + "ff.W2", {d, dff});
                mk(b + "ff.b2", {dff});
                mk(b + "ff.Wp", {dff, d});
                mk(b + "ff.bp", {d});
                mk(b + "norm2", {d}, true);
            }
            mk(base + "fuse.Ws", {d, d});
            mk(base + "fuse.bs", {d});
            mk(base + "fuse.Wg", {d, d});
            mk(base + "fuse.bg", {d});
        }
        mk("dec.Wc", {d + 5, d});
        mk("dec.Wq", {d, d});
        mk("dec.Wk", {d, d});
        mk("dec.Wv", {d, d});
        mk("dec.Wo", {d, d});
        mk("dec.Wk_final", {d, d});
        return mp;
    }
};

// Per-head attention snapshot taken during encoding (values only).
struct AttnRecord {
    int layer = 0;
    char branch = 'g';
    int head = 0;
    int rows = 0, cols = 0;
    std::vector<double> w;  // row-major rows x cols
};

struct AttnRecorder {
    std::vector<AttnRecord> records;
};

namespace model_detail {

// One leaf node per parameter per tape, shared by all uses on that tape.
template <typename T>
struct Binder {
    ta::Tape<T>* tape;
    ModelParams<T>* mp;
    std::unordered_map<const ta::Param<T>*, ta::Ten> cache;

    ta::Ten operator()(const std::string& name) {
        ta::Param<T>& p = mp->at(name);
        auto it = cache.find(&p);
        if (it != cache.end()) return it->second;
        ta::Ten t = tape->param(p);
        cache.emplace(&p, t);
        return t;
    }
};

template <typename T>
ta::Ten normalize_scores(ta::Tape<T>& t, ta::Ten scores, bool sparse, const ModelConfig& cfg,
                         int k) {
    if (!sparse) return t.softmax_rows(scores);
    ta::Ten pre = scores;
    if (cfg.topk_style == TopkStyle::Literal) pre = t.topk_keep(t.softmax_rows(scores), k);
    else pre = t.topk_mask(scores, k);
    switch (cfg.sparse_fn) {
        case SparseFn::Softmax: return t.softmax_rows(pre);
        case SparseFn::Entmax15: return t.entmax15_rows(pre);
        case SparseFn::Sparsemax: return t.sparsemax_rows(pre);
    }
    throw std::logic_error("unreachable");
}

// Self-attention + gated feed-forward with post-norm residuals.
template <typename T>
ta::Ten encoder_block(ta::Tape<T>& t, Binder<T>& P, const std::string& prefix, ta::Ten X,
                      const ModelConfig& cfg, bool sparse, int k, AttnRecorder* rec, int layer,
                      char branch_tag) {
    const int dk = cfg.head_dim();
    const T inv_sqrt_dk = T(1) / std::sqrt(static_cast<T>(dk));
    ta::Ten Q = t.matmul(X, P(prefix + "Wq"));
    ta::Ten K = t.matmul(X, P(prefix + "Wk"));
    ta::Ten V = t.matmul(X, P(prefix + "Wv"));
    std::vector<ta::Ten> heads;
    heads.reserve(cfg.n_heads);
    for (int h = 0; h < cfg.n_heads; ++h) {
        ta::Ten Qh = t.slice_cols(Q, h * dk, (h + 1) * dk);
        ta::Ten Kh = t.slice_cols(K, h * dk, (h + 1) * dk);
        ta::Ten Vh = t.slice_cols(V, h * dk, (h + 1) * dk);
        ta::Ten scores = t.scale(t.matmul_nt(Qh, Kh), inv_sqrt_dk);
        ta::Ten A = normalize_scores(t, scores, sparse, cfg, k);
        if (rec) {
            AttnRecord r;
            r.layer = layer;
            r.branch = branch_tag;
            r.head = h;
            r.rows = A.rows;
            r.cols = A.cols;
            auto vals = t.copy_values(A);
            r.w.assign(vals.begin(), vals.end());
            rec->records.push_back(std::move(r));
        }
        heads.push_back(t.matmul(A, Vh));
    }
    ta::Ten att = t.matmul(t.concat_cols(heads), P(prefix + "Wo"));
    ta::Ten X1 = t.rmsnorm(t.add(X, att), P(prefix + "norm1"));
    ta::Ten core = ta::swiglu(t, X1, P(prefix + "ff.W1"), P(prefix + "ff.b1"),
                              P(prefix + "ff.W2"), P(prefix + "ff.b2"));
    ta::Ten ff = t.add_bias(t.matmul(core, P(prefix + "ff.Wp")), P(prefix + "ff.bp"));
    return t.rmsnorm(t.add(X1, ff), P(prefix + "norm2"));
}

}  // namespace model_detail

template <typename T>
struct EncodeOut {
    ta::Ten H;  // (n+1) x d_h node embeddings fed to the decoder
    ta::Ten P;  // 1 x d_h prompt embedding after the last layer
};

// Raw node features: [x, y, linehaul demand', backhaul magnitude', window
// start, window end, service time]; attributes the variant does not carry
// are zero.
inline std::vector<double> node_features(const Problem& p) {
    const int nodes = p.inst.num_nodes();
    std::vector<double> f(static_cast<std::size_t>(nodes) * 7, 0.0);
    const bool tw = p.inst.variant.time_window;
    for (int i = 0; i < nodes; ++i) {
        double* row = f.data() + static_cast<std::size_t>(i) * 7;
        row[0] = p.inst.xs[i];
        row[1] = p.inst.ys[i];
        row[2] = std::max(p.norm_demand[i], 0.0);
        row[3] = std::max(-p.norm_demand[i], 0.0);
        if (tw) {
            row[4] = p.inst.tw_start[i];
            row[5] = p.inst.tw_end[i];
            row[6] = p.inst.service[i];
        }
    }
    return f;
}

// Prompt vector -> 1 x d_h embedding (Linear, LayerNorm, Linear).
template <typename T>
ta::Ten embed_prompt(ta::Tape<T>& t, model_detail::Binder<T>& P,
                     const std::array<double, 5>& multi_hot) {
    std::vector<double> v(multi_hot.begin(), multi_hot.end());
    ta::Ten vin = t.template constant_cast<double>(v, 1, 5);
    ta::Ten hidden = t.layernorm(t.add_bias(t.matmul(vin, P("prompt.Wa")), P("prompt.ba")));
    return t.add_bias(t.matmul(hidden, P("prompt.Wb")), P("prompt.bb"));
}

template <typename T>
EncodeOut<T> encode(ta::Tape<T>& t, ModelParams<T>& mp, const Problem& p,
                    AttnRecorder* rec = nullptr,
                    const std::array<double, 5>* prompt_override = nullptr) {
    const ModelConfig& cfg = mp.cfg;
    const int n = p.inst.num_customers();
    const int n_nodes = n + 1;
    model_detail::Binder<T> P{&t, &mp, {}};

    ta::Ten feats = t.template constant_cast<double>(node_features(p), n_nodes, 7);
    ta::Ten H0 = t.add_bias(t.matmul(feats, P("embed.W")), P("embed.b"));

    ta::Ten prompt;
    if (cfg.use_prompt) {
        const std::array<double, 5> mh =
            prompt_override ? *prompt_override : p.inst.variant.multi_hot();
        prompt = embed_prompt(t, P, mh);
    } else {
        std::vector<T> zeros(static_cast<std::size_t>(cfg.d_h), T(0));
        prompt = t.constant(zeros, 1, cfg.d_h);
    }

    const int k = cfg.effective_k(n);
    ta::Ten Hg = H0, Hs = H0, Pc = prompt;

    for (int l = 0; l < cfg.n_layers; ++l) {
        const std::string base = "enc." + std::to_string(l) + ".";
        if (!cfg.use_sparse) {
            ta::Ten X = t.concat_rows({Hg, Pc});
            ta::Ten Y = model_detail::encoder_block(t, P, base + "g.", X, cfg, false, 0, rec, l, 'g');
            Hg = t.slice_rows(Y, 0, n_nodes);
            Pc = t.slice_rows(Y, n_nodes, n_nodes + 1);
            continue;
        }
        const bool prompt_in_sparse = cfg.prompt_pos == PromptPos::Sparse;
        ta::Ten Xg = prompt_in_sparse ? Hg : t.concat_rows({Hg, Pc});
        ta::Ten Xs = prompt_in_sparse ? t.concat_rows({Hs, Pc}) : Hs;
        ta::Ten Yg = model_detail::encoder_block(t, P, base + "g.", Xg, cfg, false, 0, rec, l, 'g');
        ta::Ten Ys = model_detail::encoder_block(t, P, base + "s.", Xs, cfg, true, k, rec, l, 's');
        ta::Ten Hg1, Hs1;
        if (prompt_in_sparse) {
            Hg1 = Yg;
            Hs1 = t.slice_rows(Ys, 0, n_nodes);
            Pc = t.slice_rows(Ys, n_nodes, n_nodes + 1);
        } else {
            Hg1 = t.slice_rows(Yg, 0, n_nodes);
            Pc = t.slice_rows(Yg, n_nodes, n_nodes + 1);
            Hs1 = Ys;
        }
        // cross-branch fusion on the node streams only
        ta::Ten gs = t.add_bias(t.matmul(Hs1, P(base + "fuse.Ws")), P(base + "fuse.bs"));
        ta::Ten sg = t.add_bias(t.matmul(Hg1, P(base + "fuse.Wg")), P(base + "fuse.bg"));
        Hg = t.add(Hg1, gs);
        Hs = t.add(Hs1, sg);
    }
    return {Hg, Pc};
}

template <typename T>
struct DecoderCache {
    ta::Ten H;
    std::vector<ta::Ten> Kh, Vh;  // per-head key/value projections of H
    ta::Ten Kfin;                 // final pointer keys
    model_detail::Binder<T> bind;
};

template <typename T>
DecoderCache<T> build_decoder_cache(ta::Tape<T>& t, ModelParams<T>& mp, ta::Ten H) {
    DecoderCache<T> c{H, {}, {}, {}, {&t, &mp, {}}};
    const int dk = mp.cfg.head_dim();
    ta::Ten K = t.matmul(H, c.bind("dec.Wk"));
    ta::Ten V = t.matmul(H, c.bind("dec.Wv"));
    for (int h = 0; h < mp.cfg.n_heads; ++h) {
        c.Kh.push_back(t.slice_cols(K, h * dk, (h + 1) * dk));
        c.Vh.push_back(t.slice_cols(V, h * dk, (h + 1) * dk));
    }
    c.Kfin = t.matmul(H, c.bind("dec.Wk_final"));
    return c;
}

// One decoding step for a batch of trajectories: returns log-probabilities
// over nodes, shape S x (n+1). `step_feats` is S x 5 raw state scalars
// [cap_line, cap_back, clock, len_left, open]; `mask` holds 0 for feasible
// and -inf for masked entries.
template <typename T>
ta::Ten decode_logprobs(ta::Tape<T>& t, ModelParams<T>& mp, DecoderCache<T>& cache,
                        const std::vector<int>& last_nodes, const std::vector<T>& step_feats,
                        const std::vector<T>& mask) {
    const ModelConfig& cfg = mp.cfg;
    const int S = static_cast<int>(last_nodes.size());
    const int n_nodes = cache.H.rows;
    const int dk = cfg.head_dim();
    auto& P = cache.bind;

    ta::Ten feats = t.constant(step_feats, S, 5);
    ta::Ten mask_t = t.constant(mask, S, n_nodes);
    ta::Ten hl = t.gather_rows(cache.H, last_nodes);
    ta::Ten hc = t.matmul(t.concat_cols({hl, feats}), P("dec.Wc"));

    ta::Ten Q = t.matmul(hc, P("dec.Wq"));
    const T inv_sqrt_dk = T(1) / std::sqrt(static_cast<T>(dk));
    std::vector<ta::Ten> heads;
    heads.reserve(cfg.n_heads);
    for (int h = 0; h < cfg.n_heads; ++h) {
        ta::Ten Qh = t.slice_cols(Q, h * dk, (h + 1) * dk);
        ta::Ten scores = t.add(t.scale(t.matmul_nt(Qh, cache.Kh[h]), inv_sqrt_dk), mask_t);
        heads.push_back(t.matmul(t.softmax_rows(scores), cache.Vh[h]));
    }
    ta::Ten qc = t.matmul(t.concat_cols(heads), P("dec.Wo"));

    const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(cfg.d_h));
    ta::Ten u = t.scale(t.tanh_op(t.scale(t.matmul_nt(qc, cache.Kfin), inv_sqrt_d)),
                        static_cast<T>(cfg.clip));
    return t.log_softmax_rows(t.add(u, mask_t));
}

enum class Decode { Greedy, Sample };

struct ReplayPlan {
    std::vector<std::vector<int>> actions;           // [step][traj]
    std::vector<std::vector<std::uint8_t>> counted;  // 1 where log-prob contributes
};

template <typename T>
struct RolloutResult {
    std::vector<Solution> solutions;   // one per trajectory
    std::vector<double> rewards;       // negative cost
    ta::Ten logprob;                   // S x 1 summed log-probabilities
    ReplayPlan plan;                   // enough to re-run teacher-forced
};

// Multi-start rollout. All trajectories start at the depot; with S >= 2 the
// first decoded action of trajectory j is forced to customer (j mod n) + 1
// when that customer is feasible. Forced actions contribute no log-prob.
template <typename T>
RolloutResult<T> rollout(ta::Tape<T>& t, ModelParams<T>& mp, const Problem& p, int n_starts,
                         Decode mode, std::mt19937_64* rng,
                         const std::array<double, 5>* prompt_override = nullptr,
                         const ReplayPlan* replay = nullptr, AttnRecorder* rec = nullptr) {
    const int n = p.inst.num_customers();
    const int n_nodes = n + 1;
    const int S = n_starts;
    if (S <= 0) throw std::invalid_argument("rollout: n_starts must be positive");
    if (mode == Decode::Sample && rng == nullptr && replay == nullptr)
        throw std::invalid_argument("rollout: sampling needs an rng");

    EncodeOut<T> enc = encode(t, mp, p, rec, prompt_override);
    DecoderCache<T> cache = build_decoder_cache(t, mp, enc.H);

    std::vector<State> states = reset(p, S);
    RolloutResult<T> out;
    out.logprob = ta::Ten{};
    const T NEG = ta::neg_inf<T>;

    std::vector<T> feats(static_cast<std::size_t>(S) * 5);
    std::vector<T> mask(static_cast<std::size_t>(S) * n_nodes);
    std::vector<int> last(S), act(S);
    std::vector<std::uint8_t> counted(S);

    const int max_steps = 2 * n + 4;
    for (int step_idx = 0; step_idx <= max_steps; ++step_idx) {
        bool all_done = true;
        for (const State& s : states) all_done &= s.done;
        if (all_done) break;
        if (step_idx == max_steps) throw std::logic_error("rollout failed to terminate");

        for (int s = 0; s < S; ++s) {
            const State& st = states[s];
            last[s] = st.last_node;
            T* f = feats.data() + static_cast<std::size_t>(s) * 5;
            f[0] = static_cast<T>(st.cap_linehaul);
            f[1] = static_cast<T>(st.cap_backhaul);
            f[2] = static_cast<T>(st.clock);
            f[3] = static_cast<T>(st.route_len_left);
            f[4] = p.inst.variant.open_route ? T(1) : T(0);
            T* m = mask.data() + static_cast<std::size_t>(s) * n_nodes;
            if (st.done) {  // keep the row well-formed: depot only
                m[0] = T(0);
                for (int a = 1; a < n_nodes; ++a) m[a] = NEG;
            } else {
                ActionMask am = feasible_actions(st, p);
                for (int a = 0; a < n_nodes; ++a) m[a] = am.feasible[a] ? T(0) : NEG;
            }
        }

        ta::Ten lp = decode_logprobs(t, mp, cache, last, feats, mask);
        const T* lpv = t.val(lp);

        for (int s = 0; s < S; ++s) {
            const T* row = lpv + static_cast<std::size_t>(s) * n_nodes;
            const T* mrow = mask.data() + static_cast<std::size_t>(s) * n_nodes;
            if (replay) {
                act[s] = replay->actions[step_idx][s];
                counted[s] = replay->counted[step_idx][s];
                continue;
            }
            if (states[s].done) {
                act[s] = 0;
                counted[s] = 0;
                continue;
            }
            counted[s] = 1;
            if (step_idx == 0 && S >= 2) {
                const int want = (s % n) + 1;
                if (mrow[want] == T(0)) {
                    act[s] = want;
                    counted[s] = 0;
                    continue;
                }
            }
            if (mode == Decode::Greedy) {
                int best = -1;
                T bv = NEG;
                for (int a = 0; a < n_nodes; ++a)
                    if (mrow[a] == T(0) && row[a] > bv) {
                        bv = row[a];
                        best = a;
                    }
                act[s] = best;
            } else {
                std::vector<double> w(n_nodes, 0.0);
                for (int a = 0; a < n_nodes; ++a)
                    if (mrow[a] == T(0)) w[a] = std::exp(static_cast<double>(row[a]));
                std::discrete_distribution<int> dist(w.begin(), w.end());
                act[s] = dist(*rng);
            }
        }

        ta::Ten chosen = t.gather_per_row(lp, act);
        std::vector<T> ind(S);
        for (int s = 0; s < S; ++s) ind[s] = counted[s] ? T(1) : T(0);
        ta::Ten contrib = t.mul(chosen, t.constant(ind, S, 1));
        out.logprob = out.logprob.id < 0 ? contrib : t.add(out.logprob, contrib);

        out.plan.actions.push_back(act);
        out.plan.counted.push_back(counted);
        for (int s = 0; s < S; ++s)
            if (!states[s].done) step(states[s], act[s], p);
    }

    out.solutions.reserve(S);
    out.rewards.reserve(S);
    for (State& st : states) {
        Solution sol = make_solution(st.sequence, p);
        out.rewards.push_back(reward(sol, p));
        out.solutions.push_back(std::move(sol));
    }
    return out;
}

}  // namespace davrp
