#pragma once

// Reverse-mode autodiff on a flat tape. Tensors are rank-2 (rows x cols);
// scalars are 1x1. Templated on the scalar type so the same graph code runs
// in float for training and in double for finite-difference checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <cblas.h>

namespace davrp::ta {

void use_single_thread_blas();  // idempotent, called by Tape constructor

template <typename T>
inline constexpr T neg_inf = -std::numeric_limits<T>::infinity();

template <typename T>
struct Param {
    std::string name;
    std::vector<int> shape;  // rank 1 or 2
    std::vector<T> value;
    std::vector<T> grad;

    int rows() const { return shape.size() == 2 ? shape[0] : 1; }
    int cols() const { return shape.size() == 2 ? shape[1] : shape[0]; }
    std::size_t size() const { return value.size(); }
};

struct Ten {
    int id = -1;
    int rows = 0, cols = 0;
    std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

namespace detail {

template <typename T>
void gemm(bool ta, bool tb, int m, int n, int k, T alpha, const T* A, int lda, const T* B,
          int ldb, T beta, T* C, int ldc) {
    if constexpr (std::is_same_v<T, float>)
        cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                    m, n, k, alpha, A, lda, B, ldb, beta, C, ldc);
    else
        cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                    m, n, k, alpha, A, lda, B, ldb, beta, C, ldc);
}

// Column indices of the k largest entries in a row, ties to the lowest index.
template <typename T>
inline void topk_indices(const T* row, int cols, int k, std::vector<int>& idx) {
    idx.resize(cols);
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
        if (row[a] != row[b]) return row[a] > row[b];
        return a < b;
    });
    idx.resize(k);
}

}  // namespace detail

template <typename T>
class Tape {
  public:
    Tape() { use_single_thread_blas(); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    struct Node {
        int rows = 0, cols = 0;
        std::vector<T> val;
        std::vector<T> grad;            // allocated on first gradient write
        const T* ext_val = nullptr;     // set for parameter leaves
        T* ext_grad = nullptr;
        bool requires_grad = false;
        std::function<void(Tape&)> back;
    };

    void reset() {
        nodes_.clear();
        backward_done_ = false;
    }

    // With gradients disabled the tape records values only: parameter leaves
    // come in as constants and no backward closures are kept.
    void set_grad_enabled(bool on) { grad_enabled_ = on; }
    bool grad_enabled() const { return grad_enabled_; }

    std::size_t node_count() const { return nodes_.size(); }

    const T* val(Ten x) const {
        const Node& nd = nodes_[x.id];
        return nd.ext_val ? nd.ext_val : nd.val.data();
    }
    T scalar(Ten x) const {
        if (x.size() != 1) throw std::invalid_argument("scalar() on a non-scalar tensor");
        return val(x)[0];
    }
    std::vector<T> copy_values(Ten x) const {
        const T* p = val(x);
        return std::vector<T>(p, p + x.size());
    }

    // ---- leaves -------------------------------------------------------

    Ten param(Param<T>& p) {
        Ten t = fresh(p.rows(), p.cols(), grad_enabled_);
        Node& nd = nodes_[t.id];
        nd.ext_val = p.value.data();
        if (grad_enabled_) nd.ext_grad = p.grad.data();
        return t;
    }

    Ten constant(const T* data, int rows, int cols) {
        Ten t = fresh(rows, cols, false);
        nodes_[t.id].val.assign(data, data + t.size());
        return t;
    }
    Ten constant(const std::vector<T>& data, int rows, int cols) {
        if (data.size() != static_cast<std::size_t>(rows) * cols)
            throw std::invalid_argument("constant: size mismatch");
        return constant(data.data(), rows, cols);
    }
    template <typename U>
    Ten constant_cast(const std::vector<U>& data, int rows, int cols) {
        std::vector<T> tmp(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) tmp[i] = static_cast<T>(data[i]);
        return constant(tmp, rows, cols);
    }

    // ---- matrix products ----------------------------------------------

    Ten matmul(Ten a, Ten b) { return matmul_impl(a, b, false); }
    Ten matmul_nt(Ten a, Ten b) { return matmul_impl(a, b, true); }

    // ---- elementwise ----------------------------------------------------

    Ten add(Ten a, Ten b) {
        return binary(a, b, [](T x, T y) { return x + y; },
                      [](Tape& t, Ten a2, Ten b2, Ten y) {
                          const T* gy = t.grad_of(y);
                          if (T* ga = t.grad_acc(a2))
                              for (std::size_t i = 0; i < y.size(); ++i) ga[i] += gy[i];
                          if (T* gb = t.grad_acc(b2))
                              for (std::size_t i = 0; i < y.size(); ++i) gb[i] += gy[i];
                      });
    }

    Ten sub(Ten a, Ten b) {
        return binary(a, b, [](T x, T y) { return x - y; },
                      [](Tape& t, Ten a2, Ten b2, Ten y) {
                          const T* gy = t.grad_of(y);
                          if (T* ga = t.grad_acc(a2))
                              for (std::size_t i = 0; i < y.size(); ++i) ga[i] += gy[i];
                          if (T* gb = t.grad_acc(b2))
                              for (std::size_t i = 0; i < y.size(); ++i) gb[i] -= gy[i];
                      });
    }

    Ten mul(Ten a, Ten b) {
        return binary(a, b, [](T x, T y) { return x * y; },
                      [](Tape& t, Ten a2, Ten b2, Ten y) {
                          const T* gy = t.grad_of(y);
                          const T* av = t.val(a2);
                          const T* bv = t.val(b2);
                          if (T* ga = t.grad_acc(a2))
                              for (std::size_t i = 0; i < y.size(); ++i) ga[i] += gy[i] * bv[i];
                          if (T* gb = t.grad_acc(b2))
                              for (std::size_t i = 0; i < y.size(); ++i) gb[i] += gy[i] * av[i];
                      });
    }

    Ten scale(Ten a, T c) {
        Ten y = fresh_like(a);
        const T* av = val(a);
        T* yv = nodes_[y.id].val.data();
        for (std::size_t i = 0; i < y.size(); ++i) yv[i] = av[i] * c;
        attach(y, [a, y, c](Tape& t) {
            const T* gy = t.grad_of(y);
            if (T* ga = t.grad_acc(a))
                for (std::size_t i = 0; i < y.size(); ++i) ga[i] += gy[i] * c;
        });
        return y;
    }

    // b is a 1 x cols row vector added to every row of a.
    Ten add_bias(Ten a, Ten b) {
        if (b.rows != 1 || b.cols != a.cols) throw std::invalid_argument("add_bias: shape");
        Ten y = fresh_like(a);
        const T* av = val(a);
        const T* bv = val(b);
        T* yv = nodes_[y.id].val.data();
        for (int r = 0; r < a.rows; ++r)
            for (int c = 0; c < a.cols; ++c) yv[r * a.cols + c] = av[r * a.cols + c] + bv[c];
        attach(y, [a, b, y](Tape& t) {
            const T* gy = t.grad_of(y);
            if (T* ga = t.grad_acc(a))
                for (std::size_t i = 0; i < y.size(); ++i) ga[i] += gy[i];
            if (T* gb = t.grad_acc(b))
                for (int r = 0; r < y.rows; ++r)
                    for (int c = 0; c < y.cols; ++c) gb[c] += gy[r * y.cols + c];
        });
        return y;
    }

    Ten sigmoid(Ten a) {
        return unary(a, [](T x) { return T(1) / (T(1) + std::exp(-x)); },
                     [](Tape& t, Ten a2, Ten y) {
                         const T* gy = t.grad_of(y);
                         const T* yv = t.val(y);
                         if (T* ga = t.grad_acc(a2))
                             for (std::size_t i = 0; i < y.size(); ++i)
                                 ga[i] += gy[i] * yv[i] * (T(1) - yv[i]);
                     });
    }

    Ten silu(Ten a) {
        return unary(a,
                     [](T x) { return x / (T(1) + std::exp(-x)); },
                     [](Tape& t, Ten a2, Ten y) {
                         const T* gy = t.grad_of(y);
                         const T* xv = t.val(a2);
                         if (T* ga = t.grad_acc(a2))
                             for (std::size_t i = 0; i < y.size(); ++i) {
                                 const T s = T(1) / (T(1) + std::exp(-xv[i]));
                                 ga[i] += gy[i] * s * (T(1) + xv[i] * (T(1) - s));
                             }
                     });
    }

    Ten tanh_op(Ten a) {
        return unary(a, [](T x) { return std::tanh(x); },
                     [](Tape& t, Ten a2, Ten y) {
                         const T* gy = t.grad_of(y);
                         const T* yv = t.val(y);
                         if (T* ga = t.grad_acc(a2))
                             for (std::size_t i = 0; i < y.size(); ++i)
                                 ga[i] += gy[i] * (T(1) - yv[i] * yv[i]);
                     });
    }

    // ---- normalization ---------------------------------------------------

    static constexpr T norm_eps = static_cast<T>(1e-6);

    Ten rmsnorm(Ten a, Ten gain) {
        if (gain.rows != 1 || gain.cols != a.cols) throw std::invalid_argument("rmsnorm: gain shape");
        Ten y = fresh_like(a);
        const T* av = val(a);
        const T* gv = val(gain);
        T* yv = nodes_[y.id].val.data();
        const int C = a.cols;
        for (int r = 0; r < a.rows; ++r) {
            const T* x = av + static_cast<std::size_t>(r) * C;
            T ms = 0;
            for (int c = 0; c < C; ++c) ms += x[c] * x[c];
            ms /= C;
            const T inv = T(1) / std::sqrt(ms + norm_eps);
            for (int c = 0; c < C; ++c) yv[r * C + c] = x[c] * inv * gv[c];
        }
        attach(y, [a, gain, y](Tape& t) {
            const T* gy = t.grad_of(y);
            const T* av2 = t.val(a);
            const T* gv2 = t.val(gain);
            const int C = a.cols;
            T* ga = t.grad_acc(a);
            T* gg = t.grad_acc(gain);
            for (int r = 0; r < a.rows; ++r) {
                const T* x = av2 + static_cast<std::size_t>(r) * C;
                const T* g = gy + static_cast<std::size_t>(r) * C;
                T ms = 0;
                for (int c = 0; c < C; ++c) ms += x[c] * x[c];
                ms /= C;
                const T inv = T(1) / std::sqrt(ms + norm_eps);
                T w = 0;
                for (int c = 0; c < C; ++c) w += g[c] * gv2[c] * x[c];
                if (ga)
                    for (int c = 0; c < C; ++c)
                        ga[r * C + c] += inv * g[c] * gv2[c] - inv * inv * inv * x[c] * w / C;
                if (gg)
                    for (int c = 0; c < C; ++c) gg[c] += g[c] * x[c] * inv;
            }
        });
        return y;
    }

    // Per-row standardization without a learned affine part.
    Ten layernorm(Ten a) {
        Ten y = fresh_like(a);
        const T* av = val(a);
        T* yv = nodes_[y.id].val.data();
        const int C = a.cols;
        for (int r = 0; r < a.rows; ++r) {
            const T* x = av + static_cast<std::size_t>(r) * C;
            T mu = 0;
            for (int c = 0; c < C; ++c) mu += x[c];
            mu /= C;
            T var = 0;
            for (int c = 0; c < C; ++c) var += (x[c] - mu) * (x[c] - mu);
            var /= C;
            const T inv = T(1) / std::sqrt(var + norm_eps);
            for (int c = 0; c < C; ++c) yv[r * C + c] = (x[c] - mu) * inv;
        }
        attach(y, [a, y](Tape& t) {
            T* ga = t.grad_acc(a);
            if (!ga) return;
            const T* gy = t.grad_of(y);
            const T* av2 = t.val(a);
            const T* yv2 = t.val(y);
            const int C = a.cols;
            for (int r = 0; r < a.rows; ++r) {
                const T* x = av2 + static_cast<std::size_t>(r) * C;
                const T* g = gy + static_cast<std::size_t>(r) * C;
                const T* yr = yv2 + static_cast<std::size_t>(r) * C;
                T mu = 0;
                for (int c = 0; c < C; ++c) mu += x[c];
                mu /= C;
                T var = 0;
                for (int c = 0; c < C; ++c) var += (x[c] - mu) * (x[c] - mu);
                var /= C;
                const T inv = T(1) / std::sqrt(var + norm_eps);
                T gmean = 0, gymean = 0;
                for (int c = 0; c < C; ++c) {
                    gmean += g[c];
                    gymean += g[c] * yr[c];
                }
                gmean /= C;
                gymean /= C;
                for (int c = 0; c < C; ++c)
                    ga[r * C + c] += inv * (g[c] - gmean - yr[c] * gymean);
            }
        });
        return y;
    }

    // ---- row-wise normalizers -------------------------------------------

    // Entries equal to -inf are treated as masked out and get probability 0.
    // A row with no finite entry is an error (callers guarantee support).
    Ten softmax_rows(Ten a) {
        Ten y = fresh_like(a);
        const T* av = val(a);
        T* yv = nodes_[y.id].val.data();
        const int C = a.cols;
        for (int r = 0; r < a.rows; ++r) {
            const T* x = av + static_cast<std::size_t>(r) * C;
            T* p = yv + static_cast<std::size_t>(r) * C;
            T m = neg_inf<T>;
            for (int c = 0; c < C; ++c) m = std::max(m, x[c]);
            if (m == neg_inf<T>) throw std::domain_error("softmax row has empty support");
            T z = 0;
            for (int c = 0; c < C; ++c) {
                p[c] = x[c] == neg_inf<T> ? T(0) : std::exp(x[c] - m);
                z += p[c];
            }
            for (int c = 0; c < C; ++c) p[c] /= z;
        }
        attach(y, [a, y](Tape& t) {
            T* ga = t.grad_acc(a);
            if (!ga) return;
            const T* gy = t.grad_of(y);
            const T* yv2 = t.val(y);
            const int C = a.cols;
            for (int r = 0; r < a.rows; ++r) {
                const T* p = yv2 + static_cast<std::size_t>(r) * C;
                const T* g = gy + static_cast<std::size_t>(r) * C;
                T dot = 0;
                for (int c = 0; c < C; ++c) dot += g[c] * p[c];
                for (int c = 0; c < C; ++c) ga[r * C + c] += p[c] * (g[c] - dot);
            }
        });
        return y;
    }

    Ten log_softmax_rows(Ten a) {
        Ten y = fresh_like(a);
        const T* av = val(a);
        T* yv = nodes_[y.id].val.data();
        const int C = a.cols;
        for (int r = 0; r < a.rows; ++r) {
            const T* x = av + static_cast<std::size_t>(r) * C;
            T* o = yv + static_cast<std::size_t>(r) * C;
            T m = neg_inf<T>;
            for (int c = 0; c < C; ++c) m = std::max(m, x[c]);
            if (m == neg_inf<T>) throw std::domain_error("log_softmax row has empty support");
            T z = 0;
            for (int c = 0; c < C; ++c)
                if (x[c] != neg_inf<T>) z += std::exp(x[c] - m);
            const T lse = m + std::log(z);
            for (int c = 0; c < C; ++c) o[c] = x[c] == neg_inf<T> ? neg_inf<T> : x[c] - lse;
        }
        attach(y, [a, y](Tape& t) {
            T* ga = t.grad_acc(a);
            if (!ga) return;
            const T* gy = t.grad_of(y);
            const T* av2 = t.val(a);
            const T* yv2 = t.val(y);
            const int C = a.cols;
            for (int r = 0; r < a.rows; ++r) {
                const T* g = gy + static_cast<std::size_t>(r) * C;
                const T* o = yv2 + static_cast<std::size_t>(r) * C;
                const T* x = av2 + static_cast<std::size_t>(r) * C;
                T sg = 0;
                for (int c = 0; c < C; ++c) sg += g[c];
                for (int c = 0; c < C; ++c) {
                    if (x[c] == neg_inf<T>) continue;  // masked entry, constant output
                    ga[r * C + c] += g[c] - std::exp(o[c]) * sg;
                }
            }
        });
        return y;
    }

    Ten sparsemax_rows(Ten a) { return alpha_entmax(a, T(2)); }
    Ten entmax15_rows(Ten a) { return alpha_entmax(a, T(1.5)); }

    // ---- top-k ------------------------------------------------------------

    // Keep the k largest entries per row, fill the rest with -inf.
    Ten topk_mask(Ten a, int k) { return topk_impl(a, k, true); }
    // Keep the k largest entries per row, zero the rest.
    Ten topk_keep(Ten a, int k) { return topk_impl(a, k, false); }

    // ---- shape ops ---------------------------------------------------------

    Ten concat_rows(const std::vector<Ten>& parts) {
        if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
        int rows = 0;
        const int cols = parts[0].cols;
        for (Ten p : parts) {
            if (p.cols != cols) throw std::invalid_argument("concat_rows: column mismatch");
            rows += p.rows;
        }
        Ten y = fresh(rows, cols, any_requires(parts));
        T* yv = nodes_[y.id].val.data();
        std::size_t off = 0;
        for (Ten p : parts) {
            std::copy_n(val(p), p.size(), yv + off);
            off += p.size();
        }
        attach(y, [parts, y](Tape& t) {
            const T* gy = t.grad_of(y);
            std::size_t off2 = 0;
            for (Ten p : parts) {
                if (T* gp = t.grad_acc(p))
                    for (std::size_t i = 0; i < p.size(); ++i) gp[i] += gy[off2 + i];
                off2 += p.size();
            }
        });
        return y;
    }

    Ten concat_cols(const std::vector<Ten>& parts) {
        if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
        const int rows = parts[0].rows;
        int cols = 0;
        for (Ten p : parts) {
            if (p.rows != rows) throw std::invalid_argument("concat_cols: row mismatch");
            cols += p.cols;
        }
        Ten y = fresh(rows, cols, any_requires(parts));
        T* yv = nodes_[y.id].val.data();
        int coff = 0;
        for (Ten p : parts) {
            const T* pv = val(p);
            for (int r = 0; r < rows; ++r)
                std::copy_n(pv + static_cast<std::size_t>(r) * p.cols, p.cols,
                            yv + static_cast<std::size_t>(r) * cols + coff);
            coff += p.cols;
        }
        attach(y, [parts, y](Tape& t) {
            const T* gy = t.grad_of(y);
            int coff2 = 0;
            for (Ten p : parts) {
                if (T* gp = t.grad_acc(p))
                    for (int r = 0; r < p.rows; ++r)
                        for (int c = 0; c < p.cols; ++c)
                            gp[r * p.cols + c] += gy[static_cast<std::size_t>(r) * y.cols + coff2 + c];
                coff2 += p.cols;
            }
        });
        return y;
    }

    Ten slice_rows(Ten a, int r0, int r1) {
        if (r0 < 0 || r1 > a.rows || r0 >= r1) throw std::invalid_argument("slice_rows: range");
        Ten y = fresh(r1 - r0, a.cols, nodes_[a.id].requires_grad);
        std::copy_n(val(a) + static_cast<std::size_t>(r0) * a.cols, y.size(),
                    nodes_[y.id].val.data());
        attach(y, [a, y, r0](Tape& t) {
            const T* gy = t.grad_of(y);
            if (T* ga = t.grad_acc(a))
                for (std::size_t i = 0; i < y.size(); ++i)
                    ga[static_cast<std::size_t>(r0) * a.cols + i] += gy[i];
        });
        return y;
    }

    Ten slice_cols(Ten a, int c0, int c1) {
        if (c0 < 0 || c1 > a.cols || c0 >= c1) throw std::invalid_argument("slice_cols: range");
        Ten y = fresh(a.rows, c1 - c0, nodes_[a.id].requires_grad);
        const T* av = val(a);
        T* yv = nodes_[y.id].val.data();
        for (int r = 0; r < a.rows; ++r)
            std::copy_n(av + static_cast<std::size_t>(r) * a.cols + c0, y.cols,
                        yv + static_cast<std::size_t>(r) * y.cols);
        attach(y, [a, y, c0](Tape& t) {
            const T* gy = t.grad_of(y);
            if (T* ga = t.grad_acc(a))
                for (int r = 0; r < y.rows; ++r)
                    for (int c = 0; c < y.cols; ++c)
                        ga[static_cast<std::size_t>(r) * a.cols + c0 + c] +=
                            gy[static_cast<std::size_t>(r) * y.cols + c];
        });
        return y;
    }

    Ten gather_rows(Ten a, std::vector<int> rows) {
        for (int r : rows)
            if (r < 0 || r >= a.rows) throw std::invalid_argument("gather_rows: index");
        Ten y = fresh(static_cast<int>(rows.size()), a.cols, nodes_[a.id].requires_grad);
        const T* av = val(a);
        T* yv = nodes_[y.id].val.data();
        for (std::size_t i = 0; i < rows.size(); ++i)
            std::copy_n(av + static_cast<std::size_t>(rows[i]) * a.cols, a.cols,
                        yv + i * a.cols);
        attach(y, [a, y, rows = std::move(rows)](Tape& t) {
            const T* gy = t.grad_of(y);
            if (T* ga = t.grad_acc(a))
                for (std::size_t i = 0; i < rows.size(); ++i)
                    for (int c = 0; c < a.cols; ++c)
                        ga[static_cast<std::size_t>(rows[i]) * a.cols + c] +=
                            gy[i * a.cols + c];
        });
        return y;
    }

    // out[i] = a[i, cols[i]]; result is (rows x 1).
    Ten gather_per_row(Ten a, std::vector<int> cols) {
        if (static_cast<int>(cols.size()) != a.rows)
            throw std::invalid_argument("gather_per_row: needs one column per row");
        for (int c : cols)
            if (c < 0 || c >= a.cols) throw std::invalid_argument("gather_per_row: index");
        Ten y = fresh(a.rows, 1, nodes_[a.id].requires_grad);
        const T* av = val(a);
        T* yv = nodes_[y.id].val.data();
        for (int r = 0; r < a.rows; ++r) yv[r] = av[static_cast<std::size_t>(r) * a.cols + cols[r]];
        attach(y, [a, y, cols = std::move(cols)](Tape& t) {
            const T* gy = t.grad_of(y);
            if (T* ga = t.grad_acc(a))
                for (int r = 0; r < y.rows; ++r)
                    ga[static_cast<std::size_t>(r) * a.cols + cols[r]] += gy[r];
        });
        return y;
    }

    // ---- reductions ---------------------------------------------------------

    Ten sum_all(Ten a) {
        Ten y = fresh(1, 1, nodes_[a.id].requires_grad);
        const T* av = val(a);
        T acc = 0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += av[i];
        nodes_[y.id].val[0] = acc;
        attach(y, [a, y](Tape& t) {
            const T g = t.grad_of(y)[0];
            if (T* ga = t.grad_acc(a))
                for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g;
        });
        return y;
    }

    Ten mean_all(Ten a) {
        Ten s = sum_all(a);
        return scale(s, T(1) / static_cast<T>(a.size()));
    }

    // ---- backward ------------------------------------------------------------

    void backward(Ten loss) {
        if (backward_done_) throw std::logic_error("backward already ran; reset the tape first");
        if (loss.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
        if (!nodes_[loss.id].requires_grad)
            throw std::invalid_argument("backward: loss does not depend on any parameter");
        backward_done_ = true;
        ensure_grad(loss.id);
        grad_storage(loss.id)[0] = T(1);
        for (int i = loss.id; i >= 0; --i) {
            Node& nd = nodes_[i];
            if (nd.back && has_grad(i)) nd.back(*this);
        }
    }

    bool backward_ran() const { return backward_done_; }

    // Gradient buffer of `x` for accumulation, or nullptr when `x` does not
    // require gradients. Exposed for op closures.
    T* grad_acc(Ten x) {
        Node& nd = nodes_[x.id];
        if (!nd.requires_grad) return nullptr;
        if (nd.ext_grad) return nd.ext_grad;
        ensure_grad(x.id);
        return nd.grad.data();
    }
    const T* grad_of(Ten x) {
        ensure_grad(x.id);
        return nodes_[x.id].ext_grad ? nodes_[x.id].ext_grad : nodes_[x.id].grad.data();
    }
    std::vector<T> copy_grad(Ten x) {
        const T* g = grad_of(x);
        return std::vector<T>(g, g + x.size());
    }

  private:
    std::vector<Node> nodes_;
    bool backward_done_ = false;
    bool grad_enabled_ = true;

    Ten fresh(int rows, int cols, bool requires_grad) {
        if (rows <= 0 || cols <= 0) throw std::invalid_argument("tensor dims must be positive");
        Node nd;
        nd.rows = rows;
        nd.cols = cols;
        nd.requires_grad = requires_grad && grad_enabled_;
        nd.val.resize(static_cast<std::size_t>(rows) * cols);
        nodes_.push_back(std::move(nd));
        return Ten{static_cast<int>(nodes_.size()) - 1, rows, cols};
    }
    Ten fresh_like(Ten a) { return fresh(a.rows, a.cols, nodes_[a.id].requires_grad); }

    bool any_requires(const std::vector<Ten>& parts) const {
        for (Ten p : parts)
            if (nodes_[p.id].requires_grad) return true;
        return false;
    }

    void ensure_grad(int id) {
        Node& nd = nodes_[id];
        if (nd.ext_grad) return;
        if (nd.grad.empty()) nd.grad.assign(nd.val.size(), T(0));
    }
    bool has_grad(int id) const {
        const Node& nd = nodes_[id];
        return nd.ext_grad != nullptr || !nd.grad.empty();
    }
    T* grad_storage(int id) {
        Node& nd = nodes_[id];
        return nd.ext_grad ? nd.ext_grad : nd.grad.data();
    }

    void attach(Ten y, std::function<void(Tape&)> back) {
        if (nodes_[y.id].requires_grad) nodes_[y.id].back = std::move(back);
    }

    template <typename FwdFn, typename BackFn>
    Ten unary(Ten a, FwdFn f, BackFn bk) {
        Ten y = fresh_like(a);
        const T* av = val(a);
        T* yv = nodes_[y.id].val.data();
        for (std::size_t i = 0; i < y.size(); ++i) yv[i] = f(av[i]);
        attach(y, [a, y, bk](Tape& t) { bk(t, a, y); });
        return y;
    }

    template <typename FwdFn, typename BackFn>
    Ten binary(Ten a, Ten b, FwdFn f, BackFn bk) {
        if (a.rows != b.rows || a.cols != b.cols)
            throw std::invalid_argument("elementwise op: shape mismatch");
        Ten y = fresh(a.rows, a.cols,
                      nodes_[a.id].requires_grad || nodes_[b.id].requires_grad);
        const T* av = val(a);
        const T* bv = val(b);
        T* yv = nodes_[y.id].val.data();
        for (std::size_t i = 0; i < y.size(); ++i) yv[i] = f(av[i], bv[i]);
        attach(y, [a, b, y, bk](Tape& t) { bk(t, a, b, y); });
        return y;
    }

    Ten matmul_impl(Ten a, Ten b, bool nt) {
        const int k = nt ? b.cols : b.rows;
        if (a.cols != k) throw std::invalid_argument("matmul: inner dims");
        const int out_cols = nt ? b.rows : b.cols;
        Ten y = fresh(a.rows, out_cols,
                      nodes_[a.id].requires_grad || nodes_[b.id].requires_grad);
        detail::gemm<T>(false, nt, a.rows, out_cols, a.cols, T(1), val(a), a.cols, val(b),
                        b.cols, T(0), nodes_[y.id].val.data(), out_cols);
        attach(y, [a, b, y, nt](Tape& t) {
            const T* gy = t.grad_of(y);
            const T* av = t.val(a);
            const T* bv = t.val(b);
            if (T* ga = t.grad_acc(a)) {
                // dA = dY * B^T  (nn)   |  dA = dY * B  (nt)
                detail::gemm<T>(false, !nt, y.rows, a.cols, y.cols, T(1), gy, y.cols, bv,
                                b.cols, T(1), ga, a.cols);
            }
            if (T* gb = t.grad_acc(b)) {
                if (!nt)  // dB = A^T * dY
                    detail::gemm<T>(true, false, b.rows, b.cols, a.rows, T(1), av, a.cols, gy,
                                    y.cols, T(1), gb, b.cols);
                else  // dB = dY^T * A
                    detail::gemm<T>(true, false, b.rows, b.cols, a.rows, T(1), gy, y.cols, av,
                                    a.cols, T(1), gb, b.cols);
            }
        });
        return y;
    }

    Ten topk_impl(Ten a, int k, bool fill_neg_inf) {
        if (k <= 0) throw std::invalid_argument("topk: k must be positive");
        Ten y = fresh_like(a);
        const int C = a.cols;
        const int kk = std::min(k, C);
        const T* av = val(a);
        T* yv = nodes_[y.id].val.data();
        auto kept = std::make_shared<std::vector<int>>(static_cast<std::size_t>(a.rows) * kk);
        std::vector<int> idx;
        for (int r = 0; r < a.rows; ++r) {
            const T* x = av + static_cast<std::size_t>(r) * C;
            T* o = yv + static_cast<std::size_t>(r) * C;
            detail::topk_indices(x, C, kk, idx);
            const T fill = fill_neg_inf ? neg_inf<T> : T(0);
            for (int c = 0; c < C; ++c) o[c] = fill;
            for (int j = 0; j < kk; ++j) {
                o[idx[j]] = x[idx[j]];
                (*kept)[static_cast<std::size_t>(r) * kk + j] = idx[j];
            }
        }
        attach(y, [a, y, kk, kept](Tape& t) {
            const T* gy = t.grad_of(y);
            if (T* ga = t.grad_acc(a))
                for (int r = 0; r < y.rows; ++r)
                    for (int j = 0; j < kk; ++j) {
                        const int c = (*kept)[static_cast<std::size_t>(r) * kk + j];
                        ga[static_cast<std::size_t>(r) * y.cols + c] +=
                            gy[static_cast<std::size_t>(r) * y.cols + c];
                    }
        });
        return y;
    }

    // Exact alpha-entmax for alpha in {1.5, 2}. Masked (-inf) entries get
    // probability zero. alpha==2 is sparsemax, alpha==1.5 the 1.5-entmax.
    Ten alpha_entmax(Ten a, T alpha) {
        Ten y = fresh_like(a);
        const int C = a.cols;
        const T* av = val(a);
        T* yv = nodes_[y.id].val.data();
        std::vector<T> z;
        std::vector<int> ord;
        for (int r = 0; r < a.rows; ++r) {
            const T* x = av + static_cast<std::size_t>(r) * C;
            T* p = yv + static_cast<std::size_t>(r) * C;
            z.clear();
            ord.clear();
            for (int c = 0; c < C; ++c)
                if (x[c] != neg_inf<T>) {
                    z.push_back(alpha == T(2) ? x[c] : x[c] / T(2));
                    ord.push_back(c);
                }
            if (z.empty()) throw std::domain_error("entmax row has empty support");
            // sort the finite entries descending
            std::vector<int> perm(z.size());
            std::iota(perm.begin(), perm.end(), 0);
            std::sort(perm.begin(), perm.end(), [&](int i, int j) { return z[i] > z[j]; });
            T tau;
            if (alpha == T(2)) {
                T cum = 0, tau_k = 0;
                int support = 0;
                for (std::size_t j = 0; j < perm.size(); ++j) {
                    const T zj = z[perm[j]];
                    cum += zj;
                    const T cand = (cum - T(1)) / static_cast<T>(j + 1);
                    if (zj > cand) {
                        support = static_cast<int>(j + 1);
                        tau_k = cand;
                    }
                }
                (void)support;
                tau = tau_k;
                for (int c = 0; c < C; ++c) p[c] = T(0);
                for (std::size_t j = 0; j < z.size(); ++j)
                    p[ord[j]] = std::max(z[j] - tau, T(0));
            } else {
                T s = 0, ss = 0, tau_k = 0;
                for (std::size_t j = 0; j < perm.size(); ++j) {
                    const T zj = z[perm[j]];
                    s += zj;
                    ss += zj * zj;
                    const T k = static_cast<T>(j + 1);
                    const T mean = s / k;
                    T delta = (T(1) - (ss - s * mean)) / k;
                    if (delta < T(0)) delta = T(0);
                    const T cand = mean - std::sqrt(delta);
                    if (cand <= zj) tau_k = cand;
                }
                tau = tau_k;
                for (int c = 0; c < C; ++c) p[c] = T(0);
                for (std::size_t j = 0; j < z.size(); ++j) {
                    const T q = std::max(z[j] - tau, T(0));
                    p[ord[j]] = q * q;
                }
            }
        }
        attach(y, [a, y, alpha](Tape& t) {
            T* ga = t.grad_acc(a);
            if (!ga) return;
            const T* gy = t.grad_of(y);
            const T* pv = t.val(y);
            const int C2 = y.cols;
            for (int r = 0; r < y.rows; ++r) {
                const T* p = pv + static_cast<std::size_t>(r) * C2;
                const T* g = gy + static_cast<std::size_t>(r) * C2;
                // J = diag(s) - s s^T / sum(s) with s_i = p_i^(2 - alpha)
                T ssum = 0, gdot = 0;
                std::vector<T> s(C2, T(0));
                for (int c = 0; c < C2; ++c)
                    if (p[c] > T(0)) {
                        s[c] = alpha == T(2) ? T(1) : std::sqrt(p[c]);
                        ssum += s[c];
                        gdot += g[c] * s[c];
                    }
                for (int c = 0; c < C2; ++c)
                    if (s[c] > T(0)) ga[r * C2 + c] += s[c] * (g[c] - gdot / ssum);
            }
        });
        return y;
    }
};

// sigma(x W1 + b1) (.) SiLU(x W2 + b2) — the gated feed-forward core.
template <typename T>
Ten swiglu(Tape<T>& t, Ten x, Ten w1, Ten b1, Ten w2, Ten b2) {
    Ten gate = t.sigmoid(t.add_bias(t.matmul(x, w1), b1));
    Ten act = t.silu(t.add_bias(t.matmul(x, w2), b2));
    return t.mul(gate, act);
}

}  // namespace davrp::ta
