#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "davrp/tensor.hpp"

using namespace davrp;

namespace {

ta::Param<double> make_param(const std::string& name, int rows, int cols, std::mt19937_64& rng,
                             double lo = -1.0, double hi = 1.0) {
    ta::Param<double> p;
    p.name = name;
    p.shape = rows == 1 ? std::vector<int>{cols} : std::vector<int>{rows, cols};
    std::uniform_real_distribution<double> u(lo, hi);
    p.value.resize(static_cast<std::size_t>(rows) * cols);
    for (auto& v : p.value) v = u(rng);
    p.grad.assign(p.value.size(), 0.0);
    return p;
}

double rel(double a, double b, double floor_ = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor_});
}

// Compares analytic gradients of a scalar-valued graph against central
// differences for every component of every listed parameter.
template <typename Fn>
void fd_vs_analytic(std::vector<ta::Param<double>*> ps, Fn&& make_loss, double tol = 1e-6,
                    double eps = 1e-6) {
    for (auto* p : ps) std::fill(p->grad.begin(), p->grad.end(), 0.0);
    {
        ta::Tape<double> t;
        t.backward(make_loss(t));
    }
    auto eval = [&] {
        ta::Tape<double> t;
        t.set_grad_enabled(false);
        return t.scalar(make_loss(t));
    };
    for (auto* p : ps)
        for (std::size_t j = 0; j < p->size(); ++j) {
            const double saved = p->value[j];
            p->value[j] = saved + eps;
            const double up = eval();
            p->value[j] = saved - eps;
            const double dn = eval();
            p->value[j] = saved;
            const double fd = (up - dn) / (2.0 * eps);
            INFO(p->name, "[", j, "]: analytic=", p->grad[j], " numeric=", fd);
            CHECK(rel(p->grad[j], fd) <= tol);
        }
}

std::vector<double> fixed_weights(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> w(static_cast<std::size_t>(rows) * cols);
    for (auto& v : w) v = u(rng);
    return w;
}

// Reference tau by bisection on sum_i max(z_i - tau, 0)^(1/(alpha-1)) = 1.
std::vector<double> entmax_bisect(std::vector<double> z, double alpha) {
    if (alpha == 1.5)
        for (auto& v : z) v /= 2.0;
    const double expo = 1.0 / (alpha - 1.0);
    double zmax = -1e300;
    for (double v : z) zmax = std::max(zmax, v);
    double lo = zmax - 1.0, hi = zmax;
    auto mass = [&](double tau) {
        double s = 0.0;
        for (double v : z) s += std::pow(std::max(v - tau, 0.0), expo);
        return s;
    };
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (mass(mid) >= 1.0 ? lo : hi) = mid;
    }
    const double tau = 0.5 * (lo + hi);
    std::vector<double> p(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::pow(std::max(z[i] - tau, 0.0), expo);
    return p;
}

}  // namespace

TEST_CASE("softmax values on a frozen row") {
    ta::Tape<double> t;
    ta::Ten x = t.constant({2.0, 1.0, 0.5}, 1, 3);
    auto p = t.copy_values(t.softmax_rows(x));
    CHECK(p[0] == doctest::Approx(0.62853172).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(0.23122390).epsilon(1e-6));
    CHECK(p[2] == doctest::Approx(0.14024438).epsilon(1e-6));
    CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("masked entries get exactly zero probability") {
    ta::Tape<double> t;
    const double ninf = ta::neg_inf<double>;
    ta::Ten x = t.constant({ninf, 3.0}, 1, 2);
    auto p = t.copy_values(t.softmax_rows(x));
    CHECK(p[0] == 0.0);
    CHECK(p[1] == 1.0);
    auto lp = t.copy_values(t.log_softmax_rows(x));
    CHECK(lp[0] == ninf);
    CHECK(lp[1] == 0.0);

    ta::Ten dead = t.constant({ninf, ninf}, 1, 2);
    CHECK_THROWS_AS(t.softmax_rows(dead), std::domain_error);
    CHECK_THROWS_AS(t.log_softmax_rows(dead), std::domain_error);
    CHECK_THROWS_AS(t.sparsemax_rows(dead), std::domain_error);
    CHECK_THROWS_AS(t.entmax15_rows(dead), std::domain_error);
}

TEST_CASE("sparsemax on a frozen row") {
    ta::Tape<double> t;
    ta::Ten x = t.constant({1.2, 0.8, -0.3, -1.0}, 1, 4);
    auto p = t.copy_values(t.sparsemax_rows(x));
    CHECK(p[0] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(p[2] == 0.0);
    CHECK(p[3] == 0.0);
}

TEST_CASE("sparse normalizers agree with the bisection reference") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (double alpha : {2.0, 1.5}) {
        for (int rep = 0; rep < 200; ++rep) {
            const int c = 2 + static_cast<int>(rng() % 7);
            std::vector<double> z(c);
            for (auto& v : z) v = u(rng);
            ta::Tape<double> t;
            ta::Ten x = t.constant(z, 1, c);
            auto p = t.copy_values(alpha == 2.0 ? t.sparsemax_rows(x) : t.entmax15_rows(x));
            auto ref = entmax_bisect(z, alpha);
            double sum = 0.0;
            for (int i = 0; i < c; ++i) {
                CHECK(p[i] >= 0.0);
                CHECK(std::abs(p[i] - ref[i]) <= 1e-8);
                sum += p[i];
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
        }
    }
}

TEST_CASE("sparse normalizers honor -inf masks") {
    std::mt19937_64 rng(29);
    const double ninf = ta::neg_inf<double>;
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> z = {1.0, ninf, 0.3, -0.5, ninf};
        for (auto& v : z)
            if (v != ninf) v += 0.01 * static_cast<double>(rng() % 100);
        ta::Tape<double> t;
        ta::Ten x = t.constant(z, 1, 5);
        for (auto fn : {&ta::Tape<double>::sparsemax_rows, &ta::Tape<double>::entmax15_rows}) {
            auto p = t.copy_values((t.*fn)(x));
            CHECK(p[1] == 0.0);
            CHECK(p[4] == 0.0);
            CHECK(p[0] + p[2] + p[3] == doctest::Approx(1.0).epsilon(1e-10));
        }
    }
}

TEST_CASE("top-k keeps the k largest, ties to the lowest index") {
    ta::Tape<double> t;
    const double ninf = ta::neg_inf<double>;
    ta::Ten x = t.constant({2.0, 1.0, 0.5}, 1, 3);
    auto masked = t.copy_values(t.topk_mask(x, 2));
    CHECK(masked == std::vector<double>{2.0, 1.0, ninf});
    auto sm = t.copy_values(t.softmax_rows(t.topk_mask(x, 2)));
    CHECK(sm[0] == doctest::Approx(0.73105858).epsilon(1e-7));
    CHECK(sm[1] == doctest::Approx(0.26894142).epsilon(1e-7));
    CHECK(sm[2] == 0.0);

    auto kept = t.copy_values(t.topk_keep(x, 2));
    CHECK(kept == std::vector<double>{2.0, 1.0, 0.0});

    ta::Ten ties = t.constant({1.0, 1.0, 1.0}, 1, 3);
    auto tk = t.copy_values(t.topk_mask(ties, 2));
    CHECK(tk == std::vector<double>{1.0, 1.0, ninf});

    auto all = t.copy_values(t.topk_mask(x, 5));  // k beyond width is a no-op
    CHECK(all == std::vector<double>{2.0, 1.0, 0.5});
    CHECK_THROWS_AS(t.topk_mask(x, 0), std::invalid_argument);
}

TEST_CASE("matmul gradients, both orientations") {
    std::mt19937_64 rng(5);
    auto A = make_param("A", 3, 4, rng);
    auto B = make_param("B", 4, 2, rng);
    auto W = fixed_weights(3, 2, 100);
    fd_vs_analytic({&A, &B}, [&](ta::Tape<double>& t) {
        ta::Ten y = t.matmul(t.param(A), t.param(B));
        return t.sum_all(t.mul(y, t.constant(W, 3, 2)));
    });

    auto C = make_param("C", 5, 4, rng);
    auto W2 = fixed_weights(3, 5, 101);
    fd_vs_analytic({&A, &C}, [&](ta::Tape<double>& t) {
        ta::Ten y = t.matmul_nt(t.param(A), t.param(C));  // 3x4 * (5x4)^T
        return t.sum_all(t.mul(y, t.constant(W2, 3, 5)));
    });
}

TEST_CASE("elementwise and bias gradients") {
    std::mt19937_64 rng(6);
    auto A = make_param("A", 3, 4, rng);
    auto B = make_param("B", 3, 4, rng);
    auto bias = make_param("b", 1, 4, rng);
    auto W = fixed_weights(3, 4, 102);
    auto weigh = [&](ta::Tape<double>& t, ta::Ten y) {
        return t.sum_all(t.mul(y, t.constant(W, 3, 4)));
    };
    fd_vs_analytic({&A, &B}, [&](ta::Tape<double>& t) {
        return weigh(t, t.add(t.param(A), t.param(B)));
    });
    fd_vs_analytic({&A, &B}, [&](ta::Tape<double>& t) {
        return weigh(t, t.sub(t.param(A), t.param(B)));
    });
    fd_vs_analytic({&A, &B}, [&](ta::Tape<double>& t) {
        return weigh(t, t.mul(t.param(A), t.param(B)));
    });
    fd_vs_analytic({&A}, [&](ta::Tape<double>& t) {
        return weigh(t, t.scale(t.param(A), -1.7));
    });
    fd_vs_analytic({&A, &bias}, [&](ta::Tape<double>& t) {
        return weigh(t, t.add_bias(t.param(A), t.param(bias)));
    });
}

TEST_CASE("activation gradients") {
    std::mt19937_64 rng(7);
    auto A = make_param("A", 2, 6, rng, -2.0, 2.0);
    auto W = fixed_weights(2, 6, 103);
    auto weigh = [&](ta::Tape<double>& t, ta::Ten y) {
        return t.sum_all(t.mul(y, t.constant(W, 2, 6)));
    };
    fd_vs_analytic({&A}, [&](ta::Tape<double>& t) { return weigh(t, t.sigmoid(t.param(A))); });
    fd_vs_analytic({&A}, [&](ta::Tape<double>& t) { return weigh(t, t.silu(t.param(A))); });
    fd_vs_analytic({&A}, [&](ta::Tape<double>& t) { return weigh(t, t.tanh_op(t.param(A))); });
}

TEST_CASE("normalization gradients") {
    std::mt19937_64 rng(8);
    auto A = make_param("A", 3, 5, rng);
    auto gain = make_param("g", 1, 5, rng, 0.5, 1.5);
    auto W = fixed_weights(3, 5, 104);
    auto weigh = [&](ta::Tape<double>& t, ta::Ten y) {
        return t.sum_all(t.mul(y, t.constant(W, 3, 5)));
    };
    fd_vs_analytic({&A, &gain}, [&](ta::Tape<double>& t) {
        return weigh(t, t.rmsnorm(t.param(A), t.param(gain)));
    });
    fd_vs_analytic({&A}, [&](ta::Tape<double>& t) { return weigh(t, t.layernorm(t.param(A))); });
}

TEST_CASE("normalizer gradients, with and without masks") {
    std::mt19937_64 rng(9);
    auto A = make_param("A", 2, 5, rng);
    auto W = fixed_weights(2, 5, 105);
    const double ninf = ta::neg_inf<double>;
    std::vector<double> maskv = {0, 0, ninf, 0, 0, ninf, 0, 0, 0, 0};
    auto weigh = [&](ta::Tape<double>& t, ta::Ten y) {
        return t.sum_all(t.mul(y, t.constant(W, 2, 5)));
    };
    fd_vs_analytic({&A}, [&](ta::Tape<double>& t) {
        return weigh(t, t.softmax_rows(t.param(A)));
    });
    fd_vs_analytic({&A}, [&](ta::Tape<double>& t) {
        return weigh(t, t.softmax_rows(t.add(t.param(A), t.constant(maskv, 2, 5))));
    });
    fd_vs_analytic({&A}, [&](ta::Tape<double>& t) {
        ta::Ten y = t.log_softmax_rows(t.add(t.param(A), t.constant(maskv, 2, 5)));
        // only touch open entries: the -inf outputs poison any sum they join
        ta::Ten acc = t.scale(t.gather_per_row(y, {0, 1}), 0.35);
        acc = t.add(acc, t.scale(t.gather_per_row(y, {1, 2}), -0.6));
        acc = t.add(acc, t.scale(t.gather_per_row(y, {3, 3}), 0.8));
        acc = t.add(acc, t.scale(t.gather_per_row(y, {4, 4}), -0.25));
        return t.sum_all(acc);
    });
}

TEST_CASE("sparse normalizer gradients away from support boundaries") {
    // margins are large relative to the step so the support set is stable
    ta::Param<double> A;
    A.name = "A";
    A.shape = {2, 4};
    A.value = {1.2, 0.8, -0.3, -1.0, 0.9, -0.6, 0.4, -1.4};
    A.grad.assign(8, 0.0);
    auto W = fixed_weights(2, 4, 106);
    auto weigh = [&](ta::Tape<double>& t, ta::Ten y) {
        return t.sum_all(t.mul(y, t.constant(W, 2, 4)));
    };
    fd_vs_analytic({&A}, [&](ta::Tape<double>& t) {
        return weigh(t, t.sparsemax_rows(t.param(A)));
    }, 1e-5, 1e-7);
    fd_vs_analytic({&A}, [&](ta::Tape<double>& t) {
        return weigh(t, t.entmax15_rows(t.param(A)));
    }, 1e-5, 1e-7);
}

TEST_CASE("top-k gradients flow only through kept entries") {
    ta::Param<double> A;
    A.name = "A";
    A.shape = {2, 4};
    A.value = {2.0, 1.0, 0.2, -0.9, 1.5, -0.2, 0.7, 0.1};
    A.grad.assign(8, 0.0);
    auto W = fixed_weights(2, 4, 107);
    auto weigh = [&](ta::Tape<double>& t, ta::Ten y) {
        return t.sum_all(t.mul(y, t.constant(W, 2, 4)));
    };
    fd_vs_analytic({&A}, [&](ta::Tape<double>& t) {
        return weigh(t, t.softmax_rows(t.topk_mask(t.param(A), 2)));
    }, 1e-5, 1e-7);
    fd_vs_analytic({&A}, [&](ta::Tape<double>& t) {
        return weigh(t, t.topk_keep(t.param(A), 3));
    }, 1e-5, 1e-7);
}

TEST_CASE("shape op gradients") {
    std::mt19937_64 rng(10);
    auto A = make_param("A", 3, 4, rng);
    auto B = make_param("B", 2, 4, rng);
    auto C = make_param("C", 3, 2, rng);
    fd_vs_analytic({&A, &B}, [&](ta::Tape<double>& t) {
        ta::Ten y = t.concat_rows({t.param(A), t.param(B)});
        return t.sum_all(t.mul(y, t.constant(fixed_weights(5, 4, 108), 5, 4)));
    });
    fd_vs_analytic({&A, &C}, [&](ta::Tape<double>& t) {
        ta::Ten y = t.concat_cols({t.param(A), t.param(C)});
        return t.sum_all(t.mul(y, t.constant(fixed_weights(3, 6, 109), 3, 6)));
    });
    fd_vs_analytic({&A}, [&](ta::Tape<double>& t) {
        ta::Ten y = t.slice_rows(t.param(A), 1, 3);
        return t.sum_all(t.mul(y, t.constant(fixed_weights(2, 4, 110), 2, 4)));
    });
    fd_vs_analytic({&A}, [&](ta::Tape<double>& t) {
        ta::Ten y = t.slice_cols(t.param(A), 1, 3);
        return t.sum_all(t.mul(y, t.constant(fixed_weights(3, 2, 111), 3, 2)));
    });
    fd_vs_analytic({&A}, [&](ta::Tape<double>& t) {
        ta::Ten y = t.gather_rows(t.param(A), {2, 0, 2});
        return t.sum_all(t.mul(y, t.constant(fixed_weights(3, 4, 112), 3, 4)));
    });
    fd_vs_analytic({&A}, [&](ta::Tape<double>& t) {
        ta::Ten y = t.gather_per_row(t.param(A), {3, 0, 2});
        return t.sum_all(t.mul(y, t.constant(fixed_weights(3, 1, 113), 3, 1)));
    });
    fd_vs_analytic({&A}, [&](ta::Tape<double>& t) { return t.mean_all(t.param(A)); });
}

TEST_CASE("gated feed-forward composite gradient") {
    std::mt19937_64 rng(11);
    auto X = make_param("X", 3, 4, rng);
    auto W1 = make_param("W1", 4, 6, rng);
    auto b1 = make_param("b1", 1, 6, rng);
    auto W2 = make_param("W2", 4, 6, rng);
    auto b2 = make_param("b2", 1, 6, rng);
    auto W = fixed_weights(3, 6, 114);
    fd_vs_analytic({&X, &W1, &b1, &W2, &b2}, [&](ta::Tape<double>& t) {
        ta::Ten y = ta::swiglu(t, t.param(X), t.param(W1), t.param(b1), t.param(W2), t.param(b2));
        return t.sum_all(t.mul(y, t.constant(W, 3, 6)));
    });
}

TEST_CASE("a parameter used twice accumulates both paths") {
    std::mt19937_64 rng(12);
    auto A = make_param("A", 2, 2, rng);
    fd_vs_analytic({&A}, [&](ta::Tape<double>& t) {
        ta::Ten a = t.param(A);
        return t.sum_all(t.mul(a, a));  // d/dA sum(A*A) = 2A
    });
    ta::Tape<double> t;
    std::fill(A.grad.begin(), A.grad.end(), 0.0);
    t.backward(t.sum_all(t.mul(t.param(A), t.param(A))));
    for (std::size_t i = 0; i < A.size(); ++i)
        CHECK(A.grad[i] == doctest::Approx(2.0 * A.value[i]).epsilon(1e-12));
}

TEST_CASE("tape discipline") {
    std::mt19937_64 rng(13);
    auto A = make_param("A", 2, 2, rng);
    ta::Tape<double> t;
    ta::Ten loss = t.sum_all(t.param(A));
    t.backward(loss);
    CHECK(t.backward_ran());
    CHECK_THROWS_AS(t.backward(loss), std::logic_error);
    t.reset();
    CHECK(!t.backward_ran());
    CHECK(t.node_count() == 0);

    ta::Ten c = t.constant({1.0, 2.0}, 1, 2);
    CHECK_THROWS_AS(t.backward(t.sum_all(c)), std::invalid_argument);  // no parameters
    CHECK_THROWS_AS(t.scalar(c), std::invalid_argument);

    ta::Ten m = t.param(A);
    CHECK_THROWS_AS(t.backward(m), std::invalid_argument);  // non-scalar loss
}

TEST_CASE("disabling gradients turns parameters into constants") {
    std::mt19937_64 rng(14);
    auto A = make_param("A", 2, 2, rng);
    std::fill(A.grad.begin(), A.grad.end(), 0.0);
    ta::Tape<double> t;
    t.set_grad_enabled(false);
    ta::Ten loss = t.sum_all(t.param(A));
    CHECK(t.scalar(loss) == doctest::Approx(A.value[0] + A.value[1] + A.value[2] + A.value[3]));
    CHECK_THROWS_AS(t.backward(loss), std::invalid_argument);
    for (double g : A.grad) CHECK(g == 0.0);
    t.set_grad_enabled(true);
    t.reset();
    t.backward(t.sum_all(t.param(A)));
    for (double g : A.grad) CHECK(g == 1.0);
}

TEST_CASE("shape violations are rejected") {
    ta::Tape<double> t;
    ta::Ten a = t.constant({1, 2, 3, 4}, 2, 2);
    ta::Ten b = t.constant({1, 2, 3, 4, 5, 6}, 2, 3);
    CHECK_THROWS_AS(t.add(a, b), std::invalid_argument);
    CHECK_THROWS_AS(t.matmul(a, b.rows == 2 ? t.constant({1, 2, 3}, 3, 1) : a),
                    std::invalid_argument);
    CHECK_THROWS_AS(t.concat_rows({a, b}), std::invalid_argument);
    CHECK_THROWS_AS(t.concat_cols({a, t.constant({1, 2, 3}, 3, 1)}), std::invalid_argument);
    CHECK_THROWS_AS(t.slice_rows(a, 0, 3), std::invalid_argument);
    CHECK_THROWS_AS(t.slice_cols(a, 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(t.gather_rows(a, {2}), std::invalid_argument);
    CHECK_THROWS_AS(t.gather_per_row(a, {0}), std::invalid_argument);
    CHECK_THROWS_AS(t.add_bias(a, b), std::invalid_argument);
    CHECK_THROWS_AS(t.rmsnorm(a, b), std::invalid_argument);
}
