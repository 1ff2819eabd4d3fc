#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "rlomm/autodiff.hpp"

using namespace rlomm::ad;

namespace {

void randomize(Param& p, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> d(-scale, scale);
    for (auto& v : p.value) v = d(rng);
}

}  // namespace

TEST_CASE("matmul forward values") {
    Tape t;
    auto a = t.input({2, 3}, {1, 2, 3, 4, 5, 6});
    auto b = t.input({3, 2}, {7, 8, 9, 10, 11, 12});
    auto c = matmul(a, b);
    REQUIRE(c.shape() == std::vector<int>{2, 2});
    CHECK(c.value()[0] == doctest::Approx(58));
    CHECK(c.value()[1] == doctest::Approx(64));
    CHECK(c.value()[2] == doctest::Approx(139));
    CHECK(c.value()[3] == doctest::Approx(154));
    CHECK_THROWS_AS((void)matmul(a, a), ShapeMismatch);
}

TEST_CASE("broadcast add of a row vector") {
    Tape t;
    auto a = t.input({2, 2}, {1, 2, 3, 4});
    auto b = t.input({2}, {10, 20});
    auto c = add(a, b);
    CHECK(c.value()[0] == doctest::Approx(11));
    CHECK(c.value()[3] == doctest::Approx(24));
}

TEST_CASE("backward through a small composite expression") {
    // loss = sum(tanh(x * w)), checked against hand derivative.
    Param w("w", {1});
    w.value = {0.5};
    Tape t;
    auto x = t.input({1}, {2.0});
    auto lw = t.leaf(w);
    auto loss = sum_all(tanh(mul(x, lw)));
    t.backward(loss);
    const double expected = 2.0 * (1.0 - std::tanh(1.0) * std::tanh(1.0));
    CHECK(w.grad[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("backward requires a scalar and a connected loss") {
    Param w("w", {2});
    w.value = {1.0, 2.0};
    {
        Tape t;
        auto l = t.leaf(w);
        CHECK_THROWS_AS(t.backward(l), NotScalar);
    }
    {
        Tape t;
        auto c = t.input({1}, {3.0});
        CHECK_THROWS_AS(t.backward(sum_all(c)), DetachedLoss);
    }
}

TEST_CASE("gather_rows zero-pads index -1 and routes gradients") {
    Param w("w", {2, 2});
    w.value = {1, 2, 3, 4};
    Tape t;
    auto lw = t.leaf(w);
    auto g = gather_rows(lw, {1, -1, 0, 1});
    REQUIRE(g.shape() == std::vector<int>{4, 2});
    CHECK(g.value()[0] == doctest::Approx(3));
    CHECK(g.value()[2] == doctest::Approx(0));
    CHECK(g.value()[3] == doctest::Approx(0));
    CHECK(g.value()[4] == doctest::Approx(1));
    t.backward(sum_all(g));
    CHECK(w.grad[0] == doctest::Approx(1));  // row 0 used once
    CHECK(w.grad[2] == doctest::Approx(2));  // row 1 used twice
}

TEST_CASE("pick selects one column per row") {
    Tape t;
    auto a = t.input({2, 3}, {1, 2, 3, 4, 5, 6});
    auto p = pick(a, {2, 0});
    REQUIRE(p.shape() == std::vector<int>{2});
    CHECK(p.value()[0] == doctest::Approx(3));
    CHECK(p.value()[1] == doctest::Approx(4));
}

TEST_CASE("spmm matches dense multiplication") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> d(-1, 1);
    std::bernoulli_distribution keep(0.3);
    for (int trial = 0; trial < 20; ++trial) {
        const int r = 5, m = 6, c = 4;
        std::vector<double> dense(r * m, 0.0);
        SparseMatrix s;
        s.rows = r;
        s.cols = m;
        s.row_ptr.push_back(0);
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < m; ++j)
                if (keep(rng)) {
                    const double v = d(rng);
                    dense[i * m + j] = v;
                    s.col_idx.push_back(j);
                    s.vals.push_back(v);
                }
            s.row_ptr.push_back(int(s.col_idx.size()));
        }
        std::vector<double> xv(m * c);
        for (auto& v : xv) v = d(rng);

        Tape t;
        auto x = t.input({m, c}, xv);
        auto sm = t.input({r, m}, dense);
        auto sparse_out = spmm(s, x);
        auto dense_out = matmul(sm, x);
        for (std::size_t i = 0; i < sparse_out.numel(); ++i)
            CHECK(sparse_out.value()[i] ==
                  doctest::Approx(dense_out.value()[i]).epsilon(1e-12));
    }
}

TEST_CASE("huber_unit is quadratic inside and linear outside") {
    Tape t;
    auto x = t.input({3}, {0.5, 2.0, -3.0});
    auto h = huber_unit(x);
    CHECK(h.value()[0] == doctest::Approx(0.125));
    CHECK(h.value()[1] == doctest::Approx(1.5));
    CHECK(h.value()[2] == doctest::Approx(2.5));
}

TEST_CASE("batch norm normalizes in train mode and reuses running stats") {
    BatchNormState bn("bn", 2);
    Tape t;
    auto x = t.input({4, 2}, {1, 10, 2, 20, 3, 30, 4, 40});
    auto y = batch_norm(x, bn, true);
    // Per-column mean ~0, variance ~1 after normalization.
    double m0 = 0, m1 = 0;
    for (int i = 0; i < 4; ++i) {
        m0 += y.value()[i * 2];
        m1 += y.value()[i * 2 + 1];
    }
    CHECK(m0 == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(m1 == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(bn.run_mean[0] == doctest::Approx(0.25));   // 0.1 * batch mean 2.5
    CHECK(bn.run_mean[1] == doctest::Approx(2.5));

    Tape t2;
    auto x2 = t2.input({1, 2}, {0.25, 2.5});
    auto y2 = batch_norm(x2, bn, false);
    CHECK(y2.value()[0] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(y2.value()[1] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("finite-difference check passes for a deep random network") {
    std::mt19937_64 rng(11);
    Param w1("w1", {4, 6}), b1("b1", {6}), w2("w2", {6, 3}), b2("b2", {3});
    BatchNormState bn("bn", 6);
    for (auto* p : {&w1, &b1, &w2, &b2}) randomize(*p, rng, 0.8);
    randomize(bn.gamma, rng, 0.5);
    for (auto& v : bn.gamma.value) v += 1.0;
    randomize(bn.beta, rng, 0.5);

    std::vector<double> xv(5 * 4);
    std::uniform_real_distribution<double> d(-1, 1);
    for (auto& v : xv) v = d(rng);

    std::vector<Param*> params{&w1, &b1, &w2, &b2, &bn.gamma, &bn.beta};
    auto build = [&](Tape& t) {
        auto x = t.input({5, 4}, xv);
        auto h = tanh(add(matmul(x, t.leaf(w1)), t.leaf(b1)));
        h = batch_norm(h, bn, false);
        auto o = relu(add(matmul(h, t.leaf(w2)), t.leaf(b2)));
        return mean_all(mul(o, o));
    };
    CHECK(finite_diff_check(params, build) < 1e-6);
}

TEST_CASE("adam converges on a quadratic bowl") {
    Param w("w", {2});
    w.value = {5.0, -3.0};
    AdamState st;
    std::vector<Param*> params{&w};
    for (int i = 0; i < 2000; ++i) {
        Tape t;
        auto lw = t.leaf(w);
        auto target = t.input({2}, {1.0, 2.0});
        auto diff = sub(lw, target);
        t.backward(sum_all(mul(diff, diff)));
        adam_step(params, st, 0.01);
        for (auto* p : params) p->zero_grad();
    }
    CHECK(w.value[0] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(w.value[1] == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("mark and reset keep the tape size constant across repeats") {
    Tape t;
    auto base = t.input({4, 4}, std::vector<double>(16, 0.5));
    const auto m = t.mark();
    std::size_t after_first = 0;
    for (int i = 0; i < 50; ++i) {
        auto y = sum_all(tanh(matmul(base, base)));
        (void)y;
        if (i == 0) after_first = t.node_count();
        CHECK(t.node_count() == after_first);
        t.reset_to(m);
    }
    CHECK(t.node_count() == m);
}

TEST_CASE("checkpoint round trip restores values exactly") {
    namespace fs = std::filesystem;
    std::mt19937_64 rng(13);
    Param a("enc.w", {3, 3}), b("head.b", {5});
    randomize(a, rng);
    randomize(b, rng);
    const auto saved_a = a.value;
    const auto saved_b = b.value;

    const auto path = (fs::temp_directory_path() / "ad_ckpt.bin").string();
    std::vector<Param*> params{&a, &b};
    save_checkpoint(path, params);
    for (auto* p : params) std::fill(p->value.begin(), p->value.end(), 0.0);
    load_checkpoint(path, params);
    CHECK(a.value == saved_a);
    CHECK(b.value == saved_b);
    fs::remove(path);
}
