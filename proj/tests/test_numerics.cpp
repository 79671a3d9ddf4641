#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "ingram/adam.hpp"
#include "ingram/autodiff.hpp"
#include "ingram/errors.hpp"
#include "ingram/rng.hpp"
#include "ingram/tensor.hpp"
#include "testutil.hpp"

using namespace ingram;
using namespace testutil;

namespace {

Tensor random_tensor(int r, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(r, c);
    for (auto& x : t.v) x = rng.uniform(lo, hi);
    return t;
}

// Central-difference gradient check for a scalar function of several
// tensors. `build` must construct the loss from the given leaf tensors.
void grad_check(std::vector<Tensor> inputs,
                const std::function<Tape::Id(Tape&, const std::vector<Tape::Id>&)>& build,
                double tol = 1e-6, double h = 1e-6) {
    Tape tape;
    std::vector<Tape::Id> ids;
    for (const auto& t : inputs) ids.push_back(tape.param(t));
    const Tape::Id loss = build(tape, ids);
    tape.backward(loss);

    for (size_t i = 0; i < inputs.size(); ++i) {
        const Tensor analytic = tape.grad(ids[i]);
        for (size_t k = 0; k < inputs[i].size(); ++k) {
            auto eval = [&](double delta) {
                std::vector<Tensor> shifted = inputs;
                shifted[i].v[k] += delta;
                Tape t2;
                std::vector<Tape::Id> ids2;
                for (const auto& t : shifted) ids2.push_back(t2.param(t));
                return t2.value(build(t2, ids2)).v[0];
            };
            const double fd = (eval(h) - eval(-h)) / (2.0 * h);
            const double a = analytic.v[k];
            const double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-4});
            INFO("input ", i, " entry ", k, " analytic ", a, " fd ", fd);
            CHECK(err < tol);
        }
    }
}

}  // namespace

TEST_CASE("glorot: bound for 1x1") {
    Rng rng(1);
    for (int k = 0; k < 100; ++k) {
        const Tensor t = Tensor::glorot(1, 1, rng);
        CHECK(std::abs(t.v[0]) <= std::sqrt(3.0));
    }
}

TEST_CASE("glorot: bound for 32x32") {
    Rng rng(2);
    const double bound = std::sqrt(6.0 / 64.0);
    CHECK(bound == doctest::Approx(0.3062).epsilon(1e-3));
    const Tensor t = Tensor::glorot(32, 32, rng);
    for (double x : t.v) CHECK(std::abs(x) <= bound);
}

TEST_CASE("glorot: same seed, bit-identical") {
    Rng a(42), b(42);
    const Tensor ta = Tensor::glorot(8, 4, a);
    const Tensor tb = Tensor::glorot(8, 4, b);
    CHECK(ta.v == tb.v);
}

TEST_CASE("glorot: spread covers the range") {
    Rng rng(3);
    const Tensor t = Tensor::glorot(50, 50, rng);
    const double bound = std::sqrt(6.0 / 100.0);
    int low = 0, high = 0;
    for (double x : t.v) {
        if (x < -0.5 * bound) ++low;
        if (x > 0.5 * bound) ++high;
    }
    CHECK(low > 250);  // ~625 expected of 2500
    CHECK(high > 250);
}

TEST_CASE("tape: linear loss has all-ones gradient") {
    Tape tape;
    Rng rng(4);
    const Tape::Id w = tape.param(random_tensor(3, 4, rng));
    const Tape::Id loss = tape.sum_all(w);
    tape.backward(loss);
    for (double g : tape.grad(w).v) CHECK(g == 1.0);
}

TEST_CASE("tape: leaky_relu negative slope") {
    Tape tape;
    Tensor x(1, 2);
    x.v = {-3.0, 2.0};
    const Tape::Id in = tape.param(x);
    const Tape::Id loss = tape.sum_all(tape.leaky_relu(in, 0.2));
    CHECK(tape.value(loss).v[0] == doctest::Approx(2.0 - 0.6).epsilon(1e-15));
    tape.backward(loss);
    CHECK(tape.grad(in).v[0] == 0.2);
    CHECK(tape.grad(in).v[1] == 1.0);
}

TEST_CASE("tape: shape mismatch names the op") {
    Tape tape;
    const Tape::Id a = tape.input(Tensor(2, 3));
    const Tape::Id b = tape.input(Tensor(2, 4));
    try {
        tape.add(a, b);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("add") != std::string::npos);
    }
    CHECK_THROWS_AS(tape.matmul(a, a), NumericError);
}

TEST_CASE("tape: NaN detection raises") {
    Tape tape;
    Tensor x(1, 2);
    x.v = {1.0, 0.0};
    Tensor y(1, 2);
    y.v = {std::numeric_limits<double>::infinity(), 1.0};
    CHECK_THROWS_AS(tape.mul(tape.input(x), tape.input(y)), NumericError);
}

TEST_CASE("gradcheck: matmul all transpose combinations") {
    Rng rng(5);
    for (const bool ta : {false, true})
        for (const bool tb : {false, true}) {
            const Tensor A = ta ? random_tensor(4, 3, rng) : random_tensor(3, 4, rng);
            const Tensor B = tb ? random_tensor(5, 4, rng) : random_tensor(4, 5, rng);
            const Tensor W = random_tensor(3, 5, rng);  // weighting makes grads non-uniform
            grad_check({A, B}, [=](Tape& t, const std::vector<Tape::Id>& ids) {
                return t.sum_all(t.mul(t.matmul(ids[0], ids[1], ta, tb), t.input(W)));
            });
        }
}

TEST_CASE("gradcheck: elementwise and scalar ops") {
    Rng rng(6);
    const Tensor A = random_tensor(3, 4, rng);
    const Tensor B = random_tensor(3, 4, rng);
    const Tensor W = random_tensor(3, 4, rng);
    grad_check({A, B}, [=](Tape& t, const std::vector<Tape::Id>& ids) {
        const Tape::Id x = t.mul(ids[0], ids[1]);
        const Tape::Id y = t.add(x, t.scale(ids[0], -0.7));
        const Tape::Id z = t.add_scalar(t.sub(y, ids[1]), 0.3);
        return t.sum_all(t.mul(z, t.input(W)));
    });
}

TEST_CASE("gradcheck: activations away from the kink") {
    Rng rng(7);
    Tensor A = random_tensor(4, 4, rng);
    for (auto& x : A.v)
        if (std::abs(x) < 0.05) x += 0.1;  // keep clear of the nondifferentiable point
    const Tensor W = random_tensor(4, 4, rng);
    grad_check({A}, [=](Tape& t, const std::vector<Tape::Id>& ids) {
        return t.sum_all(t.mul(t.leaky_relu(ids[0], 0.2), t.input(W)));
    });
    grad_check({A}, [=](Tape& t, const std::vector<Tape::Id>& ids) {
        return t.sum_all(t.mul(t.relu(ids[0]), t.input(W)));
    });
}

TEST_CASE("gradcheck: concat and slices") {
    Rng rng(8);
    const Tensor A = random_tensor(3, 4, rng);
    const Tensor B = random_tensor(2, 4, rng);
    const Tensor C = random_tensor(3, 2, rng);
    const Tensor W1 = random_tensor(5, 4, rng);
    grad_check({A, B}, [=](Tape& t, const std::vector<Tape::Id>& ids) {
        return t.sum_all(t.mul(t.concat_rows(ids[0], ids[1]), t.input(W1)));
    });
    const Tensor W2 = random_tensor(3, 6, rng);
    grad_check({A, C}, [=](Tape& t, const std::vector<Tape::Id>& ids) {
        return t.sum_all(t.mul(t.concat_cols(ids[0], ids[1]), t.input(W2)));
    });
    const Tensor W3 = random_tensor(2, 2, rng);
    grad_check({A}, [=](Tape& t, const std::vector<Tape::Id>& ids) {
        return t.sum_all(t.mul(t.slice_cols(t.slice_rows(ids[0], 1, 3), 2, 4), t.input(W3)));
    });
}

TEST_CASE("gradcheck: gather, gather_sum, scale_rows") {
    Rng rng(9);
    const Tensor A = random_tensor(4, 3, rng);
    const Tensor B = random_tensor(5, 3, rng);
    const Tensor W = random_tensor(6, 3, rng);
    const Tensor S = random_tensor(6, 1, rng);
    const std::vector<int32_t> ids_a = {0, 3, 3, 1, 2, 0};
    const std::vector<int32_t> ids_b = {4, 0, 1, 1, 2, 3};
    grad_check({A}, [=](Tape& t, const std::vector<Tape::Id>& ids) {
        return t.sum_all(t.mul(t.gather_rows(ids[0], ids_a), t.input(W)));
    });
    grad_check({A, B, S}, [=](Tape& t, const std::vector<Tape::Id>& ts) {
        const Tape::Id g = t.gather_rows_sum({{ts[0], &ids_a}, {ts[1], &ids_b}});
        return t.sum_all(t.mul(t.scale_rows(g, ts[2]), t.input(W)));
    });
}

TEST_CASE("gradcheck: segment softmax, sums and weighted sums") {
    Rng rng(10);
    const std::vector<int32_t> seg = {0, 0, 1, 2, 2, 2};
    const Tensor L = random_tensor(6, 1, rng);
    const Tensor X = random_tensor(6, 3, rng);
    const Tensor W = random_tensor(3, 3, rng);
    grad_check({L, X}, [=](Tape& t, const std::vector<Tape::Id>& ids) {
        const Tape::Id sm = t.segment_softmax(ids[0], seg, 3);
        return t.sum_all(t.mul(t.segment_sum(t.scale_rows(ids[1], sm), seg, 3), t.input(W)));
    });
    grad_check({L, X}, [=](Tape& t, const std::vector<Tape::Id>& ids) {
        const Tape::Id sm = t.segment_softmax(ids[0], seg, 3);
        return t.sum_all(t.mul(t.segment_weighted_sum(ids[1], sm, seg, 3), t.input(W)));
    });
}

TEST_CASE("gradcheck: row_sum") {
    Rng rng(11);
    const Tensor A = random_tensor(4, 5, rng);
    const Tensor W = random_tensor(4, 1, rng);
    grad_check({A}, [=](Tape& t, const std::vector<Tape::Id>& ids) {
        return t.sum_all(t.mul(t.row_sum(ids[0]), t.input(W)));
    });
}

TEST_CASE("segment softmax sums to one within each segment") {
    Rng rng(12);
    const std::vector<int32_t> seg = {0, 2, 2, 1, 0, 2, 1, 0, 0};
    Tape tape;
    const Tape::Id sm =
        tape.segment_softmax(tape.input(random_tensor(9, 1, rng, -30.0, 30.0)), seg, 3);
    std::vector<double> sums(3, 0.0);
    for (size_t r = 0; r < seg.size(); ++r) sums[size_t(seg[r])] += tape.value(sm).v[r];
    for (double s : sums) CHECK(std::abs(s - 1.0) < 1e-12);
}

TEST_CASE("segment softmax equals a plain softmax per segment") {
    Rng rng(13);
    const std::vector<int32_t> seg = {1, 0, 1, 1, 0};
    const Tensor L = random_tensor(5, 1, rng);
    Tape tape;
    const Tape::Id sm = tape.segment_softmax(tape.input(L), seg, 2);
    std::vector<double> g0, g1;
    for (size_t r = 0; r < seg.size(); ++r) (seg[r] == 0 ? g0 : g1).push_back(L.v[r]);
    const auto s0 = softmax(g0);
    const auto s1 = softmax(g1);
    size_t i0 = 0, i1 = 0;
    for (size_t r = 0; r < seg.size(); ++r) {
        const double expect = seg[r] == 0 ? s0[i0++] : s1[i1++];
        CHECK(tape.value(sm).v[r] == doctest::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("tape determinism: identical graphs give identical bits") {
    auto run = [] {
        Rng rng(99);
        Tape tape;
        const Tape::Id a = tape.param(random_tensor(6, 6, rng));
        const Tape::Id b = tape.param(random_tensor(6, 6, rng));
        const Tape::Id loss = tape.sum_all(tape.leaky_relu(tape.matmul(a, b), 0.2));
        tape.backward(loss);
        return std::pair(tape.value(loss).v[0], tape.grad(a).v);
    };
    const auto r1 = run();
    const auto r2 = run();
    CHECK(r1.first == r2.first);
    CHECK(r1.second == r2.second);
}

TEST_CASE("adam: zero gradient is a fixed point") {
    Adam adam(0.001);
    Tensor p(2, 2);
    p.v = {1.0, -2.0, 3.0, 4.0};
    adam.register_parameter(p);
    const Tensor zero(2, 2);
    std::vector<Tensor*> params{&p};
    std::vector<const Tensor*> grads{&zero};
    const std::vector<double> before = p.v;
    for (int i = 0; i < 5; ++i) adam.step(params, grads);
    CHECK(p.v == before);
}

TEST_CASE("adam: first step magnitude is lr/(1+eps)") {
    const double lr = 0.001;
    Adam adam(lr);
    Tensor p(3, 1);
    p.v = {0.5, -0.5, 2.0};
    adam.register_parameter(p);
    Tensor g(3, 1);
    g.v = {1.0, 1.0, 1.0};
    std::vector<Tensor*> params{&p};
    std::vector<const Tensor*> grads{&g};
    adam.step(params, grads);
    // With bias correction, mhat = vhat = 1 after one step, so the update is
    // exactly lr / (1 + eps).
    const double expected = lr / (1.0 + 1e-8);
    CHECK(p.v[0] == doctest::Approx(0.5 - expected).epsilon(1e-12));
    CHECK(p.v[1] == doctest::Approx(-0.5 - expected).epsilon(1e-12));
    CHECK(p.v[2] == doctest::Approx(2.0 - expected).epsilon(1e-12));
}

TEST_CASE("adam: deterministic given the same state") {
    auto run = [] {
        Adam adam(0.01);
        Tensor p(2, 2);
        p.v = {1.0, 2.0, 3.0, 4.0};
        adam.register_parameter(p);
        Tensor g(2, 2);
        g.v = {0.3, -0.2, 0.1, 0.9};
        std::vector<Tensor*> params{&p};
        std::vector<const Tensor*> grads{&g};
        for (int i = 0; i < 10; ++i) adam.step(params, grads);
        return p.v;
    };
    CHECK(run() == run());
}

TEST_CASE("adam: converges on a quadratic") {
    Adam adam(0.1);
    Tensor p(2, 1);
    p.v = {10.0, -10.0};
    adam.register_parameter(p);
    Tensor g(2, 1);
    std::vector<Tensor*> params{&p};
    std::vector<const Tensor*> grads{&g};
    for (int i = 0; i < 400; ++i) {
        g.v[0] = 2.0 * (p.v[0] - 5.0);
        g.v[1] = 2.0 * (p.v[1] + 2.0);
        adam.step(params, grads);
    }
    CHECK(p.v[0] == doctest::Approx(5.0).epsilon(1e-2));
    CHECK(p.v[1] == doctest::Approx(-2.0).epsilon(1e-2));
}

TEST_CASE("rng: uniform_int is unbiased-ish and deterministic") {
    Rng a(123), b(123);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng rng(7);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 50000; ++i) ++counts[size_t(rng.uniform_int(5))];
    for (int c : counts) {
        CHECK(c > 9500);
        CHECK(c < 10500);
    }
}
