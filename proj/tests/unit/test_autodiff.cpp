#include "doctest.h"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "phvae/autodiff.hpp"
#include "phvae/error.hpp"
#include "phvae/rng.hpp"

using namespace phvae;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

struct Shape {
    std::size_t rows;
    std::size_t cols;
};

// One primitive under test: input shapes, a map from U(-3, 3) onto the
// primitive's domain, and the graph to build.
struct Case {
    std::string name;
    std::vector<Shape> shapes;
    std::function<double(double)> domain;
    std::function<Var(std::vector<Var>&)> build;
};

double identity(double u) { return u; }
double positive(double u) { return u + 3.1; }                    // (0.1, 6.1]
double nonzero(double u) { return u < 0 ? u - 0.5 : u + 0.5; }    // |x| >= 0.5
double off_kink(double u) { return u < 0 ? u - 0.05 : u + 0.05; } // away from relu's kink

// Scalar projection sum(out * w) of the case's output, with w fixed by seed.
double project(const Case& c, const std::vector<Tensor>& inputs, std::uint64_t seed, std::vector<Tensor>* grads) {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& t : inputs) leaves.push_back(tape.leaf(t));
    Var out = c.build(leaves);
    Rng rng(seed);
    Tensor w(out.rows(), out.cols());
    for (auto& v : w.values()) v = rng.uniform() * 2.0 - 1.0;
    Var loss = ad::sum(out * tape.constant(w));
    if (grads != nullptr) {
        tape.backward(loss);
        grads->clear();
        for (Var l : leaves) grads->push_back(l.grad());
    }
    return loss.value().item();
}

std::vector<Case> primitive_cases() {
    using V = std::vector<Var>;
    return {
        {"add", {{2, 3}, {2, 3}}, identity, [](V& v) { return v[0] + v[1]; }},
        {"add_row_broadcast", {{2, 3}, {1, 3}}, identity, [](V& v) { return v[0] + v[1]; }},
        {"add_col_broadcast", {{2, 3}, {2, 1}}, identity, [](V& v) { return v[0] + v[1]; }},
        {"sub", {{2, 3}, {1, 3}}, identity, [](V& v) { return v[0] - v[1]; }},
        {"mul", {{2, 3}, {2, 3}}, identity, [](V& v) { return v[0] * v[1]; }},
        {"div", {{2, 3}, {2, 3}}, nonzero, [](V& v) { return v[0] / v[1]; }},
        {"matmul", {{2, 3}, {3, 4}}, identity, [](V& v) { return ad::matmul(v[0], v[1]); }},
        {"exp", {{2, 3}}, identity, [](V& v) { return ad::exp(v[0]); }},
        {"log", {{2, 3}}, positive, [](V& v) { return ad::log(v[0]); }},
        {"neg", {{2, 3}}, identity, [](V& v) { return -v[0]; }},
        {"square", {{2, 3}}, identity, [](V& v) { return ad::square(v[0]); }},
        {"relu", {{2, 3}}, off_kink, [](V& v) { return ad::relu(v[0]); }},
        {"softplus", {{2, 3}}, identity, [](V& v) { return ad::softplus(v[0]); }},
        {"scale", {{2, 3}}, identity, [](V& v) { return ad::scale(v[0], -1.7); }},
        {"add_scalar", {{2, 3}}, identity, [](V& v) { return ad::add_scalar(v[0], 0.3); }},
        {"clamp", {{2, 3}}, off_kink, [](V& v) { return ad::clamp(v[0], -10.0, 10.0); }},
        {"sum", {{2, 3}}, identity, [](V& v) { return ad::sum(v[0]); }},
        {"sum_axis0", {{2, 3}}, identity, [](V& v) { return ad::sum(v[0], 0); }},
        {"sum_axis1", {{2, 3}}, identity, [](V& v) { return ad::sum(v[0], 1); }},
        {"mean", {{2, 3}}, identity, [](V& v) { return ad::mean(v[0]); }},
        {"mean_axis0", {{2, 3}}, identity, [](V& v) { return ad::mean(v[0], 0); }},
        {"mean_axis1", {{2, 3}}, identity, [](V& v) { return ad::mean(v[0], 1); }},
        {"softmax_axis0", {{3, 2}}, identity, [](V& v) { return ad::softmax(v[0], 0); }},
        {"softmax_axis1", {{2, 4}}, identity, [](V& v) { return ad::softmax(v[0], 1); }},
        {"cumsum_axis0", {{3, 2}}, identity, [](V& v) { return ad::cumsum(v[0], 0); }},
        {"cumsum_axis1", {{2, 4}}, identity, [](V& v) { return ad::cumsum(v[0], 1); }},
        {"broadcast_rows", {{1, 3}}, identity, [](V& v) { return ad::broadcast_to(v[0], 4, 3); }},
        {"broadcast_cols", {{2, 1}}, identity, [](V& v) { return ad::broadcast_to(v[0], 2, 5); }},
        {"slice_cols", {{2, 5}}, identity, [](V& v) { return ad::slice_cols(v[0], 1, 3); }},
    };
}

} // namespace

TEST_CASE("every primitive's adjoint matches central differences on 100 random inputs") {
    for (const Case& c : primitive_cases()) {
        CAPTURE(c.name);
        Rng rng(derive_seed(11, {tag(c.name.c_str())}));
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<Tensor> inputs;
            for (Shape s : c.shapes) {
                Tensor t(s.rows, s.cols);
                for (auto& v : t.values()) v = c.domain(rng.uniform() * 6.0 - 3.0);
                inputs.push_back(t);
            }
            const std::uint64_t wseed = rng();
            std::vector<Tensor> grads;
            project(c, inputs, wseed, &grads);
            for (std::size_t k = 0; k < inputs.size(); ++k) {
                for (std::size_t e = 0; e < inputs[k].size(); ++e) {
                    const double h = 1e-5;
                    auto shifted = inputs;
                    shifted[k][e] += h;
                    const double fp = project(c, shifted, wseed, nullptr);
                    shifted[k][e] -= 2 * h;
                    const double fm = project(c, shifted, wseed, nullptr);
                    const double fd = (fp - fm) / (2 * h);
                    worst = std::max(worst, oracle::rel_err(grads[k][e], fd, 1e-3));
                }
            }
        }
        CHECK(worst < 1e-5);
    }
}

TEST_CASE("primitive examples") {
    Tape tape;
    SUBCASE("softmax of zeros is uniform") {
        Var s = ad::softmax(tape.constant(Tensor::row({0, 0, 0})), 1);
        for (double v : s.value().values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }
    SUBCASE("softplus(0) = ln 2") {
        CHECK(ad::softplus(tape.constant(Tensor::scalar(0))).value().item() == doctest::Approx(std::log(2.0)));
    }
    SUBCASE("softplus is overflow safe") {
        Var s = ad::softplus(tape.constant(Tensor::row({800.0, -800.0})));
        CHECK(s.value()[0] == 800.0);
        CHECK(s.value()[1] >= 0.0);
    }
    SUBCASE("cumsum of ln 2 is the zero-input rate construction") {
        const double l2 = std::log(2.0);
        Var c = ad::cumsum(tape.constant(Tensor::row({l2, l2, l2})), 1);
        CHECK(c.value()[0] == doctest::Approx(l2));
        CHECK(c.value()[1] == doctest::Approx(2 * l2));
        CHECK(c.value()[2] == doctest::Approx(3 * l2));
    }
}

TEST_CASE("backward examples") {
    SUBCASE("x*x at 3 has gradient 6") {
        Tape tape;
        Var x = tape.leaf(Tensor::scalar(3.0));
        tape.backward(x * x);
        CHECK(x.grad().item() == 6.0);
    }
    SUBCASE("softplus'(0) = 1/2") {
        Tape tape;
        Var x = tape.leaf(Tensor::scalar(0.0));
        tape.backward(ad::softplus(x));
        CHECK(x.grad().item() == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("parameters accumulate gradients across tapes") {
        ad::Parameter p("p", Tensor::scalar(2.0));
        for (int i = 0; i < 2; ++i) {
            Tape tape;
            Var x = tape.param(p);
            tape.backward(x * x);
        }
        CHECK(p.grad.item() == 8.0);
        p.zero_grad();
        CHECK(p.grad.item() == 0.0);
    }
}

TEST_CASE("structured errors") {
    Tape tape;
    Var a = tape.leaf(Tensor(2, 3, 1.0));
    SUBCASE("unsupported broadcast") {
        Var b = tape.leaf(Tensor(3, 2, 1.0));
        CHECK_THROWS_AS(a + b, ShapeError);
        CHECK_THROWS_AS(ad::broadcast_to(a, 4, 3), ShapeError);
    }
    SUBCASE("matmul inner dimension") { CHECK_THROWS_AS(ad::matmul(a, a), ShapeError); }
    SUBCASE("non-finite output names the primitive") {
        Var big = tape.leaf(Tensor::scalar(1000.0));
        try {
            ad::exp(big);
            FAIL("expected NonFiniteError");
        } catch (const NonFiniteError& e) {
            CHECK(e.op() == "exp");
        }
    }
    SUBCASE("log and div domains") {
        CHECK_THROWS_AS(ad::log(tape.leaf(Tensor::scalar(0.0))), DomainError);
        CHECK_THROWS_AS(a / tape.leaf(Tensor(2, 3, 0.0)), DomainError);
    }
    SUBCASE("backward needs a scalar and runs once") {
        CHECK_THROWS_AS(tape.backward(a), ShapeError);
        Var loss = ad::sum(a);
        tape.backward(loss);
        CHECK_THROWS_AS(tape.backward(loss), TapeError);
        CHECK_THROWS_AS(ad::exp(a), TapeError);
    }
    SUBCASE("no gradient before backward") { CHECK_THROWS_AS(a.grad(), TapeError); }
}

TEST_CASE("backward visits nodes in reverse topological order") {
    Tape tape;
    Var x = tape.leaf(Tensor::row({0.3, -0.2}));
    Var y = tape.leaf(Tensor::row({1.1, 0.7}));
    Var u = ad::exp(x) * y;
    Var v = ad::softplus(u) + ad::square(x);
    Var loss = ad::sum(v * u);
    tape.backward(loss);
    const auto& order = tape.last_backward_order();
    REQUIRE(!order.empty());
    CHECK(order.front() == loss.id());
    // A node is visited only after every node that consumes it.
    std::vector<std::size_t> position(tape.size(), 0);
    for (std::size_t i = 0; i < order.size(); ++i) position[order[i]] = i;
    for (std::size_t i = 1; i < order.size(); ++i) CHECK(order[i] < order[i - 1]);
    CHECK(position[x.id()] > position[u.id()]);
    CHECK(position[u.id()] > position[v.id()]);
}

TEST_CASE("adjoints are linear in the loss") {
    auto run = [](int which) {
        Tape tape;
        Var x = tape.leaf(Tensor::row({0.4, -1.3, 2.2}));
        Var l1 = ad::sum(ad::softplus(x) * ad::exp(x));
        Var l2 = ad::mean(ad::square(ad::softmax(x, 1)));
        Var loss = which == 0 ? l1 + l2 : (which == 1 ? l1 : l2);
        tape.backward(loss);
        return x.grad();
    };
    const Tensor both = run(0), g1 = run(1), g2 = run(2);
    for (std::size_t i = 0; i < both.size(); ++i) CHECK(both[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-14));
}

TEST_CASE("forward and backward are bit-reproducible") {
    auto run = [] {
        Rng rng(5);
        Tape tape;
        Tensor a(4, 3), b(3, 2);
        for (auto& v : a.values()) v = rng.normal();
        for (auto& v : b.values()) v = rng.normal();
        Var x = tape.leaf(a), w = tape.leaf(b);
        Var h = ad::softplus(ad::matmul(x, w));
        Var loss = ad::sum(ad::log(ad::cumsum(h, 1)));
        tape.backward(loss);
        std::vector<double> out{loss.value().item()};
        for (double g : x.grad().values()) out.push_back(g);
        for (double g : w.grad().values()) out.push_back(g);
        return out;
    };
    CHECK(run() == run());
}
