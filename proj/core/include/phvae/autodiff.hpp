#pragma once

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// A Tape records every primitive applied during a forward pass. Nodes are
// appended in evaluation order, so the node index is already a topological
// order and backward() simply walks it in reverse. Tapes are rebuilt per
// batch and are confined to one thread.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace phvae::ad {

// Dense (rows x cols) array of doubles. Scalars are 1x1.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
    Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

    static Tensor scalar(double v) { return Tensor(1, 1, v); }
    static Tensor row(std::vector<double> values);
    static Tensor column(std::vector<double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    bool same_shape(const Tensor& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double item() const;

    void fill(double v);
    bool all_finite() const noexcept;

    std::string shape_str() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Named trainable array with a persistent gradient buffer. Gradients from a
// tape are accumulated into `grad`; the training loop zeroes it.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

    void zero_grad() { grad.fill(0.0); }
};

class Tape;

// Lightweight handle to a tape node.
class Var {
public:
    Var() = default;

    const Tensor& value() const;
    const Tensor& grad() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    std::size_t id() const noexcept { return id_; }
    Tape* tape() const noexcept { return tape_; }
    bool tracked() const;

private:
    friend class Tape;
    Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

// Adjoint callback: receives the output gradient and one gradient buffer per
// input (nullptr for inputs that do not require a gradient). Implementations
// accumulate (+=) into the buffers.
using Adjoint = std::function<void(const Tensor& out_grad, std::span<Tensor* const> in_grads)>;

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    // Tracked leaf whose gradient is read back with Var::grad().
    Var leaf(Tensor value);
    // Tracked leaf bound to a Parameter; backward() adds into param.grad.
    Var param(Parameter& p);

    // Registers an operation with a hand-written adjoint. Checks the output
    // for non-finite values and reports `op` if any are found.
    Var record(std::string_view op, std::vector<Var> inputs, Tensor value, Adjoint adjoint);

    void backward(Var loss);

    const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
    const Tensor& grad(std::size_t id) const;
    bool tracked(std::size_t id) const { return nodes_.at(id).tracked; }
    std::string_view op(std::size_t id) const { return nodes_.at(id).op; }
    std::size_t size() const noexcept { return nodes_.size(); }
    bool backward_done() const noexcept { return backward_done_; }

    // Ids of the nodes in the order backward() last visited them.
    const std::vector<std::size_t>& last_backward_order() const noexcept { return visit_order_; }

private:
    struct Node {
        std::string_view op;
        Tensor value;
        Tensor grad;
        std::vector<std::size_t> inputs;
        Adjoint adjoint;
        bool tracked = false;
        Parameter* sink = nullptr;
    };

    Var push(Node node);

    std::vector<Node> nodes_;
    std::vector<std::size_t> visit_order_;
    bool backward_done_ = false;
};

// ---- primitives -----------------------------------------------------------
//
// Binary elementwise ops broadcast along any dimension of size 1, i.e. the
// (batch, feature) patterns: full, row vector (1, cols), column vector
// (rows, 1) and scalar. Anything else is a ShapeError.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var matmul(Var a, Var b);

Var exp(Var a);
Var log(Var a);
Var neg(Var a);
Var square(Var a);
Var relu(Var a);
Var softplus(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
// Identity inside [lo, hi], constant outside (zero gradient there).
Var clamp(Var a, double lo, double hi);

Var sum(Var a);
Var sum(Var a, int axis);
Var mean(Var a);
Var mean(Var a, int axis);
Var softmax(Var a, int axis);
Var cumsum(Var a, int axis);
Var broadcast_to(Var a, std::size_t rows, std::size_t cols);
Var slice_cols(Var a, std::size_t start, std::size_t count);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }

// Plain (untracked) helpers shared by the primitives and by callers that
// only need forward values.
double softplus_value(double x) noexcept;
double sigmoid_value(double x) noexcept;

} // namespace phvae::ad
