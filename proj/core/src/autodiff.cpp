#include "phvae/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "phvae/error.hpp"

namespace phvae::ad {

// ---- Tensor ---------------------------------------------------------------

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows * cols) {
        throw ShapeError("tensor: " + std::to_string(data_.size()) + " values for shape (" +
                         std::to_string(rows) + ", " + std::to_string(cols) + ")");
    }
}

Tensor Tensor::row(std::vector<double> values) {
    const auto n = values.size();
    return Tensor(1, n, std::move(values));
}

Tensor Tensor::column(std::vector<double> values) {
    const auto n = values.size();
    return Tensor(n, 1, std::move(values));
}

double Tensor::item() const {
    if (size() != 1) {
        throw ShapeError("item: tensor of shape " + shape_str() + " is not a scalar");
    }
    return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '(' << rows_ << ", " << cols_ << ')';
    return os.str();
}

// ---- Var / Tape -----------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }
bool Var::tracked() const { return tape_->tracked(id_); }

Var Tape::push(Node node) {
    if (backward_done_) {
        throw TapeError("cannot record onto a tape after backward()");
    }
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
    Node n;
    n.op = "constant";
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
    Node n;
    n.op = "leaf";
    n.value = std::move(value);
    n.tracked = true;
    return push(std::move(n));
}

Var Tape::param(Parameter& p) {
    Node n;
    n.op = "param";
    n.value = p.value;
    n.tracked = true;
    n.sink = &p;
    return push(std::move(n));
}

Var Tape::record(std::string_view op, std::vector<Var> inputs, Tensor value, Adjoint adjoint) {
    if (!value.all_finite()) {
        throw NonFiniteError(std::string(op), "non-finite output of shape " + value.shape_str());
    }
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.adjoint = std::move(adjoint);
    n.inputs.reserve(inputs.size());
    for (const Var& v : inputs) {
        if (v.tape_ != this) {
            throw TapeError(std::string(op) + ": input belongs to a different tape");
        }
        n.inputs.push_back(v.id_);
        n.tracked = n.tracked || nodes_[v.id_].tracked;
    }
    return push(std::move(n));
}

const Tensor& Tape::grad(std::size_t id) const {
    const Node& n = nodes_.at(id);
    if (!backward_done_ || !n.tracked) {
        throw TapeError("no gradient available for node " + std::to_string(id));
    }
    return n.grad;
}

void Tape::backward(Var loss) {
    if (loss.tape_ != this) {
        throw TapeError("backward: loss belongs to a different tape");
    }
    if (backward_done_) {
        throw TapeError("backward called twice on the same tape; re-run the forward pass");
    }
    const Tensor& lv = nodes_[loss.id_].value;
    if (lv.size() != 1) {
        throw ShapeError("backward: loss must be scalar, got " + lv.shape_str());
    }
    backward_done_ = true;

    for (Node& n : nodes_) {
        if (n.tracked) {
            n.grad = Tensor(n.value.rows(), n.value.cols());
        }
    }
    if (!nodes_[loss.id_].tracked) {
        return;
    }
    nodes_[loss.id_].grad[0] = 1.0;

    visit_order_.clear();
    std::vector<Tensor*> in_grads;
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.tracked) {
            continue;
        }
        visit_order_.push_back(i);
        if (n.adjoint) {
            in_grads.clear();
            for (std::size_t in : n.inputs) {
                in_grads.push_back(nodes_[in].tracked ? &nodes_[in].grad : nullptr);
            }
            n.adjoint(n.grad, in_grads);
        }
    }

    for (Node& n : nodes_) {
        if (n.sink != nullptr) {
            auto dst = n.sink->grad.values();
            auto src = n.grad.values();
            for (std::size_t k = 0; k < dst.size(); ++k) {
                dst[k] += src[k];
            }
        }
    }
}

// ---- helpers --------------------------------------------------------------

namespace {

Tape& tape_of(Var a) {
    if (a.tape() == nullptr) {
        throw TapeError("operation on an unbound Var");
    }
    return *a.tape();
}

Tape& tape_of(Var a, Var b) {
    if (a.tape() != b.tape()) {
        throw TapeError("operands belong to different tapes");
    }
    return tape_of(a);
}

std::size_t broadcast_dim(std::size_t x, std::size_t y, const char* op, const Tensor& a, const Tensor& b) {
    if (x == y || y == 1) {
        return x;
    }
    if (x == 1) {
        return y;
    }
    throw ShapeError(std::string(op) + ": cannot broadcast " + a.shape_str() + " with " + b.shape_str());
}

// Index into a possibly broadcast operand.
inline double at_bc(const Tensor& t, std::size_t r, std::size_t c) {
    return t(t.rows() == 1 ? 0 : r, t.cols() == 1 ? 0 : c);
}

inline void add_bc(Tensor& t, std::size_t r, std::size_t c, double v) {
    t(t.rows() == 1 ? 0 : r, t.cols() == 1 ? 0 : c) += v;
}

template <class Fwd, class DA, class DB>
Var binary(const char* op, Var a, Var b, Fwd fwd, DA da, DB db) {
    Tape& tape = tape_of(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const std::size_t rows = broadcast_dim(av.rows(), bv.rows(), op, av, bv);
    const std::size_t cols = broadcast_dim(av.cols(), bv.cols(), op, av, bv);
    Tensor out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            out(r, c) = fwd(at_bc(av, r, c), at_bc(bv, r, c));
        }
    }
    Tensor ac = av;
    Tensor bc = bv;
    return tape.record(op, {a, b}, std::move(out),
                       [ac = std::move(ac), bc = std::move(bc), da, db](const Tensor& g,
                                                                        std::span<Tensor* const> gi) {
                           for (std::size_t r = 0; r < g.rows(); ++r) {
                               for (std::size_t c = 0; c < g.cols(); ++c) {
                                   const double x = at_bc(ac, r, c);
                                   const double y = at_bc(bc, r, c);
                                   if (gi[0] != nullptr) {
                                       add_bc(*gi[0], r, c, g(r, c) * da(x, y));
                                   }
                                   if (gi[1] != nullptr) {
                                       add_bc(*gi[1], r, c, g(r, c) * db(x, y));
                                   }
                               }
                           }
                       });
}

// Elementwise unary op; `deriv(x, y)` gets the input and output values.
template <class Fwd, class Deriv>
Var unary(const char* op, Var a, Fwd fwd, Deriv deriv) {
    Tape& tape = tape_of(a);
    const Tensor& av = a.value();
    Tensor out(av.rows(), av.cols());
    for (std::size_t i = 0; i < av.size(); ++i) {
        out[i] = fwd(av[i]);
    }
    Tensor in = av;
    Tensor res = out;
    return tape.record(op, {a}, std::move(out),
                       [in = std::move(in), res = std::move(res), deriv](const Tensor& g,
                                                                        std::span<Tensor* const> gi) {
                           if (gi[0] == nullptr) {
                               return;
                           }
                           for (std::size_t i = 0; i < g.size(); ++i) {
                               (*gi[0])[i] += g[i] * deriv(in[i], res[i]);
                           }
                       });
}

void check_axis(const char* op, int axis) {
    if (axis != 0 && axis != 1) {
        throw ShapeError(std::string(op) + ": axis must be 0 or 1, got " + std::to_string(axis));
    }
}

} // namespace

double softplus_value(double x) noexcept {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid_value(double x) noexcept {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// ---- elementwise ----------------------------------------------------------

Var add(Var a, Var b) {
    return binary(
        "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
    return binary(
        "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
    return binary(
        "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Var div(Var a, Var b) {
    for (double v : b.value().values()) {
        if (v == 0.0) {
            throw DomainError("div: zero divisor");
        }
    }
    return binary(
        "div", a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Var exp(Var a) {
    return unary(
        "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
    for (double v : a.value().values()) {
        if (!(v > 0.0)) {
            throw DomainError("log: input must be strictly positive");
        }
    }
    return unary(
        "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var neg(Var a) {
    return unary(
        "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var square(Var a) {
    return unary(
        "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var relu(Var a) {
    return unary(
        "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var softplus(Var a) {
    return unary("softplus", a, softplus_value, [](double x, double) { return sigmoid_value(x); });
}

Var scale(Var a, double c) {
    return unary(
        "scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_scalar(Var a, double c) {
    return unary(
        "add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var clamp(Var a, double lo, double hi) {
    return unary(
        "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
        [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

// ---- linear algebra -------------------------------------------------------

Var matmul(Var a, Var b) {
    Tape& tape = tape_of(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.rows()) {
        throw ShapeError("matmul: " + av.shape_str() + " x " + bv.shape_str());
    }
    const std::size_t n = av.rows();
    const std::size_t k = av.cols();
    const std::size_t m = bv.cols();
    Tensor out(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av(i, p);
            if (aip == 0.0) {
                continue;
            }
            for (std::size_t j = 0; j < m; ++j) {
                out(i, j) += aip * bv(p, j);
            }
        }
    }
    Tensor ac = av;
    Tensor bc = bv;
    return tape.record("matmul", {a, b}, std::move(out),
                       [ac = std::move(ac), bc = std::move(bc)](const Tensor& g,
                                                                std::span<Tensor* const> gi) {
                           const std::size_t n = ac.rows();
                           const std::size_t k = ac.cols();
                           const std::size_t m = bc.cols();
                           if (gi[0] != nullptr) {
                               // dA = G B^T
                               Tensor& ga = *gi[0];
                               for (std::size_t i = 0; i < n; ++i) {
                                   for (std::size_t p = 0; p < k; ++p) {
                                       double s = 0.0;
                                       for (std::size_t j = 0; j < m; ++j) {
                                           s += g(i, j) * bc(p, j);
                                       }
                                       ga(i, p) += s;
                                   }
                               }
                           }
                           if (gi[1] != nullptr) {
                               // dB = A^T G
                               Tensor& gb = *gi[1];
                               for (std::size_t i = 0; i < n; ++i) {
                                   for (std::size_t p = 0; p < k; ++p) {
                                       const double aip = ac(i, p);
                                       if (aip == 0.0) {
                                           continue;
                                       }
                                       for (std::size_t j = 0; j < m; ++j) {
                                           gb(p, j) += aip * g(i, j);
                                       }
                                   }
                               }
                           }
                       });
}

// ---- reductions and structural ops ----------------------------------------

Var sum(Var a) {
    Tape& tape = tape_of(a);
    double s = 0.0;
    for (double v : a.value().values()) {
        s += v;
    }
    return tape.record("sum", {a}, Tensor::scalar(s), [](const Tensor& g, std::span<Tensor* const> gi) {
        if (gi[0] == nullptr) {
            return;
        }
        for (double& v : gi[0]->values()) {
            v += g[0];
        }
    });
}

Var sum(Var a, int axis) {
    check_axis("sum", axis);
    Tape& tape = tape_of(a);
    const Tensor& av = a.value();
    Tensor out = axis == 0 ? Tensor(1, av.cols()) : Tensor(av.rows(), 1);
    for (std::size_t r = 0; r < av.rows(); ++r) {
        for (std::size_t c = 0; c < av.cols(); ++c) {
            out[axis == 0 ? c : r] += av(r, c);
        }
    }
    return tape.record("sum", {a}, std::move(out), [axis](const Tensor& g, std::span<Tensor* const> gi) {
        if (gi[0] == nullptr) {
            return;
        }
        Tensor& ga = *gi[0];
        for (std::size_t r = 0; r < ga.rows(); ++r) {
            for (std::size_t c = 0; c < ga.cols(); ++c) {
                ga(r, c) += g[axis == 0 ? c : r];
            }
        }
    });
}

Var mean(Var a) {
    const double n = static_cast<double>(a.value().size());
    if (n == 0.0) {
        throw ShapeError("mean: empty tensor");
    }
    return scale(sum(a), 1.0 / n);
}

Var mean(Var a, int axis) {
    check_axis("mean", axis);
    const double n = static_cast<double>(axis == 0 ? a.rows() : a.cols());
    if (n == 0.0) {
        throw ShapeError("mean: empty reduction axis");
    }
    return scale(sum(a, axis), 1.0 / n);
}

Var softmax(Var a, int axis) {
    check_axis("softmax", axis);
    Tape& tape = tape_of(a);
    const Tensor& av = a.value();
    Tensor out(av.rows(), av.cols());
    const std::size_t outer = axis == 1 ? av.rows() : av.cols();
    const std::size_t inner = axis == 1 ? av.cols() : av.rows();
    auto idx = [axis](std::size_t o, std::size_t i) {
        return axis == 1 ? std::pair{o, i} : std::pair{i, o};
    };
    for (std::size_t o = 0; o < outer; ++o) {
        double mx = -INFINITY;
        for (std::size_t i = 0; i < inner; ++i) {
            auto [r, c] = idx(o, i);
            mx = std::max(mx, av(r, c));
        }
        double z = 0.0;
        for (std::size_t i = 0; i < inner; ++i) {
            auto [r, c] = idx(o, i);
            out(r, c) = std::exp(av(r, c) - mx);
            z += out(r, c);
        }
        for (std::size_t i = 0; i < inner; ++i) {
            auto [r, c] = idx(o, i);
            out(r, c) /= z;
        }
    }
    Tensor y = out;
    return tape.record("softmax", {a}, std::move(out),
                       [y = std::move(y), axis, outer, inner, idx](const Tensor& g,
                                                                    std::span<Tensor* const> gi) {
                           if (gi[0] == nullptr) {
                               return;
                           }
                           Tensor& ga = *gi[0];
                           for (std::size_t o = 0; o < outer; ++o) {
                               double dot = 0.0;
                               for (std::size_t i = 0; i < inner; ++i) {
                                   auto [r, c] = idx(o, i);
                                   dot += g(r, c) * y(r, c);
                               }
                               for (std::size_t i = 0; i < inner; ++i) {
                                   auto [r, c] = idx(o, i);
                                   ga(r, c) += y(r, c) * (g(r, c) - dot);
                               }
                           }
                           (void)axis;
                       });
}

Var cumsum(Var a, int axis) {
    check_axis("cumsum", axis);
    Tape& tape = tape_of(a);
    const Tensor& av = a.value();
    Tensor out = av;
    if (axis == 1) {
        for (std::size_t r = 0; r < av.rows(); ++r) {
            for (std::size_t c = 1; c < av.cols(); ++c) {
                out(r, c) += out(r, c - 1);
            }
        }
    } else {
        for (std::size_t r = 1; r < av.rows(); ++r) {
            for (std::size_t c = 0; c < av.cols(); ++c) {
                out(r, c) += out(r - 1, c);
            }
        }
    }
    // Adjoint of a prefix sum is a suffix sum.
    return tape.record("cumsum", {a}, std::move(out), [axis](const Tensor& g, std::span<Tensor* const> gi) {
        if (gi[0] == nullptr) {
            return;
        }
        Tensor& ga = *gi[0];
        if (axis == 1) {
            for (std::size_t r = 0; r < g.rows(); ++r) {
                double acc = 0.0;
                for (std::size_t c = g.cols(); c-- > 0;) {
                    acc += g(r, c);
                    ga(r, c) += acc;
                }
            }
        } else {
            for (std::size_t c = 0; c < g.cols(); ++c) {
                double acc = 0.0;
                for (std::size_t r = g.rows(); r-- > 0;) {
                    acc += g(r, c);
                    ga(r, c) += acc;
                }
            }
        }
    });
}

Var broadcast_to(Var a, std::size_t rows, std::size_t cols) {
    Tape& tape = tape_of(a);
    const Tensor& av = a.value();
    if ((av.rows() != rows && av.rows() != 1) || (av.cols() != cols && av.cols() != 1)) {
        throw ShapeError("broadcast: cannot expand " + av.shape_str() + " to (" + std::to_string(rows) +
                         ", " + std::to_string(cols) + ")");
    }
    Tensor out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            out(r, c) = at_bc(av, r, c);
        }
    }
    return tape.record("broadcast", {a}, std::move(out), [](const Tensor& g, std::span<Tensor* const> gi) {
        if (gi[0] == nullptr) {
            return;
        }
        for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < g.cols(); ++c) {
                add_bc(*gi[0], r, c, g(r, c));
            }
        }
    });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
    Tape& tape = tape_of(a);
    const Tensor& av = a.value();
    if (start + count > av.cols()) {
        throw ShapeError("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of range for " + av.shape_str());
    }
    Tensor out(av.rows(), count);
    for (std::size_t r = 0; r < av.rows(); ++r) {
        for (std::size_t c = 0; c < count; ++c) {
            out(r, c) = av(r, start + c);
        }
    }
    return tape.record("slice_cols", {a}, std::move(out),
                       [start](const Tensor& g, std::span<Tensor* const> gi) {
                           if (gi[0] == nullptr) {
                               return;
                           }
                           for (std::size_t r = 0; r < g.rows(); ++r) {
                               for (std::size_t c = 0; c < g.cols(); ++c) {
                                   (*gi[0])(r, start + c) += g(r, c);
                               }
                           }
                       });
}

} // namespace phvae::ad
