#include "phvae/neural.hpp"

#include <algorithm>
#include <cmath>

#include "phvae/error.hpp"

namespace phvae::nn {

MLP::MLP(std::string name, std::vector<std::size_t> widths) : name_(std::move(name)), widths_(std::move(widths)) {
    if (widths_.size() < 2) {
        throw ShapeError("MLP needs at least an input and an output width");
    }
    for (std::size_t w : widths_) {
        if (w == 0) {
            throw ShapeError("MLP widths must be positive");
        }
    }
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        const std::string id = name_ + "." + std::to_string(l);
        weights_.emplace_back(id + ".weight", ad::Tensor(widths_[l], widths_[l + 1]));
        biases_.emplace_back(id + ".bias", ad::Tensor(1, widths_[l + 1]));
    }
}

std::size_t MLP::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        n += widths_[l] * widths_[l + 1] + widths_[l + 1];
    }
    return n;
}

std::vector<ad::Parameter*> MLP::parameters() {
    std::vector<ad::Parameter*> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.push_back(&weights_[l]);
        out.push_back(&biases_[l]);
    }
    return out;
}

std::vector<const ad::Parameter*> MLP::parameters() const {
    std::vector<const ad::Parameter*> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        out.push_back(&weights_[l]);
        out.push_back(&biases_[l]);
    }
    return out;
}

ad::Var MLP::forward(ad::Tape& tape, ad::Var input) {
    if (input.cols() != input_width()) {
        throw ShapeError(name_ + ": input width " + std::to_string(input.cols()) + ", expected " +
                         std::to_string(input_width()));
    }
    ad::Var h = input;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        h = ad::matmul(h, tape.param(weights_[l])) + tape.param(biases_[l]);
        if (l + 1 < weights_.size()) {
            h = ad::relu(h);
        }
    }
    return h;
}

ad::Tensor MLP::forward_values(const ad::Tensor& input) const {
    if (input.cols() != input_width()) {
        throw ShapeError(name_ + ": input width " + std::to_string(input.cols()) + ", expected " +
                         std::to_string(input_width()));
    }
    ad::Tensor h = input;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        const ad::Tensor& W = weights_[l].value;
        const ad::Tensor& b = biases_[l].value;
        ad::Tensor next(h.rows(), W.cols());
        for (std::size_t i = 0; i < h.rows(); ++i) {
            for (std::size_t j = 0; j < W.cols(); ++j) {
                next(i, j) = b[j];
            }
            for (std::size_t p = 0; p < W.rows(); ++p) {
                const double hip = h(i, p);
                if (hip == 0.0) {
                    continue;
                }
                for (std::size_t j = 0; j < W.cols(); ++j) {
                    next(i, j) += hip * W(p, j);
                }
            }
            if (l + 1 < weights_.size()) {
                for (std::size_t j = 0; j < W.cols(); ++j) {
                    next(i, j) = std::max(next(i, j), 0.0);
                }
            }
        }
        h = std::move(next);
    }
    return h;
}

void init_params(MLP& mlp, Rng& rng) {
    for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
        ad::Tensor& W = mlp.weight(l).value;
        const double bound = std::sqrt(6.0 / static_cast<double>(W.rows()));
        for (double& w : W.values()) {
            w = (2.0 * rng.uniform() - 1.0) * bound;
        }
        mlp.bias(l).value.fill(0.0);
        mlp.weight(l).zero_grad();
        mlp.bias(l).zero_grad();
    }
}

Adam::Adam(std::vector<ad::Parameter*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (const ad::Parameter* p : params_) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
    }
}

void Adam::zero_grad() {
    for (ad::Parameter* p : params_) {
        p->zero_grad();
    }
}

void Adam::step() {
    for (const ad::Parameter* p : params_) {
        if (!p->grad.all_finite()) {
            throw NonFiniteError("adam_step", "non-finite gradient for parameter " + p->name);
        }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto value = params_[i]->value.values();
        auto grad = params_[i]->grad.values();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < value.size(); ++k) {
            const double g = grad[k];
            m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g;
            v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[k] / c1;
            const double vhat = v[k] / c2;
            value[k] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        }
    }
}

double clip_global_norm(std::span<ad::Parameter* const> params, double max_norm) {
    double sq = 0.0;
    for (const ad::Parameter* p : params) {
        for (double g : p->grad.values()) {
            sq += g * g;
        }
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double s = max_norm / norm;
        for (ad::Parameter* p : params) {
            for (double& g : p->grad.values()) {
                g *= s;
            }
        }
    }
    return norm;
}

namespace {

std::vector<double> point_in_ball(std::size_t dim, double radius, Rng& rng) {
    std::vector<double> z(dim);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (double& v : z) {
            v = rng.normal();
            norm += v * v;
        }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
    for (double& v : z) {
        v *= r / norm;
    }
    return z;
}

} // namespace

double empirical_lipschitz(const MLP& mlp, std::size_t n_pairs, double radius, Rng& rng,
                           std::optional<ColumnRange> outputs) {
    if (n_pairs == 0) {
        throw DomainError("empirical_lipschitz: need at least one pair");
    }
    const std::size_t din = mlp.input_width();
    const ColumnRange cols = outputs.value_or(ColumnRange{0, mlp.output_width()});
    if (cols.start + cols.count > mlp.output_width()) {
        throw ShapeError("empirical_lipschitz: output columns out of range");
    }
    ad::Tensor za(n_pairs, din);
    ad::Tensor zb(n_pairs, din);
    for (std::size_t i = 0; i < n_pairs; ++i) {
        const auto a = point_in_ball(din, radius, rng);
        const auto b = point_in_ball(din, radius, rng);
        for (std::size_t j = 0; j < din; ++j) {
            za(i, j) = a[j];
            zb(i, j) = b[j];
        }
    }
    const ad::Tensor fa = mlp.forward_values(za);
    const ad::Tensor fb = mlp.forward_values(zb);
    double best = 0.0;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        double dz = 0.0;
        for (std::size_t j = 0; j < din; ++j) {
            const double d = za(i, j) - zb(i, j);
            dz += d * d;
        }
        if (dz == 0.0) {
            continue;
        }
        double df = 0.0;
        for (std::size_t j = cols.start; j < cols.start + cols.count; ++j) {
            const double d = fa(i, j) - fb(i, j);
            df += d * d;
        }
        best = std::max(best, std::sqrt(df / dz));
    }
    return best;
}

} // namespace phvae::nn
