#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phvae/autodiff.hpp"
#include "phvae/rng.hpp"

namespace phvae::nn {

// Fully connected network: affine layers with ReLU between them and an
// identity output. widths = {input, hidden..., output}.
class MLP {
public:
    MLP() = default;
    MLP(std::string name, std::vector<std::size_t> widths);

    const std::vector<std::size_t>& widths() const noexcept { return widths_; }
    std::size_t input_width() const { return widths_.front(); }
    std::size_t output_width() const { return widths_.back(); }
    std::size_t layer_count() const noexcept { return weights_.size(); }
    std::size_t parameter_count() const;

    ad::Parameter& weight(std::size_t layer) { return weights_.at(layer); }
    const ad::Parameter& weight(std::size_t layer) const { return weights_.at(layer); }
    ad::Parameter& bias(std::size_t layer) { return biases_.at(layer); }
    const ad::Parameter& bias(std::size_t layer) const { return biases_.at(layer); }

    // Parameters in declaration order: W0, b0, W1, b1, ...
    std::vector<ad::Parameter*> parameters();
    std::vector<const ad::Parameter*> parameters() const;

    ad::Var forward(ad::Tape& tape, ad::Var input);
    // Forward pass on plain values (no gradient bookkeeping kept).
    ad::Tensor forward_values(const ad::Tensor& input) const;

private:
    std::string name_;
    std::vector<std::size_t> widths_;
    std::vector<ad::Parameter> weights_;
    std::vector<ad::Parameter> biases_;
};

// Kaiming-uniform weights, U(-sqrt(6 / fan_in), sqrt(6 / fan_in)); zero biases.
void init_params(MLP& mlp, Rng& rng);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Adam {
public:
    Adam(std::vector<ad::Parameter*> params, AdamConfig cfg = {});

    // One bias-corrected update from the gradients currently stored in the
    // parameters. Throws NonFiniteError naming the first bad parameter.
    void step();
    void zero_grad();

    std::size_t steps() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return cfg_; }

private:
    std::vector<ad::Parameter*> params_;
    AdamConfig cfg_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

// Rescales all gradients so their joint L2 norm is at most max_norm. Returns
// the norm before clipping.
double clip_global_norm(std::span<ad::Parameter* const> params, double max_norm);

// Half-open range of output columns.
struct ColumnRange {
    std::size_t start = 0;
    std::size_t count = 0;
};

// Largest ||f(z) - f(z')|| / ||z - z'|| over n_pairs pairs drawn uniformly
// from the ball of the given radius. A lower bound on the Lipschitz constant.
double empirical_lipschitz(const MLP& mlp, std::size_t n_pairs, double radius, Rng& rng,
                           std::optional<ColumnRange> outputs = std::nullopt);

} // namespace phvae::nn
