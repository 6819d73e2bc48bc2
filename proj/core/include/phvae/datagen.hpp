#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "phvae/autodiff.hpp"
#include "phvae/rng.hpp"

namespace phvae::data {

struct DatasetConfig {
    double tail_index = 2.0; // Pareto shape; smaller means heavier tail
    double scale = 1.0;      // x_m, the support's lower end
    std::size_t dim = 1;
    std::size_t n_train = 20'000;
    std::size_t n_test = 20'000;
    std::size_t n_gen = 20'000;
    std::uint64_t seed = 0;

    void validate() const;
};

// (n, dim) matrices; every entry >= scale and columns independent.
struct Dataset {
    ad::Tensor train;
    ad::Tensor test;
};

// Inverse-CDF transform x_m (1 - u)^(-1 / tail_index) for u in [0, 1).
double pareto_transform(double tail_index, double scale, double u);

std::vector<double> pareto_draws(double tail_index, double scale, std::size_t n, Rng& rng);

// Train and test come from disjoint substreams of `rng`, so the split is
// reproducible and independent of the sample counts of the other split.
Dataset pareto_sample(const DatasetConfig& cfg, Rng& rng);

double analytic_quantile(double tail_index, double scale, double q);
double analytic_ccdf(double tail_index, double scale, double x);
double analytic_cdf(double tail_index, double scale, double x);

std::vector<double> column(const ad::Tensor& m, std::size_t j);

} // namespace phvae::data
