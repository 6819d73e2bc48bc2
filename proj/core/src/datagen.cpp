#include "phvae/datagen.hpp"

#include <cmath>
#include <string>

#include "phvae/error.hpp"

namespace phvae::data {

void DatasetConfig::validate() const {
    if (!(tail_index > 0.0) || !std::isfinite(tail_index)) {
        throw ConfigError("tail_index must be positive");
    }
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw ConfigError("scale must be positive");
    }
    if (dim == 0 || n_train == 0 || n_test == 0 || n_gen == 0) {
        throw ConfigError("dimension and sample counts must be positive");
    }
}

double pareto_transform(double tail_index, double scale, double u) {
    return scale * std::pow(1.0 - u, -1.0 / tail_index);
}

std::vector<double> pareto_draws(double tail_index, double scale, std::size_t n, Rng& rng) {
    std::vector<double> out(n);
    for (double& x : out) {
        x = pareto_transform(tail_index, scale, rng.uniform());
    }
    return out;
}

namespace {

ad::Tensor draw_matrix(const DatasetConfig& cfg, std::size_t n, Rng rng) {
    ad::Tensor m(n, cfg.dim);
    for (double& x : m.values()) {
        x = pareto_transform(cfg.tail_index, cfg.scale, rng.uniform());
    }
    return m;
}

} // namespace

Dataset pareto_sample(const DatasetConfig& cfg, Rng& rng) {
    cfg.validate();
    Dataset ds;
    ds.train = draw_matrix(cfg, cfg.n_train, rng.substream({tag("train")}));
    ds.test = draw_matrix(cfg, cfg.n_test, rng.substream({tag("test")}));
    return ds;
}

double analytic_quantile(double tail_index, double scale, double q) {
    if (!(q >= 0.0 && q < 1.0)) {
        throw DomainError("analytic_quantile: q must lie in [0, 1)");
    }
    return scale * std::pow(1.0 - q, -1.0 / tail_index);
}

double analytic_ccdf(double tail_index, double scale, double x) {
    if (x < scale) {
        return 1.0;
    }
    return std::pow(scale / x, tail_index);
}

double analytic_cdf(double tail_index, double scale, double x) { return 1.0 - analytic_ccdf(tail_index, scale, x); }

std::vector<double> column(const ad::Tensor& m, std::size_t j) {
    if (j >= m.cols()) {
        throw ShapeError("column " + std::to_string(j) + " out of range for " + m.shape_str());
    }
    std::vector<double> out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        out[r] = m(r, j);
    }
    return out;
}

} // namespace phvae::data
