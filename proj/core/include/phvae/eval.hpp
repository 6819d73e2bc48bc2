#pragma once

// Tail-fidelity metrics for comparing generated samples against held-out data.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phvae/autodiff.hpp"

namespace phvae::eval {

// sup_x |F_a(x) - F_b(x)| between the two empirical CDFs.
double ks_distance(std::span<const double> a, std::span<const double> b);

struct TailKS {
    double distance = 1.0;
    double threshold = 0.0; // u, the test quantile at `level`
    std::size_t n_gen_tail = 0;
    std::size_t n_test_tail = 0;
};

// KS distance between the conditional laws of gen and test above u, the
// empirical `level` quantile of test. Exactly 1 when nothing generated
// exceeds u.
TailKS tail_ks(std::span<const double> gen, std::span<const double> test, double level = 0.99);

// Linear interpolation between order statistics at (1-based) rank q(n-1)+1.
double empirical_quantile(std::span<const double> samples, double q);
double empirical_quantile_sorted(std::span<const double> sorted, double q);

// |Q_gen(q) - Q_test(q)| / Q_test(q)
double quantile_error(std::span<const double> gen, std::span<const double> test, double q);

struct CCDFCurve {
    std::vector<double> x;        // distinct sample values, ascending
    std::vector<double> survival; // fraction of samples strictly above x
    std::string label;
};

// Empirical survival curve; the final zero-survival point is dropped so the
// curve can go on log-log axes.
CCDFCurve ccdf_curve(std::span<const double> samples, std::string label);

void write_ccdf_csv(const std::filesystem::path& path, const CCDFCurve& curve);
CCDFCurve read_ccdf_csv(const std::filesystem::path& path);

// Unweighted mean of per-dimension values.
double per_dimension_aggregate(std::span<const double> per_dim);

struct DimensionMetrics {
    double ks = 0.0;
    double ks_tail = 1.0;
    double q_err_99 = 0.0;
    double q_err_995 = 0.0;
    double u = 0.0;
    std::size_t n_tail_gen = 0;
    std::size_t n_tail_test = 0;
};

struct RateStats {
    double min = 0.0;
    double median = 0.0;
};

struct MetricsReport {
    // Means over dimensions; tail counts are summed.
    double ks = 0.0;
    double ks_tail = 1.0;
    double q_err_99 = 0.0;
    double q_err_995 = 0.0;
    double u = 0.0;
    std::size_t n_tail_gen = 0;
    std::size_t n_tail_test = 0;
    std::vector<DimensionMetrics> per_dim;
    std::optional<RateStats> smallest_rate; // PH models only
    double lipschitz_estimate = 0.0;
};

DimensionMetrics evaluate_dimension(std::span<const double> gen, std::span<const double> test);

// Column-wise metrics for (n, d) generated and test matrices.
MetricsReport evaluate(const ad::Tensor& gen, const ad::Tensor& test);

RateStats rate_stats(std::vector<double> values);

} // namespace phvae::eval
