#pragma once

// Phase-type distributions in series canonical form.
//
// A CanonicalPH with m phases is the absorption time of a CTMC that starts in
// phase i with probability init_probs[i], then passes through phases
// i, i+1, ..., m-1 in order, spending an Exp(rates[j]) holding time in each.
// Its sub-generator is upper bidiagonal,
//
//     A(j, j) = -rates[j],   A(j, j+1) = rates[j],
//
// and the only exit to absorption is from the last phase, t = rates[m-1] e_m.
// Density and survival function are evaluated by uniformization:
//
//     exp(A x) = sum_k Pois(k; q x) P^k,   P = I + A / q,   q = max rate,
//
// which only needs O(K m) work per point because P is bidiagonal.

#include <cstddef>
#include <span>
#include <vector>

#include "phvae/autodiff.hpp"
#include "phvae/rng.hpp"

namespace phvae::ph {

class CanonicalPH {
public:
    // Throws DomainError unless init_probs is a probability vector (sum within
    // 1e-12) and 0 < rates[0] <= ... <= rates[m-1].
    CanonicalPH(std::vector<double> init_probs, std::vector<double> rates);

    std::size_t phases() const noexcept { return rates_.size(); }
    std::span<const double> init_probs() const noexcept { return init_; }
    std::span<const double> rates() const noexcept { return rates_; }

    // Governs the exponential decay of the tail, ccdf(x) ~ C exp(-rates[0] x).
    double smallest_rate() const noexcept { return rates_.front(); }
    double largest_rate() const noexcept { return rates_.back(); }

    // Dense m x m sub-generator (row-major) and exit vector, for diagnostics.
    std::vector<double> subgenerator() const;
    std::vector<double> exit_vector() const;

private:
    std::vector<double> init_;
    std::vector<double> rates_;
};

inline constexpr double kDefaultTolerance = 1e-12;
inline constexpr std::size_t kDefaultMaxTerms = 10'000'000;

struct UniformizationPlan {
    double rate = 0.0; // q; must be >= the largest phase rate
    double tolerance = kDefaultTolerance;
    std::size_t max_terms = kDefaultMaxTerms;

    // q = largest rate of `ph`, the smallest valid choice.
    static UniformizationPlan for_ph(const CanonicalPH& ph, double tolerance = kDefaultTolerance,
                                     std::size_t max_terms = kDefaultMaxTerms);
};

// Smallest K such that P(N > K) < tol for N ~ Poisson(qx). Throws
// TruncationError when K would exceed max_terms.
std::size_t truncation_point(double qx, double tol, std::size_t max_terms = kDefaultMaxTerms);

double pdf(const CanonicalPH& ph, double x, const UniformizationPlan& plan);
double pdf(const CanonicalPH& ph, double x);
double ccdf(const CanonicalPH& ph, double x, const UniformizationPlan& plan);
double ccdf(const CanonicalPH& ph, double x);
double cdf(const CanonicalPH& ph, double x);

double mean(const CanonicalPH& ph);

// Exact absorption-time draw: start phase from init_probs, then the sum of the
// exponential holding times of the remaining phases.
double sample(const CanonicalPH& ph, Rng& rng);

// ---- differentiable log-likelihood -----------------------------------------

struct LogLikOptions {
    double tolerance = kDefaultTolerance;
    std::size_t max_terms = kDefaultMaxTerms;
    // Densities below this value are clamped (with zero gradient) and counted.
    double density_floor = 1e-300;
};

struct LogLikTelemetry {
    std::size_t evaluations = 0;
    std::size_t clamped = 0;
    std::size_t total_terms = 0;
    std::size_t max_terms_used = 0;

    void merge(const LogLikTelemetry& o);
};

// Log density of one series-form PH at x, and optionally its gradient with
// respect to the initial probabilities and the rates (either span may be
// empty to skip it). Rates need only be positive here, not ordered.
struct LogPdfResult {
    double value = 0.0;
    bool clamped = false;
    std::size_t terms = 0;
};
LogPdfResult logpdf_with_grad(std::span<const double> init_probs, std::span<const double> rates, double x,
                              const LogLikOptions& opts, std::span<double> d_init, std::span<double> d_rates);

// Per-sample log densities as an (n, 1) tape node. `init_probs` and `rates`
// are (n, m) or (1, m) (shared across the batch); x has n positive entries.
ad::Var logpdf_rows(ad::Var init_probs, ad::Var rates, std::span<const double> x,
                    const LogLikOptions& opts = {}, LogLikTelemetry* telemetry = nullptr);

// Sum of log densities over the batch, as a scalar tape node.
ad::Var logpdf_diff(ad::Var init_probs, ad::Var rates, std::span<const double> x,
                    const LogLikOptions& opts = {}, LogLikTelemetry* telemetry = nullptr);

} // namespace phvae::ph
