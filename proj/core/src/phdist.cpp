#include "phvae/phdist.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "phvae/error.hpp"

namespace phvae::ph {

namespace {

void require_positive_rates(std::span<const double> rates, const char* where) {
    if (rates.empty()) {
        throw DomainError(std::string(where) + ": phase count must be at least 1");
    }
    for (double r : rates) {
        if (!(r > 0.0) || !std::isfinite(r)) {
            throw DomainError(std::string(where) + ": rates must be positive and finite");
        }
    }
}

void require_tolerance(double tol) {
    if (!(tol > 0.0 && tol < 1.0)) {
        throw DomainError("uniformization tolerance must lie in (0, 1)");
    }
}

double log_poisson(double qx, double log_qx, std::size_t k) {
    const double kd = static_cast<double>(k);
    return -qx + kd * log_qx - std::lgamma(kd + 1.0);
}

// v <- v P for the series-form uniformized chain, with p[j] = rates[j] / q.
inline void step_forward(std::span<double> v, std::span<const double> p) {
    for (std::size_t j = v.size(); j-- > 1;) {
        v[j] = v[j] * (1.0 - p[j]) + v[j - 1] * p[j - 1];
    }
    v[0] *= 1.0 - p[0];
}

// b <- P b (column action), with b beyond the last phase equal to zero.
inline void step_backward(std::span<double> b, std::span<const double> p) {
    const std::size_t m = b.size();
    for (std::size_t j = 0; j + 1 < m; ++j) {
        b[j] = b[j] * (1.0 - p[j]) + b[j + 1] * p[j];
    }
    b[m - 1] *= 1.0 - p[m - 1];
}

struct Uniformized {
    double density = 0.0;  // alpha exp(Ax) t
    double survival = 0.0; // alpha exp(Ax) 1
    std::size_t terms = 0;
};

Uniformized uniformize(std::span<const double> alpha, std::span<const double> rates, double x, double q,
                       double tol, std::size_t max_terms) {
    const std::size_t m = rates.size();
    const double qx = q * x;
    const std::size_t K = truncation_point(qx, tol, max_terms);
    const double log_qx = std::log(qx);

    std::vector<double> p(m);
    for (std::size_t j = 0; j < m; ++j) {
        p[j] = rates[j] / q;
    }
    std::vector<double> v(alpha.begin(), alpha.end());
    Uniformized out;
    out.terms = K + 1;
    for (std::size_t k = 0; k <= K; ++k) {
        const double w = std::exp(log_poisson(qx, log_qx, k));
        out.density += w * v[m - 1];
        out.survival += w * std::accumulate(v.begin(), v.end(), 0.0);
        if (k < K) {
            step_forward(v, p);
        }
    }
    out.density *= rates[m - 1];
    return out;
}

} // namespace

// ---- CanonicalPH ----------------------------------------------------------

CanonicalPH::CanonicalPH(std::vector<double> init_probs, std::vector<double> rates)
    : init_(std::move(init_probs)), rates_(std::move(rates)) {
    if (init_.size() != rates_.size()) {
        throw ShapeError("CanonicalPH: init_probs and rates differ in length");
    }
    require_positive_rates(rates_, "CanonicalPH");
    double total = 0.0;
    for (double a : init_) {
        if (!(a >= 0.0) || !std::isfinite(a)) {
            throw DomainError("CanonicalPH: init_probs must be non-negative");
        }
        total += a;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw DomainError("CanonicalPH: init_probs sum to " + std::to_string(total) + ", not 1");
    }
    if (!std::is_sorted(rates_.begin(), rates_.end())) {
        throw DomainError("CanonicalPH: rates must be non-decreasing");
    }
}

std::vector<double> CanonicalPH::subgenerator() const {
    const std::size_t m = phases();
    std::vector<double> a(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        a[i * m + i] = -rates_[i];
        if (i + 1 < m) {
            a[i * m + i + 1] = rates_[i];
        }
    }
    return a;
}

std::vector<double> CanonicalPH::exit_vector() const {
    std::vector<double> t(phases(), 0.0);
    t.back() = rates_.back();
    return t;
}

UniformizationPlan UniformizationPlan::for_ph(const CanonicalPH& ph, double tolerance, std::size_t max_terms) {
    return UniformizationPlan{ph.largest_rate(), tolerance, max_terms};
}

// ---- truncation -----------------------------------------------------------

std::size_t truncation_point(double qx, double tol, std::size_t max_terms) {
    if (!(qx >= 0.0) || !std::isfinite(qx)) {
        throw DomainError("truncation_point: qx must be finite and non-negative");
    }
    require_tolerance(tol);
    if (qx == 0.0) {
        return 0;
    }
    // The answer is always above the mean; anything that cannot fit under the
    // cap is reported with a normal-approximation estimate of the need.
    if (qx > static_cast<double>(max_terms)) {
        const double est = qx + 8.0 * std::sqrt(qx);
        throw TruncationError(static_cast<std::size_t>(est), max_terms);
    }

    // Probabilities from 0 to a point well past the target, in log space so
    // large qx does not underflow exp(-qx).
    const double log_qx = std::log(qx);
    const double negligible = tol * 1e-6;
    std::vector<double> probs;
    const std::size_t mode = static_cast<std::size_t>(qx);
    for (std::size_t k = 0;; ++k) {
        const double pk = std::exp(log_poisson(qx, log_qx, k));
        probs.push_back(pk);
        if (k > mode) {
            // Past the mode p_{k+j} <= p_k r^j with r = qx / (k + 1) < 1.
            const double r = qx / static_cast<double>(k + 1);
            if (pk * r / (1.0 - r) < negligible) {
                break;
            }
        }
        if (k > max_terms + 1) {
            break;
        }
    }

    // tail(K) = sum_{k > K} p_k, accumulated from the far end for accuracy.
    double tail = 0.0;
    std::size_t K = probs.size() - 1;
    while (K > 0 && tail + probs[K] < tol) {
        tail += probs[K];
        --K;
    }
    if (K > max_terms) {
        throw TruncationError(K, max_terms);
    }
    return K;
}

// ---- scalar evaluation ----------------------------------------------------

namespace {

void check_plan(const CanonicalPH& ph, const UniformizationPlan& plan) {
    if (!(plan.rate >= ph.largest_rate())) {
        throw DomainError("uniformization rate must be at least the largest phase rate");
    }
    require_tolerance(plan.tolerance);
}

} // namespace

double pdf(const CanonicalPH& ph, double x, const UniformizationPlan& plan) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError("pdf: x must be positive and finite");
    }
    check_plan(ph, plan);
    const auto u = uniformize(ph.init_probs(), ph.rates(), x, plan.rate, plan.tolerance, plan.max_terms);
    return std::max(u.density, 0.0);
}

double pdf(const CanonicalPH& ph, double x) { return pdf(ph, x, UniformizationPlan::for_ph(ph)); }

double ccdf(const CanonicalPH& ph, double x, const UniformizationPlan& plan) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
        throw DomainError("ccdf: x must be non-negative and finite");
    }
    check_plan(ph, plan);
    if (x == 0.0) {
        return 1.0;
    }
    const auto u = uniformize(ph.init_probs(), ph.rates(), x, plan.rate, plan.tolerance, plan.max_terms);
    return std::clamp(u.survival, 0.0, 1.0);
}

double ccdf(const CanonicalPH& ph, double x) { return ccdf(ph, x, UniformizationPlan::for_ph(ph)); }

double cdf(const CanonicalPH& ph, double x) { return 1.0 - ccdf(ph, x); }

double mean(const CanonicalPH& ph) {
    // alpha (-A)^{-1} 1 in series form: starting in phase i visits i..m-1.
    const auto rates = ph.rates();
    const auto init = ph.init_probs();
    double suffix = 0.0;
    double result = 0.0;
    for (std::size_t i = rates.size(); i-- > 0;) {
        suffix += 1.0 / rates[i];
        result += init[i] * suffix;
    }
    return result;
}

double sample(const CanonicalPH& ph, Rng& rng) {
    const auto init = ph.init_probs();
    const auto rates = ph.rates();
    const double u = rng.uniform();
    std::size_t start = 0;
    double acc = init[0];
    while (u >= acc && start + 1 < init.size()) {
        ++start;
        acc += init[start];
    }
    double t = 0.0;
    for (std::size_t j = start; j < rates.size(); ++j) {
        t += rng.exponential(rates[j]);
    }
    return t;
}

// ---- differentiable log density ----------------------------------------------

void LogLikTelemetry::merge(const LogLikTelemetry& o) {
    evaluations += o.evaluations;
    clamped += o.clamped;
    total_terms += o.total_terms;
    max_terms_used = std::max(max_terms_used, o.max_terms_used);
}

LogPdfResult logpdf_with_grad(std::span<const double> alpha, std::span<const double> rates, double x,
                              const LogLikOptions& opts, std::span<double> d_init, std::span<double> d_rates) {
    const std::size_t m = rates.size();
    if (alpha.size() != m) {
        throw ShapeError("ph logpdf: init_probs and rates differ in length");
    }
    require_positive_rates(rates, "ph logpdf");
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError("ph logpdf: x must be positive and finite");
    }
    const bool want_grad = !d_init.empty() || !d_rates.empty();
    if ((!d_init.empty() && d_init.size() != m) || (!d_rates.empty() && d_rates.size() != m)) {
        throw ShapeError("ph logpdf: gradient buffers must have one entry per phase");
    }

    const double q = *std::max_element(rates.begin(), rates.end());
    const double qx = q * x;
    const std::size_t K = truncation_point(qx, opts.tolerance, opts.max_terms);
    const double log_qx = std::log(qx);

    std::vector<double> p(m);
    for (std::size_t j = 0; j < m; ++j) {
        p[j] = rates[j] / q;
    }
    std::vector<double> w(K + 1);
    for (std::size_t k = 0; k <= K; ++k) {
        w[k] = std::exp(log_poisson(qx, log_qx, k));
    }

    // Forward sweep v_k = alpha P^k, keeping every v_k when a gradient is
    // requested. s = sum_k w_k v_k[m-1], f = rates[m-1] * s.
    std::vector<double> trail;
    if (want_grad) {
        trail.resize((K + 1) * m);
    }
    std::vector<double> v(alpha.begin(), alpha.end());
    double s = 0.0;
    for (std::size_t k = 0; k <= K; ++k) {
        s += w[k] * v[m - 1];
        if (want_grad) {
            std::copy(v.begin(), v.end(), trail.begin() + static_cast<std::ptrdiff_t>(k * m));
        }
        if (k < K) {
            step_forward(v, p);
        }
    }
    const double f = rates[m - 1] * s;

    LogPdfResult res;
    res.terms = K + 1;
    if (!(f >= opts.density_floor)) {
        res.value = std::log(opts.density_floor);
        res.clamped = true;
        return res;
    }
    res.value = std::log(f);
    if (!want_grad) {
        return res;
    }

    // Reverse sweep. b_k is the adjoint of v_k:
    //   b_K = w_K t,   b_k = w_k t + P b_{k+1}.
    // With q held fixed (exp(Ax) does not depend on the choice of q), v_{k+1}
    // depends on rates[j] through P, giving
    //   df/drates[j] += v_k[j] / q * (b_{k+1}[j+1] - b_{k+1}[j]).
    const double t_last = rates[m - 1];
    std::vector<double> b(m, 0.0);
    std::vector<double> g_rates(m, 0.0);
    for (std::size_t k = K + 1; k-- > 0;) {
        if (k < K) {
            const double* vk = trail.data() + k * m;
            for (std::size_t j = 0; j < m; ++j) {
                const double next = j + 1 < m ? b[j + 1] : 0.0;
                g_rates[j] += vk[j] / q * (next - b[j]);
            }
            step_backward(b, p);
        }
        b[m - 1] += w[k] * t_last;
    }
    g_rates[m - 1] += s; // through the exit rate t = rates[m-1] e_m

    const double inv_f = 1.0 / f;
    for (std::size_t j = 0; j < m; ++j) {
        if (!d_init.empty()) {
            d_init[j] = b[j] * inv_f;
        }
        if (!d_rates.empty()) {
            d_rates[j] = g_rates[j] * inv_f;
        }
    }
    return res;
}

ad::Var logpdf_rows(ad::Var init_probs, ad::Var rates, std::span<const double> x, const LogLikOptions& opts,
                    LogLikTelemetry* telemetry) {
    const ad::Tensor& av = init_probs.value();
    const ad::Tensor& rv = rates.value();
    const std::size_t n = x.size();
    const std::size_t m = av.cols();
    if (rv.cols() != m || av.rows() != rv.rows() || (av.rows() != n && av.rows() != 1)) {
        throw ShapeError("ph logpdf: init " + av.shape_str() + " and rates " + rv.shape_str() +
                         " do not match " + std::to_string(n) + " samples");
    }
    const bool shared = av.rows() == 1;
    const bool need_grad = init_probs.tracked() || rates.tracked();

    ad::Tensor out(n, 1);
    ad::Tensor d_init(n, m);
    ad::Tensor d_rates(n, m);
    LogLikTelemetry local;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = shared ? 0 : i;
        auto alpha = av.values().subspan(r * m, m);
        auto lam = rv.values().subspan(r * m, m);
        std::span<double> gi = need_grad ? d_init.values().subspan(i * m, m) : std::span<double>{};
        std::span<double> gr = need_grad ? d_rates.values().subspan(i * m, m) : std::span<double>{};
        const auto res = logpdf_with_grad(alpha, lam, x[i], opts, gi, gr);
        out[i] = res.value;
        ++local.evaluations;
        local.clamped += res.clamped ? 1 : 0;
        local.total_terms += res.terms;
        local.max_terms_used = std::max(local.max_terms_used, res.terms);
    }
    if (telemetry != nullptr) {
        telemetry->merge(local);
    }

    ad::Tape& tape = *init_probs.tape();
    return tape.record("ph_logpdf", {init_probs, rates}, std::move(out),
                       [d_init = std::move(d_init), d_rates = std::move(d_rates), shared,
                        m](const ad::Tensor& g, std::span<ad::Tensor* const> gi) {
                           for (std::size_t i = 0; i < g.rows(); ++i) {
                               const std::size_t r = shared ? 0 : i;
                               for (std::size_t j = 0; j < m; ++j) {
                                   if (gi[0] != nullptr) {
                                       (*gi[0])(r, j) += g[i] * d_init(i, j);
                                   }
                                   if (gi[1] != nullptr) {
                                       (*gi[1])(r, j) += g[i] * d_rates(i, j);
                                   }
                               }
                           }
                       });
}

ad::Var logpdf_diff(ad::Var init_probs, ad::Var rates, std::span<const double> x, const LogLikOptions& opts,
                    LogLikTelemetry* telemetry) {
    return ad::sum(logpdf_rows(init_probs, rates, x, opts, telemetry));
}

} // namespace phvae::ph
