#include "phvae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "phvae/csv.hpp"
#include "phvae/datagen.hpp"
#include "phvae/error.hpp"

namespace phvae::eval {

namespace {

std::vector<double> sorted_copy(std::span<const double> s) {
    std::vector<double> v(s.begin(), s.end());
    std::sort(v.begin(), v.end());
    return v;
}

double ks_sorted(const std::vector<double>& a, const std::vector<double>& b) {
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) {
            ++i;
        }
        while (j < b.size() && b[j] == x) {
            ++j;
        }
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    // Once one side is exhausted its CDF is 1 and the other only rises toward
    // 1, so the last difference computed above is the largest remaining one.
    return d;
}

} // namespace

double ks_distance(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        throw DomainError("ks_distance: both samples must be non-empty");
    }
    return ks_sorted(sorted_copy(a), sorted_copy(b));
}

double empirical_quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) {
        throw DomainError("empirical_quantile: empty sample");
    }
    if (!(q >= 0.0 && q <= 1.0)) {
        throw DomainError("empirical_quantile: q must lie in [0, 1]");
    }
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) {
        return sorted.back();
    }
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double empirical_quantile(std::span<const double> samples, double q) {
    const auto s = sorted_copy(samples);
    return empirical_quantile_sorted(s, q);
}

TailKS tail_ks(std::span<const double> gen, std::span<const double> test, double level) {
    if (test.empty()) {
        throw DomainError("tail_ks: empty test sample");
    }
    const auto test_sorted = sorted_copy(test);
    TailKS out;
    out.threshold = empirical_quantile_sorted(test_sorted, level);
    const double u = out.threshold;

    std::vector<double> test_tail(std::upper_bound(test_sorted.begin(), test_sorted.end(), u), test_sorted.end());
    if (test_tail.empty()) {
        throw DomainError("tail_ks: no test samples above the threshold");
    }
    std::vector<double> gen_tail;
    for (double g : gen) {
        if (g > u) {
            gen_tail.push_back(g);
        }
    }
    out.n_test_tail = test_tail.size();
    out.n_gen_tail = gen_tail.size();
    if (gen_tail.empty()) {
        out.distance = 1.0;
        return out;
    }
    std::sort(gen_tail.begin(), gen_tail.end());
    out.distance = ks_sorted(gen_tail, test_tail);
    return out;
}

double quantile_error(std::span<const double> gen, std::span<const double> test, double q) {
    const double qt = empirical_quantile(test, q);
    if (qt == 0.0) {
        throw DomainError("quantile_error: test quantile is zero");
    }
    return std::abs(empirical_quantile(gen, q) - qt) / std::abs(qt);
}

CCDFCurve ccdf_curve(std::span<const double> samples, std::string label) {
    if (samples.empty()) {
        throw DomainError("ccdf_curve: empty sample");
    }
    const auto s = sorted_copy(samples);
    const double n = static_cast<double>(s.size());
    CCDFCurve c;
    c.label = std::move(label);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i + 1 < s.size() && s[i + 1] == s[i]) {
            continue; // collapse ties onto their last occurrence
        }
        const double surv = (n - static_cast<double>(i + 1)) / n;
        if (surv <= 0.0) {
            break;
        }
        c.x.push_back(s[i]);
        c.survival.push_back(surv);
    }
    return c;
}

void write_ccdf_csv(const std::filesystem::path& path, const CCDFCurve& curve) {
    std::ofstream os(path);
    if (!os) {
        throw FormatError("cannot open " + path.string() + " for writing");
    }
    os << "# label=" << curve.label << '\n';
    os << "x,ccdf\n";
    for (std::size_t i = 0; i < curve.x.size(); ++i) {
        os << csv::format_double(curve.x[i]) << ',' << csv::format_double(curve.survival[i]) << '\n';
    }
}

CCDFCurve read_ccdf_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw FormatError("cannot open " + path.string());
    }
    CCDFCurve c;
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.rfind("# label=", 0) == 0) {
            c.label = line.substr(8);
            continue;
        }
        if (!header) {
            if (line != "x,ccdf") {
                throw FormatError(path.string() + ": expected header 'x,ccdf'");
            }
            header = true;
            continue;
        }
        const auto f = csv::split(line);
        if (f.size() != 2) {
            throw FormatError(path.string() + ": expected two columns");
        }
        c.x.push_back(csv::parse_double(f[0]));
        c.survival.push_back(csv::parse_double(f[1]));
    }
    return c;
}

double per_dimension_aggregate(std::span<const double> per_dim) {
    if (per_dim.empty()) {
        throw DomainError("per_dimension_aggregate: no dimensions");
    }
    double s = 0.0;
    for (double v : per_dim) {
        s += v;
    }
    return s / static_cast<double>(per_dim.size());
}

DimensionMetrics evaluate_dimension(std::span<const double> gen, std::span<const double> test) {
    DimensionMetrics m;
    m.ks = ks_distance(gen, test);
    const TailKS t = tail_ks(gen, test, 0.99);
    m.ks_tail = t.distance;
    m.u = t.threshold;
    m.n_tail_gen = t.n_gen_tail;
    m.n_tail_test = t.n_test_tail;
    m.q_err_99 = quantile_error(gen, test, 0.99);
    m.q_err_995 = quantile_error(gen, test, 0.995);
    return m;
}

MetricsReport evaluate(const ad::Tensor& gen, const ad::Tensor& test) {
    if (gen.cols() != test.cols()) {
        throw ShapeError("evaluate: generated " + gen.shape_str() + " vs test " + test.shape_str());
    }
    MetricsReport r;
    std::vector<double> ks, kst, q99, q995, u;
    for (std::size_t j = 0; j < gen.cols(); ++j) {
        const auto g = data::column(gen, j);
        const auto t = data::column(test, j);
        DimensionMetrics m = evaluate_dimension(g, t);
        ks.push_back(m.ks);
        kst.push_back(m.ks_tail);
        q99.push_back(m.q_err_99);
        q995.push_back(m.q_err_995);
        u.push_back(m.u);
        r.n_tail_gen += m.n_tail_gen;
        r.n_tail_test += m.n_tail_test;
        r.per_dim.push_back(m);
    }
    r.ks = per_dimension_aggregate(ks);
    r.ks_tail = per_dimension_aggregate(kst);
    r.q_err_99 = per_dimension_aggregate(q99);
    r.q_err_995 = per_dimension_aggregate(q995);
    r.u = per_dimension_aggregate(u);
    return r;
}

RateStats rate_stats(std::vector<double> values) {
    if (values.empty()) {
        throw DomainError("rate_stats: no values");
    }
    std::sort(values.begin(), values.end());
    return {values.front(), empirical_quantile_sorted(values, 0.5)};
}

} // namespace phvae::eval
