#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "oracles.hpp"
#include "phvae/datagen.hpp"
#include "phvae/error.hpp"
#include "phvae/eval.hpp"
#include "phvae/rng.hpp"

using namespace phvae;

namespace {

// sup |F_a - F_b| evaluated at every pooled point.
double ks_brute(const std::vector<double>& a, const std::vector<double>& b) {
    auto ecdf = [](const std::vector<double>& s, double x) {
        return static_cast<double>(std::count_if(s.begin(), s.end(), [x](double v) { return v <= x; })) /
               static_cast<double>(s.size());
    };
    double d = 0.0;
    for (const auto* s : {&a, &b})
        for (double x : *s) d = std::max(d, std::fabs(ecdf(a, x) - ecdf(b, x)));
    return d;
}

std::vector<double> pareto(double alpha, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    return data::pareto_draws(alpha, 1.0, n, rng);
}

} // namespace

TEST_CASE("ks_distance") {
    const std::vector<double> a{1, 2, 3}, b{1.5, 2.5, 3.5};
    CHECK(eval::ks_distance(a, a) == 0.0);
    CHECK(eval::ks_distance(std::vector<double>{0.1, 0.5, 0.9}, std::vector<double>{2.1, 2.7}) == 1.0);
    CHECK(eval::ks_distance(a, b) == doctest::Approx(ks_brute(a, b)).epsilon(1e-15));
    CHECK(eval::ks_distance(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(eval::ks_distance(a, std::vector<double>{}), DomainError);

    Rng rng(12);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> x(1 + rng() % 40), y(1 + rng() % 40);
        // Coarse grid so ties are common.
        for (auto& v : x) v = std::floor(rng.uniform() * 10);
        for (auto& v : y) v = std::floor(rng.uniform() * 12);
        const double d = eval::ks_distance(x, y);
        CHECK(d == doctest::Approx(ks_brute(x, y)).epsilon(1e-14));
        CHECK(d == eval::ks_distance(y, x));
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
    }
}

TEST_CASE("tail_ks") {
    const auto test = pareto(2.0, 20'000, 1);
    SUBCASE("no generated mass above u is exactly 1") {
        const double u = eval::empirical_quantile(test, 0.99);
        std::vector<double> gen(5000);
        for (std::size_t i = 0; i < gen.size(); ++i) gen[i] = 1.0 + (u - 1.0) * static_cast<double>(i) / 4999.0;
        const auto r = eval::tail_ks(gen, test);
        CHECK(r.distance == 1.0);
        CHECK(r.n_gen_tail == 0);
        CHECK(r.threshold == u);
        CHECK(r.n_test_tail == 200);
    }
    SUBCASE("self comparison is small") {
        const auto r = eval::tail_ks(test, test);
        CHECK(r.distance <= 2.0 / std::sqrt(0.01 * 20'000));
        CHECK(r.distance == 0.0);
    }
    SUBCASE("independent draw of the same law passes the two-sample critical value") {
        const auto gen = pareto(2.0, 20'000, 2);
        const auto r = eval::tail_ks(gen, test);
        CHECK(r.n_gen_tail > 0);
        CHECK(r.distance < oracle::ks_critical_two_sample(r.n_gen_tail, r.n_test_tail, 0.01));
    }
    SUBCASE("ks_tail = 1 iff max(gen) <= u") {
        const double u = eval::tail_ks(test, test).threshold;
        CHECK(eval::tail_ks(std::vector<double>{u, 1.0, 2.0}, test).distance == 1.0);
        // A single generated point at the test maximum: the conditional CDFs
        // differ by 1 - 1/200 just below it.
        const double top = *std::max_element(test.begin(), test.end());
        CHECK(eval::tail_ks(std::vector<double>{top, 1.0}, test).distance == doctest::Approx(0.995));
    }
    SUBCASE("invariant under a strictly increasing transform") {
        std::vector<double> t101(test.begin(), test.begin() + 101);
        const auto gen = pareto(2.5, 3000, 3);
        auto f = [](double x) { return std::log(x) * 3.0 + std::sqrt(x); };
        std::vector<double> tg = gen, tt = t101;
        for (auto& v : tg) v = f(v);
        for (auto& v : tt) v = f(v);
        const auto a = eval::tail_ks(gen, t101);
        const auto b = eval::tail_ks(tg, tt);
        CHECK(a.n_gen_tail == b.n_gen_tail);
        CHECK(a.distance == doctest::Approx(b.distance).epsilon(1e-14));
        // On a large test set u interpolates between order statistics; the
        // statistic may then move by at most one generated point.
        std::vector<double> tt2 = test;
        for (auto& v : tt2) v = f(v);
        const auto c = eval::tail_ks(gen, test);
        const auto d = eval::tail_ks(tg, tt2);
        CHECK(std::fabs(c.distance - d.distance) <= 1.0 / static_cast<double>(std::max<std::size_t>(1, c.n_gen_tail)));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(eval::tail_ks(test, std::vector<double>{}), DomainError);
        CHECK_THROWS_AS(eval::tail_ks(test, std::vector<double>(300, 1.0)), DomainError);
    }
}

TEST_CASE("empirical_quantile") {
    const std::vector<double> s{5, 1, 4, 2, 3};
    CHECK(eval::empirical_quantile(s, 0.5) == 3.0);
    CHECK(eval::empirical_quantile(s, 0.0) == 1.0);
    CHECK(eval::empirical_quantile(s, 1.0) == 5.0);
    CHECK(eval::empirical_quantile(s, 0.3) == doctest::Approx(2.2).epsilon(1e-15));
    CHECK(eval::empirical_quantile(pareto(2.0, 20'000, 5), 0.99) == doctest::Approx(10.0).epsilon(0.05));
    CHECK_THROWS_AS(eval::empirical_quantile(std::vector<double>{}, 0.5), DomainError);
    CHECK_THROWS_AS(eval::empirical_quantile(s, 1.5), DomainError);
}

TEST_CASE("quantile_error") {
    const auto test = pareto(3.0, 5000, 6);
    CHECK(eval::quantile_error(test, test, 0.99) == 0.0);
    std::vector<double> doubled = test;
    for (auto& v : doubled) v *= 2.0;
    CHECK(eval::quantile_error(doubled, test, 0.99) == doctest::Approx(1.0).epsilon(1e-14));
    const auto gen = pareto(2.0, 5000, 7);
    std::vector<double> sg = gen, st = test;
    for (auto& v : sg) v *= 3.7;
    for (auto& v : st) v *= 3.7;
    for (double q : {0.99, 0.995})
        CHECK(eval::quantile_error(sg, st, q) == doctest::Approx(eval::quantile_error(gen, test, q)).epsilon(1e-12));
}

TEST_CASE("ccdf_curve") {
    const auto c = eval::ccdf_curve(std::vector<double>{2, 1}, "pair");
    REQUIRE(c.x.size() == 1);
    CHECK(c.x[0] == 1.0);
    CHECK(c.survival[0] == 0.5);
    CHECK(c.label == "pair");

    const auto ties = eval::ccdf_curve(std::vector<double>{1, 1, 2, 3}, "ties");
    CHECK(ties.x == std::vector<double>{1, 2});
    CHECK(ties.survival == std::vector<double>{0.5, 0.25});

    const auto xs = pareto(3.0, 100'000, 8);
    const auto curve = eval::ccdf_curve(xs, "pareto");
    CHECK(curve.survival.front() == doctest::Approx(1.0 - 1e-5));
    double worst = 0.0;
    for (std::size_t i = 0; i < curve.x.size(); ++i) {
        if (i > 0) {
            CHECK(curve.x[i] > curve.x[i - 1]);
            CHECK(curve.survival[i] < curve.survival[i - 1]);
        }
        worst = std::max(worst, std::fabs(curve.survival[i] - data::analytic_ccdf(3.0, 1.0, curve.x[i])));
    }
    CHECK(worst < oracle::ks_critical_one_sample(xs.size(), 0.01));

    const auto path = std::filesystem::temp_directory_path() / "phvae_ccdf_test.csv";
    eval::write_ccdf_csv(path, curve);
    const auto back = eval::read_ccdf_csv(path);
    CHECK(back.label == "pareto");
    CHECK(back.x == curve.x);
    CHECK(back.survival == curve.survival);
    std::filesystem::remove(path);
}

TEST_CASE("aggregation across dimensions") {
    CHECK(eval::per_dimension_aggregate(std::vector<double>{0.7}) == 0.7);
    CHECK(eval::per_dimension_aggregate(std::vector<double>{0.2, 0.4}) == doctest::Approx(0.3));
    CHECK_THROWS_AS(eval::per_dimension_aggregate(std::vector<double>{}), DomainError);

    const auto g = pareto(2.0, 4000, 9), t = pareto(2.0, 4000, 10);
    ad::Tensor g1(4000, 1, g), t1(4000, 1, t);
    ad::Tensor g3(4000, 3), t3(4000, 3);
    for (std::size_t i = 0; i < 4000; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            g3(i, j) = g[i];
            t3(i, j) = t[i];
        }
    const auto r1 = eval::evaluate(g1, t1);
    const auto r3 = eval::evaluate(g3, t3);
    CHECK(r3.per_dim.size() == 3);
    CHECK(r3.ks == doctest::Approx(r1.ks).epsilon(1e-15));
    CHECK(r3.ks_tail == doctest::Approx(r1.ks_tail).epsilon(1e-15));
    CHECK(r3.q_err_99 == doctest::Approx(r1.q_err_99).epsilon(1e-15));
    CHECK(r3.n_tail_test == 3 * r1.n_tail_test);
    const auto dm = eval::evaluate_dimension(g, t);
    CHECK(dm.ks == r1.ks);
    CHECK(dm.q_err_995 == r1.q_err_995);
    CHECK_THROWS_AS(eval::evaluate(g1, t3), ShapeError);
}

TEST_CASE("rate statistics") {
    const auto r = eval::rate_stats({3.0, 0.5, 2.0, 1.0});
    CHECK(r.min == 0.5);
    CHECK(r.median == 1.5);
}
