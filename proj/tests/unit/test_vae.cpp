#include "doctest.h"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "phvae/datagen.hpp"
#include "phvae/error.hpp"
#include "phvae/phdist.hpp"
#include "phvae/vae.hpp"

using namespace phvae;
using ad::Tape;
using ad::Tensor;
using vae::DecoderKind;

namespace {

vae::VAEConfig tiny(DecoderKind kind, std::size_t dim = 2) {
    vae::VAEConfig cfg;
    cfg.kind = kind;
    cfg.data_dim = dim;
    cfg.latent_dim = 3;
    cfg.phases = 4;
    cfg.hidden = {5};
    return cfg;
}

void zero_all(vae::VAEModel& m) {
    for (auto* p : m.parameters()) p->value.fill(0.0);
}

Tensor normal_tensor(std::size_t r, std::size_t c, Rng& rng) {
    Tensor t(r, c);
    for (auto& v : t.values()) v = rng.normal();
    return t;
}

// Fixed 4 x d batch at Pareto(3) quantiles 0.1, 0.4, 0.7 and 0.95. Random
// batches occasionally contain draws so extreme that the loss reaches 1e9,
// where central differences themselves lose about ten digits.
Tensor quantile_batch(std::size_t d) {
    Tensor t(4, d);
    const double qs[4] = {0.1, 0.4, 0.7, 0.95};
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < d; ++j) t(i, j) = data::analytic_quantile(3.0, 1.0, qs[(i + j) % 4]);
    return t;
}

Tensor pareto_batch(std::size_t n, std::size_t d, Rng& rng) {
    Tensor t(n, d);
    for (auto& v : t.values()) v = data::pareto_transform(3.0, 1.0, rng.uniform());
    return t;
}

// Largest elementwise relative error between the tape gradient of the ELBO
// loss and central differences, over every model parameter. Tiny random nets
// can start with losses near 1e5, so the comparison discounts the
// differences' rounding error.
double elbo_gradient_error(vae::VAEModel& model, const Tensor& x, const Tensor& noise) {
    auto loss = [&] {
        Tape tape;
        return vae::elbo_with_noise(model, tape, x, noise).loss.value().item();
    };
    for (auto* p : model.parameters()) p->zero_grad();
    double value = 0.0;
    {
        Tape tape;
        const auto l = vae::elbo_with_noise(model, tape, x, noise).loss;
        value = l.value().item();
        tape.backward(l);
    }
    double worst = 0.0;
    for (auto* p : model.parameters()) {
        for (std::size_t k = 0; k < p->value.size(); ++k) {
            const double orig = p->value[k];
            p->value[k] = orig + 1e-5;
            const double fp = loss();
            p->value[k] = orig - 1e-5;
            const double fm = loss();
            p->value[k] = orig;
            worst = std::max(worst, oracle::grad_rel_err(p->grad[k], (fp - fm) / 2e-5, value));
        }
    }
    return worst;
}

} // namespace

TEST_CASE("model shapes") {
    vae::VAEModel g(tiny(DecoderKind::gaussian, 3)), p(tiny(DecoderKind::ph, 3));
    CHECK(g.head_width() == 6);
    CHECK(p.head_width() == 2 * 4 * 3);
    CHECK(g.encoder().output_width() == 6);
    CHECK(p.decoder().input_width() == 3);
    auto bad = tiny(DecoderKind::ph);
    bad.phases = 0;
    CHECK_THROWS_AS(vae::VAEModel{bad}, ConfigError);
}

TEST_CASE("encode and reparameterize") {
    vae::VAEModel m(tiny(DecoderKind::gaussian));
    zero_all(m);
    Tape tape;
    auto enc = m.encode(tape, tape.constant(Tensor(4, 2, 7.0)));
    for (double v : enc.mu.value().values()) CHECK(v == 0.0);
    for (double v : enc.logvar.value().values()) CHECK(v == 0.0);

    Rng rng(1);
    const Tensor n = normal_tensor(4, 3, rng);
    CHECK(vae::reparameterize(tape, enc, Tensor(4, 3)).value().values()[5] == 0.0);
    const Tensor z = vae::reparameterize(tape, enc, n).value();
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == n[i]);
    CHECK_THROWS_AS(vae::reparameterize(tape, enc, Tensor(4, 2)), ShapeError);

    SUBCASE("sample variance of z matches exp(logvar)") {
        Tape t2;
        const std::size_t n_draws = 100'000;
        vae::EncoderOutput e{t2.constant(Tensor(n_draws, 1, 0.4)), t2.constant(Tensor(n_draws, 1, -0.7))};
        const Tensor zz = vae::reparameterize(t2, e, normal_tensor(n_draws, 1, rng)).value();
        double s = 0, s2 = 0;
        for (double v : zz.values()) {
            s += v;
            s2 += v * v;
        }
        const double mean = s / n_draws;
        CHECK(s2 / n_draws - mean * mean == doctest::Approx(std::exp(-0.7)).epsilon(0.05));
    }
}

TEST_CASE("KL to the standard normal") {
    Tape tape;
    auto kl = [&](Tensor mu, Tensor lv) {
        return vae::kl_standard_normal({tape.constant(std::move(mu)), tape.constant(std::move(lv))}).value().item();
    };
    CHECK(kl(Tensor(3, 2), Tensor(3, 2)) == 0.0);
    CHECK(kl(Tensor::scalar(1.0), Tensor::scalar(0.0)) == doctest::Approx(0.5).epsilon(1e-15));

    SUBCASE("Monte Carlo oracle") {
        const double mu = 0.8, lv = -0.6, s = std::exp(0.5 * lv);
        Rng rng(2);
        const int n = 1'000'000;
        double acc = 0, acc2 = 0;
        for (int i = 0; i < n; ++i) {
            const double e = rng.normal();
            const double z = mu + s * e;
            // log q(z) - log p(z)
            const double term = -0.5 * e * e - std::log(s) + 0.5 * z * z;
            acc += term;
            acc2 += term * term;
        }
        const double m = acc / n, se = std::sqrt((acc2 / n - m * m) / n);
        CHECK(std::fabs(kl(Tensor::scalar(mu), Tensor::scalar(lv)) - m) < 3 * se);
    }
}

TEST_CASE("Gaussian log-likelihood") {
    Tape tape;
    const double half_log2pi = 0.5 * std::log(2 * std::numbers::pi);
    auto ll = [&](Tensor mu, Tensor lv, Tensor x) {
        return vae::gaussian_loglik({tape.constant(std::move(mu)), tape.constant(std::move(lv))},
                                    tape.constant(std::move(x)))
            .value()
            .item();
    };
    CHECK(ll(Tensor::row({2.0, 3.0}), Tensor::row({0, 0}), Tensor::row({2.0, 3.0})) ==
          doctest::Approx(-2 * half_log2pi).epsilon(1e-15));
    CHECK(ll(Tensor::scalar(0.0), Tensor::scalar(0.0), Tensor::scalar(1.0)) ==
          doctest::Approx(-half_log2pi - 0.5).epsilon(1e-15));

    Rng rng(3);
    const Tensor mu = normal_tensor(6, 3, rng), lv = normal_tensor(6, 3, rng), x = normal_tensor(6, 3, rng);
    double direct = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double sd = std::exp(0.5 * lv[k]);
        const double dens = std::exp(-0.5 * std::pow((x[k] - mu[k]) / sd, 2)) / (sd * std::sqrt(2 * std::numbers::pi));
        direct += std::log(dens);
    }
    CHECK(std::fabs(ll(mu, lv, x) - direct / 6.0) < 1e-12);
}

TEST_CASE("PH log-likelihood head") {
    SUBCASE("one phase is an exponential likelihood") {
        Tape tape;
        const double lam = 1.7;
        vae::PHDecoderOutput dec{{tape.constant(Tensor(2, 1, 1.0))}, {tape.constant(Tensor(2, 1, lam))}};
        const Tensor x = Tensor::column({0.3, 2.0});
        const double expect = 0.5 * ((std::log(lam) - lam * 0.3) + (std::log(lam) - lam * 2.0));
        CHECK(vae::ph_loglik(dec, x).value().item() == doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("zero decoder, three phases, x = 1") {
        auto cfg = tiny(DecoderKind::ph, 1);
        cfg.phases = 3;
        vae::VAEModel m(cfg);
        zero_all(m);
        Tape tape;
        auto dec = m.decode_ph(tape, tape.constant(Tensor(1, 3)));
        const double v = vae::ph_loglik(dec, Tensor::scalar(1.0)).value().item();
        CHECK(v == doctest::Approx(-1.0596601011416096364).epsilon(1e-12));
        const double l2 = std::log(2.0);
        CHECK(v == doctest::Approx(std::log(oracle::ph_dense({1 / 3., 1 / 3., 1 / 3.}, {l2, 2 * l2, 3 * l2}, 1.0).pdf))
                       .epsilon(1e-12));
    }
    SUBCASE("gradient to raw rates") {
        Rng rng(4);
        const Tensor x = pareto_batch(4, 1, rng);
        Tensor logits = normal_tensor(4, 3, rng), raw = normal_tensor(4, 3, rng);
        auto value = [&](const Tensor& r, Tensor* grad) {
            Tape tape;
            ad::Var rv = tape.leaf(r);
            vae::PHDecoderOutput dec{{ad::softmax(tape.constant(logits), 1)}, {ad::cumsum(ad::softplus(rv), 1)}};
            ad::Var l = vae::ph_loglik(dec, x);
            if (grad) {
                tape.backward(l);
                *grad = rv.grad();
            }
            return l.value().item();
        };
        Tensor g;
        value(raw, &g);
        for (std::size_t k = 0; k < raw.size(); ++k) {
            Tensor p = raw, q = raw;
            p[k] += 1e-5;
            q[k] -= 1e-5;
            CHECK(oracle::rel_err(g[k], (value(p, nullptr) - value(q, nullptr)) / 2e-5, 1e-3) < 1e-4);
        }
    }
    SUBCASE("non-positive data is rejected") {
        Tape tape;
        vae::PHDecoderOutput dec{{tape.constant(Tensor(1, 1, 1.0))}, {tape.constant(Tensor(1, 1, 1.0))}};
        CHECK_THROWS_AS(vae::ph_loglik(dec, Tensor::scalar(-1.0)), DomainError);
    }
}

TEST_CASE("full ELBO gradients match central differences (both kinds, 10 initializations)") {
    for (DecoderKind kind : {DecoderKind::gaussian, DecoderKind::ph}) {
        CAPTURE(vae::to_string(kind));
        double worst = 0.0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            Rng rng(1000 + seed);
            vae::VAEModel m(tiny(kind));
            m.init(rng);
            const Tensor x = quantile_batch(2);
            const Tensor noise = normal_tensor(4, 3, rng);
            worst = std::max(worst, elbo_gradient_error(m, x, noise));
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("decoder kinds share the encoder and KL exactly") {
    vae::VAEModel g(tiny(DecoderKind::gaussian)), p(tiny(DecoderKind::ph));
    g.init(Rng(5));
    p.init(Rng(5));
    Rng rng(6);
    const Tensor x = pareto_batch(8, 2, rng), noise = normal_tensor(8, 3, rng);
    Tape tg, tp;
    const auto eg = vae::elbo_with_noise(g, tg, x, noise);
    const auto ep = vae::elbo_with_noise(p, tp, x, noise);
    CHECK(eg.kl.value().item() == ep.kl.value().item());
    auto encg = g.encode(tg, tg.constant(x));
    auto encp = p.encode(tp, tp.constant(x));
    const auto zg = vae::reparameterize(tg, encg, noise).value().values();
    const auto zp = vae::reparameterize(tp, encp, noise).value().values();
    CHECK(std::equal(zg.begin(), zg.end(), zp.begin()));
}

TEST_CASE("ELBO is a lower bound on the log marginal likelihood") {
    // One phase, one data dimension, one latent dimension: p(x) is an
    // integral over z of N(z) * Exp(x; rate(z)).
    vae::VAEConfig cfg;
    cfg.kind = DecoderKind::ph;
    cfg.data_dim = 1;
    cfg.latent_dim = 1;
    cfg.phases = 1;
    cfg.hidden = {4};
    vae::VAEModel m(cfg);
    m.init(Rng(7));
    for (double x : {0.5, 1.0, 3.0}) {
        auto integrand = [&](double z) {
            const Tensor h = m.decoder().forward_values(Tensor::scalar(z));
            const double rate = ad::softplus_value(h[1]);
            return std::exp(-0.5 * z * z) / std::sqrt(2 * std::numbers::pi) * rate * std::exp(-rate * x);
        };
        const double log_marginal =
            std::log(boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -12.0, 12.0, 20, 1e-12));
        // The ELBO itself, by quadrature over q(z | x).
        Tape tape;
        const auto enc = m.encode(tape, tape.constant(Tensor::scalar(x)));
        const double mu = enc.mu.value().item(), lv = enc.logvar.value().item(), sd = std::exp(0.5 * lv);
        auto expected_loglik = [&](double z) {
            const Tensor h = m.decoder().forward_values(Tensor::scalar(z));
            const double rate = ad::softplus_value(h[1]);
            const double q = std::exp(-0.5 * std::pow((z - mu) / sd, 2)) / (sd * std::sqrt(2 * std::numbers::pi));
            return q * (std::log(rate) - rate * x);
        };
        const double kl = 0.5 * (mu * mu + std::exp(lv) - 1.0 - lv);
        const double elbo =
            boost::math::quadrature::gauss_kronrod<double, 61>::integrate(expected_loglik, mu - 12 * sd, mu + 12 * sd,
                                                                           20, 1e-12) -
            kl;
        CHECK(elbo <= log_marginal);

        // The training objective is an unbiased estimate of it.
        Rng rng(8);
        const std::size_t n = 20000;
        Tape t2;
        const auto terms = vae::elbo_with_noise(m, t2, Tensor(n, 1, x), normal_tensor(n, 1, rng));
        CHECK(-terms.loss.value().item() == doctest::Approx(elbo).epsilon(0.02));
    }
}

TEST_CASE("training reduces the loss and is bit-reproducible") {
    for (DecoderKind kind : {DecoderKind::gaussian, DecoderKind::ph}) {
        CAPTURE(vae::to_string(kind));
        Rng data_rng(9);
        const Tensor x = pareto_batch(64, 2, data_rng);
        auto run = [&] {
            vae::VAEModel m(tiny(kind));
            m.init(Rng(10));
            vae::TrainConfig tc;
            tc.epochs = 100;
            tc.batch_size = 64;
            tc.adam.learning_rate = 1e-2;
            auto r = vae::train(m, x, tc, Rng(11));
            std::vector<double> params;
            for (auto* p : m.parameters()) params.insert(params.end(), p->value.values().begin(), p->value.values().end());
            return std::make_pair(r, params);
        };
        const auto [r1, p1] = run();
        const auto [r2, p2] = run();
        CHECK(r1.steps == 100);
        CHECK(r1.epoch_loss.back() < r1.epoch_loss.front());
        CHECK(r1.epoch_loss == r2.epoch_loss);
        CHECK(p1 == p2);
    }
}

TEST_CASE("generation") {
    SUBCASE("mean_only with a zero decoder is constant") {
        for (DecoderKind kind : {DecoderKind::gaussian, DecoderKind::ph}) {
            vae::VAEModel m(tiny(kind));
            zero_all(m);
            Rng rng(12);
            const Tensor out = vae::generate(m, 50, rng, vae::GenMode::mean_only);
            for (double v : out.values()) CHECK(v == out[0]);
        }
    }
    SUBCASE("vanishing decoder variance reduces sampling to the mean") {
        auto cfg = tiny(DecoderKind::gaussian);
        cfg.logvar_clamp = 800.0;
        vae::VAEModel m(cfg);
        m.init(Rng(13));
        auto& last_bias = m.decoder().bias(m.decoder().layer_count() - 1).value;
        last_bias[2] = last_bias[3] = -700.0;
        Rng rng(14);
        Tensor z;
        const Tensor s = vae::generate(m, 200, rng, vae::GenMode::sample_likelihood, &z);
        const Tensor h = m.decoder().forward_values(z);
        for (std::size_t i = 0; i < 200; ++i)
            for (std::size_t j = 0; j < 2; ++j) CHECK(std::fabs(s(i, j) - h(i, j)) < 1e-100);
    }
    SUBCASE("PH generations are positive, n = 20000") {
        vae::VAEModel m(tiny(DecoderKind::ph, 3));
        m.init(Rng(15));
        Rng rng(16);
        const Tensor out = vae::generate(m, 20'000, rng);
        CHECK(out.rows() == 20'000);
        CHECK(out.cols() == 3);
        for (double v : out.values()) CHECK(v > 0.0);
    }
    SUBCASE("decoded rates are positive and ordered for 10^4 latents") {
        vae::VAEModel m(tiny(DecoderKind::ph, 2));
        m.init(Rng(17));
        for (auto* p : m.decoder().parameters())
            for (auto& v : p->value.values()) v *= 4.0; // push outputs into extreme ranges
        Rng rng(18);
        Tensor z(10'000, 3);
        for (auto& v : z.values()) v = rng.normal() * 3.0;
        const auto phs = vae::decode_ph_values(m, z);
        for (const auto& dim : phs)
            for (const auto& d : dim) {
                const auto r = d.rates();
                CHECK(r[0] > 0.0);
                for (std::size_t k = 1; k < r.size(); ++k) CHECK(r[k] >= r[k - 1]);
            }
    }
}
