#include "phvae/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "phvae/error.hpp"

namespace phvae::vae {

std::string to_string(DecoderKind k) { return k == DecoderKind::gaussian ? "gaussian" : "ph"; }

std::string to_string(GenMode m) { return m == GenMode::sample_likelihood ? "sample" : "mean"; }

DecoderKind parse_decoder_kind(const std::string& s) {
    if (s == "gaussian") {
        return DecoderKind::gaussian;
    }
    if (s == "ph") {
        return DecoderKind::ph;
    }
    throw ConfigError("unknown model kind '" + s + "' (expected gaussian or ph)");
}

GenMode parse_gen_mode(const std::string& s) {
    if (s == "sample" || s == "sample_likelihood") {
        return GenMode::sample_likelihood;
    }
    if (s == "mean" || s == "mean_only") {
        return GenMode::mean_only;
    }
    throw ConfigError("unknown generation mode '" + s + "' (expected sample or mean)");
}

namespace {

std::vector<std::size_t> widths(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
    std::vector<std::size_t> w{in};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(out);
    return w;
}

const VAEConfig& checked(const VAEConfig& cfg) {
    if (cfg.data_dim == 0 || cfg.latent_dim == 0 || cfg.phases == 0) {
        throw ConfigError("VAE dimensions must be positive");
    }
    if (!(cfg.logvar_clamp > 0.0)) {
        throw ConfigError("logvar clamp must be positive");
    }
    return cfg;
}

std::size_t head_width_for(const VAEConfig& cfg) {
    return cfg.kind == DecoderKind::gaussian ? 2 * cfg.data_dim : 2 * cfg.phases * cfg.data_dim;
}

} // namespace

VAEModel::VAEModel(VAEConfig cfg)
    : cfg_(checked(cfg)),
      encoder_("encoder", widths(cfg_.data_dim, cfg_.hidden, 2 * cfg_.latent_dim)),
      decoder_("decoder", widths(cfg_.latent_dim, cfg_.hidden, head_width_for(cfg_))) {}

std::size_t VAEModel::head_width() const { return head_width_for(cfg_); }

std::vector<ad::Parameter*> VAEModel::parameters() {
    auto p = encoder_.parameters();
    auto d = decoder_.parameters();
    p.insert(p.end(), d.begin(), d.end());
    return p;
}

std::vector<const ad::Parameter*> VAEModel::parameters() const {
    auto p = encoder_.parameters();
    auto d = decoder_.parameters();
    p.insert(p.end(), d.begin(), d.end());
    return p;
}

void VAEModel::init(const Rng& rng) {
    Rng enc = rng.substream({tag("encoder")});
    Rng dec = rng.substream({tag("decoder")});
    nn::init_params(encoder_, enc);
    nn::init_params(decoder_, dec);
}

EncoderOutput VAEModel::encode(ad::Tape& tape, ad::Var x) {
    ad::Var h = encoder_.forward(tape, x);
    const std::size_t L = cfg_.latent_dim;
    return {ad::slice_cols(h, 0, L), ad::clamp(ad::slice_cols(h, L, L), -cfg_.logvar_clamp, cfg_.logvar_clamp)};
}

GaussianDecoderOutput VAEModel::decode_gaussian(ad::Tape& tape, ad::Var z) {
    if (cfg_.kind != DecoderKind::gaussian) {
        throw ConfigError("decode_gaussian called on a PH model");
    }
    ad::Var h = decoder_.forward(tape, z);
    const std::size_t d = cfg_.data_dim;
    return {ad::slice_cols(h, 0, d), ad::clamp(ad::slice_cols(h, d, d), -cfg_.logvar_clamp, cfg_.logvar_clamp)};
}

PHDecoderOutput VAEModel::decode_ph(ad::Tape& tape, ad::Var z) {
    if (cfg_.kind != DecoderKind::ph) {
        throw ConfigError("decode_ph called on a Gaussian model");
    }
    ad::Var h = decoder_.forward(tape, z);
    const std::size_t m = cfg_.phases;
    PHDecoderOutput out;
    for (std::size_t j = 0; j < cfg_.data_dim; ++j) {
        const std::size_t base = 2 * m * j;
        out.init_probs.push_back(ad::softmax(ad::slice_cols(h, base, m), 1));
        out.rates.push_back(ad::cumsum(ad::softplus(ad::slice_cols(h, base + m, m)), 1));
    }
    return out;
}

ad::Var reparameterize(ad::Tape& tape, const EncoderOutput& enc, const ad::Tensor& noise) {
    if (!noise.same_shape(enc.mu.value())) {
        throw ShapeError("reparameterize: noise " + noise.shape_str() + " vs mu " + enc.mu.value().shape_str());
    }
    ad::Var sigma = ad::exp(ad::scale(enc.logvar, 0.5));
    return enc.mu + sigma * tape.constant(noise);
}

ad::Var kl_standard_normal(const EncoderOutput& enc) {
    const double n = static_cast<double>(enc.mu.rows());
    // 0.5 * sum(mu^2 + exp(logvar) - 1 - logvar) / n
    ad::Var inner = ad::square(enc.mu) + ad::exp(enc.logvar) - enc.logvar;
    ad::Var total = ad::sum(inner);
    const double ones = static_cast<double>(enc.mu.value().size());
    return ad::scale(ad::add_scalar(total, -ones), 0.5 / n);
}

ad::Var gaussian_loglik(const GaussianDecoderOutput& dec, ad::Var x) {
    if (!x.value().same_shape(dec.mu.value())) {
        throw ShapeError("gaussian_loglik: x " + x.value().shape_str() + " vs mu " + dec.mu.value().shape_str());
    }
    const double n = static_cast<double>(x.rows());
    const double cells = static_cast<double>(x.value().size());
    ad::Var resid = ad::square(x - dec.mu) * ad::exp(ad::neg(dec.logvar));
    ad::Var total = ad::sum(dec.logvar + resid);
    const double log2pi = std::log(2.0 * std::numbers::pi);
    // -0.5 * (cells * log 2pi + sum(logvar + resid)) / n
    return ad::scale(ad::add_scalar(total, cells * log2pi), -0.5 / n);
}

ad::Var ph_loglik(const PHDecoderOutput& dec, const ad::Tensor& x, const ph::LogLikOptions& opts,
                  ph::LogLikTelemetry* telemetry) {
    if (dec.init_probs.size() != x.cols() || dec.rates.size() != x.cols()) {
        throw ShapeError("ph_loglik: decoder has " + std::to_string(dec.init_probs.size()) +
                         " dimensions, data has " + std::to_string(x.cols()));
    }
    const double n = static_cast<double>(x.rows());
    ad::Var total;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        std::vector<double> col(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) {
            col[i] = x(i, j);
            if (!(col[i] > 0.0)) {
                throw DomainError("ph_loglik: data must be strictly positive");
            }
        }
        ad::Var term = ph::logpdf_diff(dec.init_probs[j], dec.rates[j], col, opts, telemetry);
        total = j == 0 ? term : total + term;
    }
    return ad::scale(total, 1.0 / n);
}

ElboTerms elbo_with_noise(VAEModel& model, ad::Tape& tape, const ad::Tensor& x, const ad::Tensor& noise,
                          ph::LogLikTelemetry* telemetry) {
    ad::Var xv = tape.constant(x);
    EncoderOutput enc = model.encode(tape, xv);
    ad::Var z = reparameterize(tape, enc, noise);
    ad::Var kl = kl_standard_normal(enc);
    ad::Var loglik;
    if (model.kind() == DecoderKind::gaussian) {
        loglik = gaussian_loglik(model.decode_gaussian(tape, z), xv);
    } else {
        loglik = ph_loglik(model.decode_ph(tape, z), x, model.config().ph_options, telemetry);
    }
    return {ad::neg(loglik - kl), loglik, kl};
}

ElboTerms elbo(VAEModel& model, ad::Tape& tape, const ad::Tensor& x, Rng& rng, ph::LogLikTelemetry* telemetry) {
    ad::Tensor noise(x.rows(), model.config().latent_dim);
    for (double& e : noise.values()) {
        e = rng.normal();
    }
    return elbo_with_noise(model, tape, x, noise, telemetry);
}

std::vector<std::vector<ph::CanonicalPH>> decode_ph_values(const VAEModel& model, const ad::Tensor& z) {
    if (model.kind() != DecoderKind::ph) {
        throw ConfigError("decode_ph_values called on a Gaussian model");
    }
    const ad::Tensor h = model.decoder().forward_values(z);
    const std::size_t m = model.config().phases;
    std::vector<std::vector<ph::CanonicalPH>> out(model.config().data_dim);
    std::vector<double> alpha(m);
    std::vector<double> rates(m);
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j].reserve(z.rows());
        const std::size_t base = 2 * m * j;
        for (std::size_t i = 0; i < z.rows(); ++i) {
            double mx = -INFINITY;
            for (std::size_t k = 0; k < m; ++k) {
                mx = std::max(mx, h(i, base + k));
            }
            double zsum = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                alpha[k] = std::exp(h(i, base + k) - mx);
                zsum += alpha[k];
            }
            double acc = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                alpha[k] /= zsum;
                acc += ad::softplus_value(h(i, base + m + k));
                rates[k] = acc;
            }
            out[j].emplace_back(alpha, rates);
        }
    }
    return out;
}

ad::Tensor generate(const VAEModel& model, std::size_t n, Rng& rng, GenMode mode, ad::Tensor* latent_out) {
    const auto& cfg = model.config();
    ad::Tensor z(n, cfg.latent_dim);
    for (double& v : z.values()) {
        v = rng.normal();
    }
    if (latent_out != nullptr) {
        *latent_out = z;
    }
    ad::Tensor out(n, cfg.data_dim);
    if (model.kind() == DecoderKind::gaussian) {
        const ad::Tensor h = model.decoder().forward_values(z);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < cfg.data_dim; ++j) {
                const double mu = h(i, j);
                if (mode == GenMode::mean_only) {
                    out(i, j) = mu;
                } else {
                    const double logvar = std::clamp(h(i, cfg.data_dim + j), -cfg.logvar_clamp, cfg.logvar_clamp);
                    out(i, j) = mu + std::exp(0.5 * logvar) * rng.normal();
                }
            }
        }
        return out;
    }
    const auto phs = decode_ph_values(model, z);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < cfg.data_dim; ++j) {
            const auto& dist = phs[j][i];
            out(i, j) = mode == GenMode::mean_only ? ph::mean(dist) : ph::sample(dist, rng);
        }
    }
    return out;
}

TrainResult train(VAEModel& model, const ad::Tensor& data, const TrainConfig& cfg, const Rng& rng,
                  const EpochCallback& on_epoch) {
    if (data.cols() != model.config().data_dim || data.rows() == 0) {
        throw ShapeError("train: data " + data.shape_str() + " does not match the model");
    }
    if (cfg.batch_size == 0) {
        throw ConfigError("batch size must be positive");
    }
    Rng shuffle_rng = rng.substream({tag("shuffle")});
    Rng noise_rng = rng.substream({tag("noise")});

    auto params = model.parameters();
    nn::Adam adam(params, cfg.adam);
    adam.zero_grad();

    const std::size_t n = data.rows();
    const std::size_t d = data.cols();
    std::vector<std::size_t> order(n);
    TrainResult result;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t bs = std::min(cfg.batch_size, n - start);
            ad::Tensor batch(bs, d);
            for (std::size_t i = 0; i < bs; ++i) {
                for (std::size_t j = 0; j < d; ++j) {
                    batch(i, j) = data(order[start + i], j);
                }
            }
            ad::Tape tape;
            ElboTerms terms = elbo(model, tape, batch, noise_rng, &result.telemetry);
            const double loss = terms.loss.value().item();
            tape.backward(terms.loss);
            if (cfg.grad_clip) {
                nn::clip_global_norm(params, *cfg.grad_clip);
            }
            adam.step();
            adam.zero_grad();
            ++result.steps;
            loss_sum += loss * static_cast<double>(bs);
        }
        const double epoch_loss = loss_sum / static_cast<double>(n);
        result.epoch_loss.push_back(epoch_loss);
        if (on_epoch) {
            on_epoch(epoch, epoch_loss);
        }
    }
    return result;
}

} // namespace phvae::vae
