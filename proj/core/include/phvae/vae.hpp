#pragma once

// Gaussian-encoder VAE with a swappable decoder likelihood.
//
// Both model kinds share the encoder x -> (mu, logvar) over an 8-dimensional
// latent, the reparameterized single-sample ELBO and the KL term. Only the
// decoder head differs:
//
//   gaussian: decoder(z) -> (mu_j, logvar_j) for each data dimension j
//   ph:       decoder(z) -> (alpha logits, raw rates) per dimension, mapped to
//             init_probs = softmax(logits) and rates = cumsum(softplus(raw)),
//             which is a valid series-form PH for every z.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "phvae/autodiff.hpp"
#include "phvae/neural.hpp"
#include "phvae/phdist.hpp"
#include "phvae/rng.hpp"

namespace phvae::vae {

enum class DecoderKind { gaussian, ph };
enum class GenMode { sample_likelihood, mean_only };

std::string to_string(DecoderKind k);
std::string to_string(GenMode m);
DecoderKind parse_decoder_kind(const std::string& s);
GenMode parse_gen_mode(const std::string& s);

struct VAEConfig {
    DecoderKind kind = DecoderKind::ph;
    std::size_t data_dim = 1;
    std::size_t latent_dim = 8;
    std::size_t phases = 10;
    std::vector<std::size_t> hidden = {64, 64};
    // Symmetric clamp applied to every log-variance output.
    double logvar_clamp = 10.0;
    ph::LogLikOptions ph_options;
};

struct EncoderOutput {
    ad::Var mu;
    ad::Var logvar;
};

struct GaussianDecoderOutput {
    ad::Var mu;
    ad::Var logvar;
};

// One (n, phases) pair per data dimension.
struct PHDecoderOutput {
    std::vector<ad::Var> init_probs;
    std::vector<ad::Var> rates;
};

class VAEModel {
public:
    explicit VAEModel(VAEConfig cfg);

    const VAEConfig& config() const noexcept { return cfg_; }
    DecoderKind kind() const noexcept { return cfg_.kind; }
    std::size_t head_width() const;

    nn::MLP& encoder() noexcept { return encoder_; }
    const nn::MLP& encoder() const noexcept { return encoder_; }
    nn::MLP& decoder() noexcept { return decoder_; }
    const nn::MLP& decoder() const noexcept { return decoder_; }

    // Encoder parameters first, then decoder, each in layer order.
    std::vector<ad::Parameter*> parameters();
    std::vector<const ad::Parameter*> parameters() const;

    // Encoder and decoder draw from separate substreams, so two models of
    // different kinds initialized from the same rng share encoder weights.
    void init(const Rng& rng);

    EncoderOutput encode(ad::Tape& tape, ad::Var x);
    GaussianDecoderOutput decode_gaussian(ad::Tape& tape, ad::Var z);
    PHDecoderOutput decode_ph(ad::Tape& tape, ad::Var z);

private:
    VAEConfig cfg_;
    nn::MLP encoder_;
    nn::MLP decoder_;
};

// z = mu + exp(logvar / 2) * noise
ad::Var reparameterize(ad::Tape& tape, const EncoderOutput& enc, const ad::Tensor& noise);

// Batch mean of KL(N(mu, diag exp(logvar)) || N(0, I)).
ad::Var kl_standard_normal(const EncoderOutput& enc);

// Batch mean of the diagonal Gaussian log density summed over dimensions.
ad::Var gaussian_loglik(const GaussianDecoderOutput& dec, ad::Var x);

// Batch mean of the PH log density summed over dimensions. x must be > 0.
ad::Var ph_loglik(const PHDecoderOutput& dec, const ad::Tensor& x, const ph::LogLikOptions& opts = {},
                  ph::LogLikTelemetry* telemetry = nullptr);

struct ElboTerms {
    ad::Var loss; // -(loglik - kl)
    ad::Var loglik;
    ad::Var kl;
};

ElboTerms elbo_with_noise(VAEModel& model, ad::Tape& tape, const ad::Tensor& x, const ad::Tensor& noise,
                          ph::LogLikTelemetry* telemetry = nullptr);
// Single-sample estimate with fresh standard-normal noise from rng.
ElboTerms elbo(VAEModel& model, ad::Tape& tape, const ad::Tensor& x, Rng& rng,
               ph::LogLikTelemetry* telemetry = nullptr);

// PH parameters decoded from latent values z (n, latent_dim): result[j][i]
// is the distribution of data dimension j for latent row i.
std::vector<std::vector<ph::CanonicalPH>> decode_ph_values(const VAEModel& model, const ad::Tensor& z);

// z ~ N(0, I), then decode. In sample_likelihood mode draws from the decoder
// likelihood; in mean_only mode returns its mean.
// `latent_out`, when given, receives the latent draws used.
ad::Tensor generate(const VAEModel& model, std::size_t n, Rng& rng, GenMode mode = GenMode::sample_likelihood,
                    ad::Tensor* latent_out = nullptr);

// ---- training -------------------------------------------------------------

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    nn::AdamConfig adam;
    std::optional<double> grad_clip; // global-norm clip, off by default
};

struct TrainResult {
    std::vector<double> epoch_loss; // mean negated ELBO per epoch
    std::size_t steps = 0;
    ph::LogLikTelemetry telemetry;
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

// Minibatch Adam on the negated ELBO. Batches come from a per-epoch shuffle.
// Throws NonFiniteError if the loss or a gradient diverges.
TrainResult train(VAEModel& model, const ad::Tensor& data, const TrainConfig& cfg, const Rng& rng,
                  const EpochCallback& on_epoch = {});

} // namespace phvae::vae
