#pragma once

// Binary checkpoints. All integers are little-endian u64 unless noted and
// doubles are stored as their IEEE-754 bit patterns, so a save/load round
// trip is bit-exact.
//
//   model file:  "PHVAECKP" | u32 version | u8 kind | data_dim | latent_dim
//                | phases | f64 logvar_clamp | n_enc, enc widths...
//                | n_dec, dec widths... | n_params
//                | per parameter: rows | cols | rows*cols f64
//   PH record:   "PHVAEPH1" | m | m f64 init_probs | m f64 rates

#include <filesystem>
#include <iosfwd>

#include "phvae/phdist.hpp"
#include "phvae/vae.hpp"

namespace phvae::ckpt {

inline constexpr std::uint32_t kVersion = 1;

void save_model(const std::filesystem::path& path, const vae::VAEModel& model);
vae::VAEModel load_model(const std::filesystem::path& path);

void write_model(std::ostream& os, const vae::VAEModel& model);
vae::VAEModel read_model(std::istream& is);

void write_ph(std::ostream& os, const ph::CanonicalPH& dist);
ph::CanonicalPH read_ph(std::istream& is);

} // namespace phvae::ckpt
