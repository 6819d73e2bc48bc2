#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace phvae {

// SplitMix64 finalizer; used to derive independent substream seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Seed for a named substream: hashes the parent seed together with an ordered
// list of tags (cell coordinates, split ids, ...). Distinct tag lists give
// statistically independent streams.
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> tags) noexcept;

// Stable 64-bit tag for a short ASCII label (FNV-1a).
std::uint64_t tag(const char* label) noexcept;

// Reproducible 64-bit generator with explicit substreams.
class Rng {
public:
    using result_type = std::mt19937_64::result_type;

    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    std::uint64_t seed() const noexcept { return seed_; }

    // Child stream keyed on this generator's seed, not its current state, so
    // substreams do not depend on how many draws the parent has made.
    Rng substream(std::initializer_list<std::uint64_t> tags) const {
        return Rng(derive_seed(seed_, tags));
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1].
    double uniform_pos() { return 1.0 - uniform(); }

    double normal() { return normal_(engine_); }

    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace phvae
