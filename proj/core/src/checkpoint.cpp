#include "phvae/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "phvae/error.hpp"

namespace phvae::ckpt {

namespace {

constexpr std::array<char, 8> kModelMagic = {'P', 'H', 'V', 'A', 'E', 'C', 'K', 'P'};
constexpr std::array<char, 8> kPhMagic = {'P', 'H', 'V', 'A', 'E', 'P', 'H', '1'};

// Guards against absurd sizes from a corrupt file.
constexpr std::uint64_t kMaxCount = 1ULL << 32;

void put_bytes(std::ostream& os, std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) {
        os.put(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

std::uint64_t get_bytes(std::istream& is, int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
        const int c = is.get();
        if (c == std::char_traits<char>::eof()) {
            throw FormatError("checkpoint: unexpected end of file");
        }
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
}

void put_u64(std::ostream& os, std::uint64_t v) { put_bytes(os, v, 8); }
std::uint64_t get_u64(std::istream& is) { return get_bytes(is, 8); }

std::uint64_t get_count(std::istream& is, const char* what) {
    const auto v = get_u64(is);
    if (v > kMaxCount) {
        throw FormatError(std::string("checkpoint: implausible ") + what);
    }
    return v;
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

void put_magic(std::ostream& os, const std::array<char, 8>& m) { os.write(m.data(), m.size()); }

void expect_magic(std::istream& is, const std::array<char, 8>& m, const char* what) {
    std::array<char, 8> got{};
    is.read(got.data(), got.size());
    if (!is || got != m) {
        throw FormatError(std::string("checkpoint: not a ") + what);
    }
}

void put_widths(std::ostream& os, const std::vector<std::size_t>& w) {
    put_u64(os, w.size());
    for (auto x : w) {
        put_u64(os, x);
    }
}

std::vector<std::size_t> get_widths(std::istream& is) {
    const auto n = get_count(is, "layer count");
    std::vector<std::size_t> w(n);
    for (auto& x : w) {
        x = get_count(is, "layer width");
    }
    return w;
}

} // namespace

void write_model(std::ostream& os, const vae::VAEModel& model) {
    const auto& cfg = model.config();
    put_magic(os, kModelMagic);
    put_bytes(os, kVersion, 4);
    put_bytes(os, cfg.kind == vae::DecoderKind::gaussian ? 0 : 1, 1);
    put_u64(os, cfg.data_dim);
    put_u64(os, cfg.latent_dim);
    put_u64(os, cfg.phases);
    put_f64(os, cfg.logvar_clamp);
    put_widths(os, model.encoder().widths());
    put_widths(os, model.decoder().widths());
    const auto params = model.parameters();
    put_u64(os, params.size());
    for (const ad::Parameter* p : params) {
        put_u64(os, p->value.rows());
        put_u64(os, p->value.cols());
        for (double v : p->value.values()) {
            put_f64(os, v);
        }
    }
    if (!os) {
        throw FormatError("checkpoint: write failed");
    }
}

vae::VAEModel read_model(std::istream& is) {
    expect_magic(is, kModelMagic, "model checkpoint");
    const auto version = get_bytes(is, 4);
    if (version != kVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    }
    vae::VAEConfig cfg;
    const auto kind = get_bytes(is, 1);
    if (kind > 1) {
        throw FormatError("checkpoint: bad decoder kind");
    }
    cfg.kind = kind == 0 ? vae::DecoderKind::gaussian : vae::DecoderKind::ph;
    cfg.data_dim = get_count(is, "data dim");
    cfg.latent_dim = get_count(is, "latent dim");
    cfg.phases = get_count(is, "phase count");
    cfg.logvar_clamp = get_f64(is);
    const auto enc = get_widths(is);
    const auto dec = get_widths(is);
    if (enc.size() < 2 || dec.size() != enc.size() ||
        !std::equal(enc.begin() + 1, enc.end() - 1, dec.begin() + 1)) {
        throw FormatError("checkpoint: encoder and decoder hidden widths disagree");
    }
    cfg.hidden.assign(enc.begin() + 1, enc.end() - 1);

    vae::VAEModel model(cfg);
    if (model.encoder().widths() != enc || model.decoder().widths() != dec) {
        throw FormatError("checkpoint: layer widths inconsistent with the stored dimensions");
    }
    auto params = model.parameters();
    if (get_u64(is) != params.size()) {
        throw FormatError("checkpoint: parameter count mismatch");
    }
    for (ad::Parameter* p : params) {
        const auto rows = get_u64(is);
        const auto cols = get_u64(is);
        if (rows != p->value.rows() || cols != p->value.cols()) {
            throw FormatError("checkpoint: shape mismatch for " + p->name);
        }
        for (double& v : p->value.values()) {
            v = get_f64(is);
        }
        p->zero_grad();
    }
    return model;
}

void save_model(const std::filesystem::path& path, const vae::VAEModel& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw FormatError("cannot open " + path.string() + " for writing");
    }
    write_model(os, model);
}

vae::VAEModel load_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw FormatError("cannot open " + path.string());
    }
    return read_model(is);
}

void write_ph(std::ostream& os, const ph::CanonicalPH& dist) {
    put_magic(os, kPhMagic);
    put_u64(os, dist.phases());
    for (double a : dist.init_probs()) {
        put_f64(os, a);
    }
    for (double r : dist.rates()) {
        put_f64(os, r);
    }
}

ph::CanonicalPH read_ph(std::istream& is) {
    expect_magic(is, kPhMagic, "PH record");
    const auto m = get_count(is, "phase count");
    std::vector<double> init(m);
    std::vector<double> rates(m);
    for (double& a : init) {
        a = get_f64(is);
    }
    for (double& r : rates) {
        r = get_f64(is);
    }
    return ph::CanonicalPH(std::move(init), std::move(rates));
}

} // namespace phvae::ckpt
