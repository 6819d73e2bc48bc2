#pragma once

// Experiment grid: (tail index, dimension, model kind, seed) cells, each of
// which generates Pareto data, trains one VAE, generates samples and scores
// them against held-out data.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "phvae/eval.hpp"
#include "phvae/vae.hpp"

namespace phvae::exp {

inline constexpr const char* kVersion = "phvae 0.1.0";

struct ExperimentConfig {
    std::string preset = "paper";
    std::vector<double> alphas = {2.0, 3.0, 5.0, 30.0};
    std::vector<std::size_t> dims = {1, 5, 10};
    std::vector<vae::DecoderKind> models = {vae::DecoderKind::gaussian, vae::DecoderKind::ph};
    std::vector<std::uint64_t> seeds = {0};

    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    double learning_rate = 1e-3;
    std::size_t latent_dim = 8;
    std::size_t phases = 10;
    std::vector<std::size_t> hidden = {64, 64};
    double logvar_clamp = 10.0;
    std::optional<double> grad_clip;

    std::size_t n_train = 20'000;
    std::size_t n_test = 20'000;
    std::size_t n_gen = 20'000;
    double scale = 1.0;
    bool shift = false;
    vae::GenMode gen_mode = vae::GenMode::sample_likelihood;

    double tolerance = 1e-12;
    std::size_t lipschitz_pairs = 2000;
    double lipschitz_radius = 3.0;

    std::filesystem::path out_dir = "results";
    std::size_t workers = 1;
    bool record_runtime = false;

    // Keys whose value differs from the preset, in the order they were set.
    std::vector<std::string> overrides;

    void validate() const;
};

// "paper": full-size grid. "desk": n_train 5000, 30 epochs, one seed.
ExperimentConfig make_preset(const std::string& name);

// Merges a JSON object of config keys into cfg, recording each key as an
// override. Unknown keys are a ConfigError.
void apply_json(ExperimentConfig& cfg, const std::string& json_text);
void apply_json_file(ExperimentConfig& cfg, const std::filesystem::path& path);
std::string to_json(const ExperimentConfig& cfg);

// Hash of every setting that affects results (not out_dir, workers or
// record_runtime), as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

// Worker count from PHVAE_WORKERS, falling back to hardware concurrency.
std::size_t workers_from_env();

struct CellKey {
    double alpha = 2.0;
    std::size_t dim = 1;
    vae::DecoderKind model = vae::DecoderKind::ph;
    std::uint64_t seed = 0;

    std::string name() const; // e.g. "a3_d1_ph_s7"
};

struct RunRecord {
    CellKey key;
    bool ok = false;
    std::string error;
    std::string config_hash;
    std::string version = kVersion;
    eval::MetricsReport metrics;
    std::vector<double> loss;
    ph::LogLikTelemetry telemetry;
    double runtime_s = 0.0;
    std::filesystem::path checkpoint;
};

// Runs one cell. When cfg.out_dir is non-empty, writes the checkpoint, the
// generated-sample CCDF and a JSON run record under out_dir/cells/<name>/.
RunRecord run_cell(const CellKey& key, const ExperimentConfig& cfg);

struct GridResult {
    std::vector<RunRecord> records; // in grid order
    bool any_failed = false;
};

// Every cell of the grid on a bounded worker pool. Writes config.json,
// metrics.csv and metrics_per_dim.csv to out_dir. Failed cells are recorded
// and do not stop the grid.
GridResult run_grid(const ExperimentConfig& cfg, std::ostream* log = nullptr);

std::vector<CellKey> grid_cells(const ExperimentConfig& cfg);

inline constexpr const char* kMetricsHeader =
    "alpha,d,model,seed,ks,ks_tail,q99_err,q995_err,u,n_tail_gen,n_tail_test,lipschitz_est,min_rate,runtime_s";

void write_metrics_csv(const std::filesystem::path& path, const std::vector<RunRecord>& records,
                       bool record_runtime);

struct MetricsRow {
    double alpha = 0.0;
    std::size_t d = 0;
    std::string model;
    std::uint64_t seed = 0;
    bool ok = false;
    double ks = 0.0;
    double ks_tail = 0.0;
    double q99_err = 0.0;
    double q995_err = 0.0;
    double u = 0.0;
    std::size_t n_tail_gen = 0;
    std::size_t n_tail_test = 0;
    double lipschitz_est = 0.0;
    std::optional<double> min_rate;
    std::optional<double> runtime_s;
};

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

struct SeriesPoint {
    std::size_t d = 0;
    std::string model;
    double alpha = 0.0;
    double ks_tail = 0.0;
    std::size_t n_seeds = 0;
};

struct Report {
    std::string table;                // human-readable, one line per (alpha, d, model)
    std::vector<MetricsRow> averaged; // seed-averaged rows
    std::vector<SeriesPoint> series;  // ks_tail vs alpha per (d, model)
};

// Reads out_dir/metrics.csv, averages over seeds, writes
// ks_tail_vs_alpha.csv next to it and returns the table. Throws ConfigError
// when there is nothing to report.
Report report(const std::filesystem::path& dir);

} // namespace phvae::exp
