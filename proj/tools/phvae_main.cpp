// phvae: run the Pareto tail-fidelity grid, summarize results, sample PHs.
//
//   phvae run [--config FILE] [--preset desk|paper] [--alphas 2,3] [--dims 1]
//             [--models gaussian,ph] [--seed N | --seeds 0,1] [--gen-mode sample|mean]
//             [--out DIR] ...
//   phvae report --in DIR
//   phvae sample-ph --init 0.5,0.5 --rates 1,2 -n 1000 [--seed S]
//
// Worker count comes from PHVAE_WORKERS (default: hardware concurrency).

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "phvae/csv.hpp"
#include "phvae/error.hpp"
#include "phvae/experiment.hpp"
#include "phvae/phdist.hpp"

namespace {

using namespace phvae;

std::string read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw ConfigError("cannot open config file " + path);
    }
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct RunFlags {
    std::string config;
    std::string preset;
    std::vector<double> alphas;
    std::vector<std::size_t> dims;
    std::vector<std::string> models;
    std::vector<std::uint64_t> seeds;
    std::optional<std::uint64_t> seed;
    std::string gen_mode;
    std::string out;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> n_train;
    std::optional<std::size_t> n_test;
    std::optional<std::size_t> n_gen;
    std::optional<double> grad_clip;
    bool shift = false;
    bool record_runtime = false;
};

exp::ExperimentConfig build_config(const RunFlags& f) {
    std::string file_text;
    std::string preset = "paper";
    if (!f.config.empty()) {
        file_text = read_file(f.config);
        const auto j = nlohmann::json::parse(file_text, nullptr, false);
        if (j.is_object() && j.contains("preset") && j["preset"].is_string()) {
            preset = j["preset"].get<std::string>();
        }
    }
    if (!f.preset.empty()) {
        preset = f.preset;
    }
    exp::ExperimentConfig cfg = exp::make_preset(preset);
    cfg.workers = exp::workers_from_env();
    if (!file_text.empty()) {
        exp::apply_json(cfg, file_text);
    }

    auto mark = [&cfg](const char* key) {
        if (std::find(cfg.overrides.begin(), cfg.overrides.end(), key) == cfg.overrides.end()) {
            cfg.overrides.emplace_back(key);
        }
    };
    if (!f.alphas.empty()) {
        cfg.alphas = f.alphas;
        mark("alphas");
    }
    if (!f.dims.empty()) {
        cfg.dims = f.dims;
        mark("dims");
    }
    if (!f.models.empty()) {
        cfg.models.clear();
        for (const auto& m : f.models) {
            cfg.models.push_back(vae::parse_decoder_kind(m));
        }
        mark("models");
    }
    if (f.seed) {
        cfg.seeds = {*f.seed};
        mark("seeds");
    } else if (!f.seeds.empty()) {
        cfg.seeds = f.seeds;
        mark("seeds");
    }
    if (!f.gen_mode.empty()) {
        cfg.gen_mode = vae::parse_gen_mode(f.gen_mode);
        mark("gen_mode");
    }
    if (!f.out.empty()) {
        cfg.out_dir = f.out;
    }
    if (f.epochs) {
        cfg.epochs = *f.epochs;
        mark("epochs");
    }
    if (f.n_train) {
        cfg.n_train = *f.n_train;
        mark("n_train");
    }
    if (f.n_test) {
        cfg.n_test = *f.n_test;
        mark("n_test");
    }
    if (f.n_gen) {
        cfg.n_gen = *f.n_gen;
        mark("n_gen");
    }
    if (f.grad_clip) {
        cfg.grad_clip = f.grad_clip;
        mark("grad_clip");
    }
    if (f.shift) {
        cfg.shift = true;
        mark("shift");
    }
    if (f.record_runtime) {
        cfg.record_runtime = true;
    }
    cfg.validate();
    return cfg;
}

int cmd_run(const RunFlags& flags) {
    const auto cfg = build_config(flags);
    std::cerr << "running " << exp::grid_cells(cfg).size() << " cells (preset " << cfg.preset << ", "
              << cfg.workers << " workers) -> " << cfg.out_dir.string() << '\n';
    const auto result = exp::run_grid(cfg, &std::cerr);
    if (result.any_failed) {
        std::cerr << "one or more cells failed; see cells/*/record.json\n";
        return 1;
    }
    return 0;
}

int cmd_report(const std::string& dir) {
    const auto rep = exp::report(dir);
    std::cout << rep.table;
    return 0;
}

int cmd_sample_ph(const std::vector<double>& init, const std::vector<double>& rates, std::size_t n,
                  std::uint64_t seed) {
    const ph::CanonicalPH dist(init, rates);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        std::cout << csv::format_double(ph::sample(dist, rng)) << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Phase-type vs Gaussian VAE tail-fidelity experiments"};
    app.require_subcommand(1);

    RunFlags run;
    auto* run_cmd = app.add_subcommand("run", "Train and evaluate the experiment grid");
    run_cmd->add_option("--config", run.config, "JSON config file")->check(CLI::ExistingFile);
    run_cmd->add_option("--preset", run.preset, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    run_cmd->add_option("--alphas", run.alphas, "Pareto tail indices")->delimiter(',');
    run_cmd->add_option("--dims", run.dims, "data dimensions")->delimiter(',');
    run_cmd->add_option("--models", run.models, "gaussian and/or ph")->delimiter(',');
    auto* seed_opt = run_cmd->add_option("--seed", run.seed, "single seed");
    run_cmd->add_option("--seeds", run.seeds, "several seeds")->delimiter(',')->excludes(seed_opt);
    run_cmd->add_option("--gen-mode", run.gen_mode, "sample or mean")->check(CLI::IsMember({"sample", "mean"}));
    run_cmd->add_option("--out", run.out, "output directory");
    run_cmd->add_option("--epochs", run.epochs, "training epochs");
    run_cmd->add_option("--n-train", run.n_train, "training samples per cell");
    run_cmd->add_option("--n-test", run.n_test, "test samples per cell");
    run_cmd->add_option("--n-gen", run.n_gen, "generated samples per cell");
    run_cmd->add_option("--grad-clip", run.grad_clip, "global gradient-norm clip");
    run_cmd->add_flag("--shift", run.shift, "model x - x_m instead of x");
    run_cmd->add_flag("--record-runtime", run.record_runtime, "fill the runtime_s column");

    std::string report_dir;
    auto* report_cmd = app.add_subcommand("report", "Summarize a results directory");
    report_cmd->add_option("--in", report_dir, "results directory")->required();

    std::vector<double> init;
    std::vector<double> rates;
    std::size_t n = 1;
    std::uint64_t seed = 0;
    auto* sample_cmd = app.add_subcommand("sample-ph", "Draw from a series-form phase-type distribution");
    sample_cmd->add_option("--init", init, "initial probabilities")->delimiter(',')->required();
    sample_cmd->add_option("--rates", rates, "non-decreasing phase rates")->delimiter(',')->required();
    sample_cmd->add_option("-n", n, "number of draws")->required();
    sample_cmd->add_option("--seed", seed, "RNG seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            return cmd_run(run);
        }
        if (*report_cmd) {
            return cmd_report(report_dir);
        }
        if (*sample_cmd) {
            return cmd_sample_ph(init, rates, n, seed);
        }
    } catch (const Error& e) {
        std::cerr << "error (" << e.kind() << "): " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
