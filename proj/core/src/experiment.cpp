#include "phvae/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include "json.hpp"
#include "phvae/checkpoint.hpp"
#include "phvae/csv.hpp"
#include "phvae/datagen.hpp"
#include "phvae/error.hpp"

namespace phvae::exp {

using json = nlohmann::json;

// ---- configuration -------------------------------------------------------------

void ExperimentConfig::validate() const {
    if (alphas.empty() || dims.empty() || models.empty() || seeds.empty()) {
        throw ConfigError("alphas, dims, models and seeds must all be non-empty");
    }
    for (double a : alphas) {
        if (!(a > 0.0) || !std::isfinite(a)) {
            throw ConfigError("tail indices must be positive");
        }
    }
    for (std::size_t d : dims) {
        if (d == 0) {
            throw ConfigError("dims must be positive");
        }
    }
    if (epochs == 0 || batch_size == 0 || latent_dim == 0 || phases == 0) {
        throw ConfigError("epochs, batch_size, latent_dim and phases must be positive");
    }
    if (!(learning_rate > 0.0)) {
        throw ConfigError("learning_rate must be positive");
    }
    if (n_train == 0 || n_gen == 0) {
        throw ConfigError("n_train and n_gen must be positive");
    }
    // The tail metrics need test points above the 0.995 quantile.
    if (n_test < 200) {
        throw ConfigError("n_test must be at least 200");
    }
    if (!(tolerance > 0.0 && tolerance < 1.0)) {
        throw ConfigError("tolerance must lie in (0, 1)");
    }
    if (grad_clip && !(*grad_clip > 0.0)) {
        throw ConfigError("grad_clip must be positive");
    }
    if (workers == 0) {
        throw ConfigError("workers must be positive");
    }
}

ExperimentConfig make_preset(const std::string& name) {
    ExperimentConfig cfg;
    if (name == "paper") {
        cfg.preset = "paper";
        return cfg;
    }
    if (name == "desk") {
        cfg.preset = "desk";
        cfg.n_train = 5'000;
        cfg.n_test = 5'000;
        cfg.epochs = 30;
        cfg.seeds = {0};
        return cfg;
    }
    throw ConfigError("unknown preset '" + name + "' (expected desk or paper)");
}

namespace {

void note_override(ExperimentConfig& cfg, const std::string& key) {
    if (std::find(cfg.overrides.begin(), cfg.overrides.end(), key) == cfg.overrides.end()) {
        cfg.overrides.push_back(key);
    }
}

template <class T>
T get_as(const json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

json config_body(const ExperimentConfig& cfg) {
    json j;
    j["preset"] = cfg.preset;
    j["alphas"] = cfg.alphas;
    j["dims"] = cfg.dims;
    std::vector<std::string> models;
    for (auto m : cfg.models) {
        models.push_back(vae::to_string(m));
    }
    j["models"] = models;
    j["seeds"] = cfg.seeds;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["learning_rate"] = cfg.learning_rate;
    j["latent_dim"] = cfg.latent_dim;
    j["phases"] = cfg.phases;
    j["hidden"] = cfg.hidden;
    j["logvar_clamp"] = cfg.logvar_clamp;
    j["grad_clip"] = cfg.grad_clip ? json(*cfg.grad_clip) : json(nullptr);
    j["n_train"] = cfg.n_train;
    j["n_test"] = cfg.n_test;
    j["n_gen"] = cfg.n_gen;
    j["scale"] = cfg.scale;
    j["shift"] = cfg.shift;
    j["gen_mode"] = vae::to_string(cfg.gen_mode);
    j["tolerance"] = cfg.tolerance;
    j["lipschitz_pairs"] = cfg.lipschitz_pairs;
    j["lipschitz_radius"] = cfg.lipschitz_radius;
    return j;
}

} // namespace

void apply_json(ExperimentConfig& cfg, const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    for (auto it = root.begin(); it != root.end(); ++it) {
        const std::string& key = it.key();
        const json& v = it.value();
        if (key == "preset") {
            // Selected by the caller before the file is merged.
            continue;
        } else if (key == "config_hash" || key == "version" || key == "overrides") {
            // Written into the echoed config.json; lets that file be fed back in.
            continue;
        } else if (key == "alphas") {
            cfg.alphas = get_as<std::vector<double>>(v, key);
        } else if (key == "dims") {
            cfg.dims = get_as<std::vector<std::size_t>>(v, key);
        } else if (key == "models") {
            cfg.models.clear();
            for (const auto& s : get_as<std::vector<std::string>>(v, key)) {
                cfg.models.push_back(vae::parse_decoder_kind(s));
            }
        } else if (key == "seeds") {
            cfg.seeds = get_as<std::vector<std::uint64_t>>(v, key);
        } else if (key == "epochs") {
            cfg.epochs = get_as<std::size_t>(v, key);
        } else if (key == "batch_size") {
            cfg.batch_size = get_as<std::size_t>(v, key);
        } else if (key == "learning_rate") {
            cfg.learning_rate = get_as<double>(v, key);
        } else if (key == "latent_dim") {
            cfg.latent_dim = get_as<std::size_t>(v, key);
        } else if (key == "phases") {
            cfg.phases = get_as<std::size_t>(v, key);
        } else if (key == "hidden") {
            cfg.hidden = get_as<std::vector<std::size_t>>(v, key);
        } else if (key == "logvar_clamp") {
            cfg.logvar_clamp = get_as<double>(v, key);
        } else if (key == "grad_clip") {
            cfg.grad_clip = v.is_null() ? std::nullopt : std::optional<double>(get_as<double>(v, key));
        } else if (key == "n_train") {
            cfg.n_train = get_as<std::size_t>(v, key);
        } else if (key == "n_test") {
            cfg.n_test = get_as<std::size_t>(v, key);
        } else if (key == "n_gen") {
            cfg.n_gen = get_as<std::size_t>(v, key);
        } else if (key == "scale") {
            cfg.scale = get_as<double>(v, key);
        } else if (key == "shift") {
            cfg.shift = get_as<bool>(v, key);
        } else if (key == "gen_mode") {
            cfg.gen_mode = vae::parse_gen_mode(get_as<std::string>(v, key));
        } else if (key == "tolerance") {
            cfg.tolerance = get_as<double>(v, key);
        } else if (key == "lipschitz_pairs") {
            cfg.lipschitz_pairs = get_as<std::size_t>(v, key);
        } else if (key == "lipschitz_radius") {
            cfg.lipschitz_radius = get_as<double>(v, key);
        } else if (key == "out") {
            cfg.out_dir = get_as<std::string>(v, key);
        } else if (key == "workers") {
            cfg.workers = get_as<std::size_t>(v, key);
        } else if (key == "record_runtime") {
            cfg.record_runtime = get_as<bool>(v, key);
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
        note_override(cfg, key);
    }
}

void apply_json_file(ExperimentConfig& cfg, const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw ConfigError("cannot open config file " + path.string());
    }
    std::stringstream ss;
    ss << is.rdbuf();
    apply_json(cfg, ss.str());
}

std::string to_json(const ExperimentConfig& cfg) {
    json j = config_body(cfg);
    j["out"] = cfg.out_dir.string();
    j["workers"] = cfg.workers;
    j["record_runtime"] = cfg.record_runtime;
    j["overrides"] = cfg.overrides;
    j["config_hash"] = config_hash(cfg);
    j["version"] = kVersion;
    return j.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string body = config_body(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : body) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

std::size_t workers_from_env() {
    if (const char* env = std::getenv("PHVAE_WORKERS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) {
                return static_cast<std::size_t>(v);
            }
        } catch (const std::exception&) {
        }
        throw ConfigError(std::string("PHVAE_WORKERS must be a positive integer, got '") + env + "'");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// ---- cells -------------------------------------------------------------------

std::string CellKey::name() const {
    return "a" + csv::format_double(alpha) + "_d" + std::to_string(dim) + "_" + vae::to_string(model) + "_s" +
           std::to_string(seed);
}

namespace {

void write_record_json(const std::filesystem::path& path, const RunRecord& rec) {
    json j;
    j["cell"] = rec.key.name();
    j["alpha"] = rec.key.alpha;
    j["d"] = rec.key.dim;
    j["model"] = vae::to_string(rec.key.model);
    j["seed"] = rec.key.seed;
    j["ok"] = rec.ok;
    j["error"] = rec.error;
    j["config_hash"] = rec.config_hash;
    j["version"] = rec.version;
    j["runtime_s"] = rec.runtime_s;
    j["checkpoint"] = rec.checkpoint.filename().string();
    j["loss"] = rec.loss;
    j["telemetry"] = {{"evaluations", rec.telemetry.evaluations},
                      {"clamped", rec.telemetry.clamped},
                      {"mean_terms", rec.telemetry.evaluations == 0
                                         ? 0.0
                                         : static_cast<double>(rec.telemetry.total_terms) /
                                               static_cast<double>(rec.telemetry.evaluations)},
                      {"max_terms", rec.telemetry.max_terms_used}};
    if (rec.ok) {
        const auto& m = rec.metrics;
        json metrics = {{"ks", m.ks},
                        {"ks_tail", m.ks_tail},
                        {"q99_err", m.q_err_99},
                        {"q995_err", m.q_err_995},
                        {"u", m.u},
                        {"n_tail_gen", m.n_tail_gen},
                        {"n_tail_test", m.n_tail_test},
                        {"lipschitz_est", m.lipschitz_estimate},
                        {"pooling", "mean over dimensions"}};
        if (m.smallest_rate) {
            metrics["min_rate"] = m.smallest_rate->min;
            metrics["median_smallest_rate"] = m.smallest_rate->median;
        }
        j["metrics"] = metrics;
    }
    std::ofstream os(path);
    os << j.dump(2) << '\n';
}

} // namespace

RunRecord run_cell(const CellKey& key, const ExperimentConfig& cfg) {
    RunRecord rec;
    rec.key = key;
    rec.config_hash = config_hash(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const std::uint64_t abits = std::bit_cast<std::uint64_t>(key.alpha);
        const std::uint64_t ktag = tag(vae::to_string(key.model).c_str());
        const Rng root(key.seed);

        // Data, initialization and training noise do not depend on the model
        // kind, so the two models of a cell see identical inputs.
        data::DatasetConfig dc;
        dc.tail_index = key.alpha;
        dc.scale = cfg.scale;
        dc.dim = key.dim;
        dc.n_train = cfg.n_train;
        dc.n_test = cfg.n_test;
        dc.n_gen = cfg.n_gen;
        dc.seed = key.seed;
        Rng data_rng = root.substream({tag("data"), abits, key.dim});
        const data::Dataset ds = data::pareto_sample(dc, data_rng);

        ad::Tensor train_x = ds.train;
        if (cfg.shift) {
            for (double& x : train_x.values()) {
                x = std::max(x - cfg.scale, std::numeric_limits<double>::min());
            }
        }

        vae::VAEConfig vc;
        vc.kind = key.model;
        vc.data_dim = key.dim;
        vc.latent_dim = cfg.latent_dim;
        vc.phases = cfg.phases;
        vc.hidden = cfg.hidden;
        vc.logvar_clamp = cfg.logvar_clamp;
        vc.ph_options.tolerance = cfg.tolerance;
        vae::VAEModel model(vc);
        model.init(root.substream({tag("init"), abits, key.dim}));

        vae::TrainConfig tc;
        tc.epochs = cfg.epochs;
        tc.batch_size = cfg.batch_size;
        tc.adam.learning_rate = cfg.learning_rate;
        tc.grad_clip = cfg.grad_clip;
        auto tr = vae::train(model, train_x, tc, root.substream({tag("train"), abits, key.dim}));
        rec.loss = tr.epoch_loss;
        rec.telemetry = tr.telemetry;

        Rng gen_rng = root.substream({tag("generate"), abits, key.dim, ktag});
        ad::Tensor z;
        ad::Tensor gen = vae::generate(model, cfg.n_gen, gen_rng, cfg.gen_mode, &z);
        if (cfg.shift) {
            for (double& x : gen.values()) {
                x += cfg.scale;
            }
        }
        if (!gen.all_finite()) {
            throw NonFiniteError("generate", "non-finite generated sample");
        }
        rec.metrics = eval::evaluate(gen, ds.test);

        Rng lip_rng = root.substream({tag("lipschitz"), abits, key.dim, ktag});
        std::optional<nn::ColumnRange> cols;
        if (key.model == vae::DecoderKind::gaussian) {
            cols = nn::ColumnRange{0, key.dim}; // the decoder mean
        }
        rec.metrics.lipschitz_estimate =
            nn::empirical_lipschitz(model.decoder(), cfg.lipschitz_pairs, cfg.lipschitz_radius, lip_rng, cols);

        if (key.model == vae::DecoderKind::ph) {
            std::vector<double> smallest;
            for (const auto& per_dim : vae::decode_ph_values(model, z)) {
                for (const auto& dist : per_dim) {
                    smallest.push_back(dist.smallest_rate());
                }
            }
            rec.metrics.smallest_rate = eval::rate_stats(std::move(smallest));
        }

        if (!cfg.out_dir.empty()) {
            const auto dir = cfg.out_dir / "cells" / key.name();
            std::filesystem::create_directories(dir);
            rec.checkpoint = dir / "model.ckpt";
            ckpt::save_model(rec.checkpoint, model);
            eval::write_ccdf_csv(dir / "ccdf_gen.csv",
                                 eval::ccdf_curve(data::column(gen, 0), key.name() + " generated dim0"));
            eval::write_ccdf_csv(dir / "ccdf_test.csv",
                                 eval::ccdf_curve(data::column(ds.test, 0), key.name() + " test dim0"));
        }
        rec.ok = true;
    } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
    }
    rec.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!cfg.out_dir.empty()) {
        const auto dir = cfg.out_dir / "cells" / key.name();
        std::filesystem::create_directories(dir);
        write_record_json(dir / "record.json", rec);
    }
    return rec;
}

std::vector<CellKey> grid_cells(const ExperimentConfig& cfg) {
    std::vector<CellKey> cells;
    for (double a : cfg.alphas) {
        for (std::size_t d : cfg.dims) {
            for (auto m : cfg.models) {
                for (auto s : cfg.seeds) {
                    cells.push_back({a, d, m, s});
                }
            }
        }
    }
    return cells;
}

// ---- metrics CSV -----------------------------------------------------------------

void write_metrics_csv(const std::filesystem::path& path, const std::vector<RunRecord>& records,
                       bool record_runtime) {
    std::ofstream os(path);
    if (!os) {
        throw FormatError("cannot open " + path.string() + " for writing");
    }
    using csv::format_double;
    os << kMetricsHeader << '\n';
    for (const auto& r : records) {
        os << format_double(r.key.alpha) << ',' << r.key.dim << ',' << vae::to_string(r.key.model) << ','
           << r.key.seed << ',';
        if (!r.ok) {
            os << ",,,,,,,,,";
        } else {
            const auto& m = r.metrics;
            os << format_double(m.ks) << ',' << format_double(m.ks_tail) << ',' << format_double(m.q_err_99)
               << ',' << format_double(m.q_err_995) << ',' << format_double(m.u) << ',' << m.n_tail_gen << ','
               << m.n_tail_test << ',' << format_double(m.lipschitz_estimate) << ','
               << (m.smallest_rate ? format_double(m.smallest_rate->min) : std::string()) << ',';
        }
        if (record_runtime) {
            os << format_double(r.runtime_s);
        }
        os << '\n';
    }
}

namespace {

void write_per_dim_csv(const std::filesystem::path& path, const std::vector<RunRecord>& records) {
    std::ofstream os(path);
    using csv::format_double;
    os << "alpha,d,model,seed,dim,ks,ks_tail,q99_err,q995_err,u,n_tail_gen,n_tail_test\n";
    for (const auto& r : records) {
        if (!r.ok) {
            continue;
        }
        for (std::size_t j = 0; j < r.metrics.per_dim.size(); ++j) {
            const auto& m = r.metrics.per_dim[j];
            os << format_double(r.key.alpha) << ',' << r.key.dim << ',' << vae::to_string(r.key.model) << ','
               << r.key.seed << ',' << j << ',' << format_double(m.ks) << ',' << format_double(m.ks_tail) << ','
               << format_double(m.q_err_99) << ',' << format_double(m.q_err_995) << ',' << format_double(m.u)
               << ',' << m.n_tail_gen << ',' << m.n_tail_test << '\n';
        }
    }
}

std::optional<double> opt_double(const std::string& s) {
    if (s.empty()) {
        return std::nullopt;
    }
    return csv::parse_double(s);
}

} // namespace

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw ConfigError("no metrics file at " + path.string());
    }
    std::string line;
    if (!std::getline(is, line) || line != kMetricsHeader) {
        throw FormatError(path.string() + ": unexpected header");
    }
    std::vector<MetricsRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        const auto f = csv::split(line);
        if (f.size() != 14) {
            throw FormatError(path.string() + ": expected 14 columns, got " + std::to_string(f.size()));
        }
        MetricsRow r;
        r.alpha = csv::parse_double(f[0]);
        r.d = static_cast<std::size_t>(std::stoull(f[1]));
        r.model = f[2];
        r.seed = std::stoull(f[3]);
        r.ok = !f[4].empty();
        if (r.ok) {
            r.ks = csv::parse_double(f[4]);
            r.ks_tail = csv::parse_double(f[5]);
            r.q99_err = csv::parse_double(f[6]);
            r.q995_err = csv::parse_double(f[7]);
            r.u = csv::parse_double(f[8]);
            r.n_tail_gen = static_cast<std::size_t>(std::stoull(f[9]));
            r.n_tail_test = static_cast<std::size_t>(std::stoull(f[10]));
            r.lipschitz_est = csv::parse_double(f[11]);
            r.min_rate = opt_double(f[12]);
        }
        r.runtime_s = opt_double(f[13]);
        rows.push_back(std::move(r));
    }
    return rows;
}

// ---- grid ---------------------------------------------------------------------------

GridResult run_grid(const ExperimentConfig& cfg, std::ostream* log) {
    cfg.validate();
    const auto cells = grid_cells(cfg);
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        std::ofstream(cfg.out_dir / "config.json") << to_json(cfg);
    }

    GridResult result;
    result.records.resize(cells.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex log_mutex;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) {
                return;
            }
            RunRecord rec = run_cell(cells[i], cfg);
            const std::size_t k = done.fetch_add(1) + 1;
            if (log != nullptr) {
                std::lock_guard lock(log_mutex);
                *log << '[' << k << '/' << cells.size() << "] " << cells[i].name() << ' ';
                if (rec.ok) {
                    *log << "ks=" << std::setprecision(3) << rec.metrics.ks << " ks_tail=" << rec.metrics.ks_tail
                         << " q99_err=" << rec.metrics.q_err_99;
                } else {
                    *log << "FAILED: " << rec.error;
                }
                *log << " (" << std::setprecision(3) << rec.runtime_s << "s)" << std::endl;
            }
            result.records[i] = std::move(rec);
        }
    };

    const std::size_t n_workers = std::min(cfg.workers, cells.size());
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) {
            pool.emplace_back(worker);
        }
    }

    result.any_failed = std::any_of(result.records.begin(), result.records.end(),
                                    [](const RunRecord& r) { return !r.ok; });
    if (!cfg.out_dir.empty()) {
        write_metrics_csv(cfg.out_dir / "metrics.csv", result.records, cfg.record_runtime);
        write_per_dim_csv(cfg.out_dir / "metrics_per_dim.csv", result.records);
    }
    return result;
}

// ---- report --------------------------------------------------------------------------

Report report(const std::filesystem::path& dir) {
    const auto path = dir / "metrics.csv";
    if (!std::filesystem::exists(path)) {
        throw ConfigError("no metrics.csv in " + dir.string());
    }
    const auto rows = read_metrics_csv(path);

    using Key = std::tuple<double, std::size_t, std::string>;
    std::map<Key, std::vector<const MetricsRow*>> groups;
    for (const auto& r : rows) {
        if (r.ok) {
            groups[{r.alpha, r.d, r.model}].push_back(&r);
        }
    }
    if (groups.empty()) {
        throw ConfigError("no successful cells in " + path.string());
    }

    Report rep;
    std::ostringstream table;
    table << std::left << std::setw(7) << "alpha" << std::setw(5) << "d" << std::setw(10) << "model"
          << std::setw(7) << "seeds" << std::setw(9) << "KS" << std::setw(9) << "KS_tail" << std::setw(9)
          << "Q99err" << std::setw(9) << "Q995err" << "min_rate\n";
    table << std::fixed << std::setprecision(3);
    for (const auto& [key, members] : groups) {
        MetricsRow avg;
        std::tie(avg.alpha, avg.d, avg.model) = key;
        avg.ok = true;
        const double n = static_cast<double>(members.size());
        double min_rate = 0.0;
        bool have_rate = true;
        for (const MetricsRow* r : members) {
            avg.ks += r->ks / n;
            avg.ks_tail += r->ks_tail / n;
            avg.q99_err += r->q99_err / n;
            avg.q995_err += r->q995_err / n;
            avg.u += r->u / n;
            avg.lipschitz_est += r->lipschitz_est / n;
            if (r->min_rate) {
                min_rate += *r->min_rate / n;
            } else {
                have_rate = false;
            }
        }
        if (have_rate) {
            avg.min_rate = min_rate;
        }
        std::ostringstream alpha;
        alpha << csv::format_double(avg.alpha);
        table << std::setw(7) << alpha.str() << std::setw(5) << avg.d << std::setw(10) << avg.model << std::setw(7)
              << members.size() << std::setw(9) << avg.ks << std::setw(9) << avg.ks_tail << std::setw(9)
              << avg.q99_err << std::setw(9) << avg.q995_err;
        if (avg.min_rate) {
            table << std::scientific << std::setprecision(2) << *avg.min_rate << std::fixed << std::setprecision(3);
        } else {
            table << '-';
        }
        table << '\n';
        rep.averaged.push_back(avg);
        rep.series.push_back({avg.d, avg.model, avg.alpha, avg.ks_tail, members.size()});
    }
    std::sort(rep.series.begin(), rep.series.end(), [](const SeriesPoint& a, const SeriesPoint& b) {
        return std::tie(a.d, a.model, a.alpha) < std::tie(b.d, b.model, b.alpha);
    });
    rep.table = table.str();

    std::ofstream os(dir / "ks_tail_vs_alpha.csv");
    os << "d,model,alpha,ks_tail,n_seeds\n";
    for (const auto& p : rep.series) {
        os << p.d << ',' << p.model << ',' << csv::format_double(p.alpha) << ',' << csv::format_double(p.ks_tail)
           << ',' << p.n_seeds << '\n';
    }
    return rep;
}

} // namespace phvae::exp
