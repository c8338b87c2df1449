#include "pidlf/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "pidlf/data_io.hpp"
#include "pidlf/errors.hpp"
#include "pidlf/metrics.hpp"
#include "pidlf/run_files.hpp"

namespace pidlf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const json& setting(const json& s, const char* key) { return s.at(key); }

[[noreturn]] void wrong_type(const char* key, const char* expected) {
    throw UsageError(std::string("setting '") + key + "' must be " + expected);
}

std::optional<double> opt_number(const json& s, const char* key) {
    const json& v = setting(s, key);
    if (v.is_null()) {
        return std::nullopt;
    }
    if (!v.is_number()) {
        wrong_type(key, "a number");
    }
    return v.get<double>();
}

double number(const json& s, const char* key) {
    const auto v = opt_number(s, key);
    if (!v) {
        wrong_type(key, "a number");
    }
    return *v;
}

std::optional<std::uint64_t> opt_count(const json& s, const char* key) {
    const json& v = setting(s, key);
    if (v.is_null()) {
        return std::nullopt;
    }
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        wrong_type(key, "a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

std::uint64_t count(const json& s, const char* key) {
    const auto v = opt_count(s, key);
    if (!v) {
        wrong_type(key, "a non-negative integer");
    }
    return *v;
}

std::optional<std::string> opt_text(const json& s, const char* key) {
    const json& v = setting(s, key);
    if (v.is_null()) {
        return std::nullopt;
    }
    if (!v.is_string()) {
        wrong_type(key, "a string");
    }
    return v.get<std::string>();
}

std::string text(const json& s, const char* key) {
    const auto v = opt_text(s, key);
    if (!v) {
        wrong_type(key, "a string");
    }
    return *v;
}

bool boolean(const json& s, const char* key) {
    const json& v = setting(s, key);
    if (!v.is_boolean()) {
        wrong_type(key, "true or false");
    }
    return v.get<bool>();
}

char parse_delimiter(const std::string& name) {
    if (name == "tab" || name == "\\t" || name == "\t") {
        return '\t';
    }
    if (name.size() != 1) {
        throw UsageError("delimiter must be a single character or 'tab'");
    }
    return name[0];
}

ControlInput parse_control_input(const std::string& name) {
    if (name == "signed") {
        return ControlInput::signed_residual;
    }
    if (name == "absolute") {
        return ControlInput::absolute_residual;
    }
    throw UsageError("control input must be 'signed' or 'absolute', got '" + name + "'");
}

void overlay(json& base, const json& layer, const std::string& origin) {
    if (!layer.is_object()) {
        throw UsageError(origin + " must be a JSON object");
    }
    for (const auto& [key, value] : layer.items()) {
        if (!base.contains(key)) {
            throw UsageError("unknown setting '" + key + "' in " + origin);
        }
        base[key] = value;
    }
}

/// Accepts either a bare settings object or a run manifest.
json config_section(const json& document) {
    if (document.is_object() && document.contains("config")) {
        return document.at("config");
    }
    return document;
}

}  // namespace

json default_settings() {
    return {
        {"optimizer", "lambda_opt"},
        {"preset", nullptr},
        {"eta", 5e-2},
        {"rank", 3},
        {"epochs", 100},
        {"seed", 0},
        {"lambda", nullptr},
        {"kp", nullptr},
        {"ki", nullptr},
        {"kd", nullptr},
        {"lambda_min", nullptr},
        {"lambda_max", nullptr},
        {"control_input", "signed"},
        {"shuffle", true},
        {"eps", 1e-5},
        {"patience", 5},
        {"divergence_limit", 1e6},
        {"momentum", 0.9},
        {"beta1", 0.9},
        {"beta2", 0.999},
        {"epsilon", 1e-8},
        {"data", nullptr},
        {"header", nullptr},
        {"delimiter", ","},
        {"synth", nullptr},
        {"normalize", "minmax"},
        {"split", 0.8},
        {"split_seed", nullptr},
    };
}

RunSettings resolve_settings(const json& flags, const json& file) {
    json s = default_settings();

    std::optional<std::string> preset_name;
    for (const json* layer : {&flags, &file}) {
        if (layer->is_object() && layer->contains("preset") && !layer->at("preset").is_null()) {
            if (!layer->at("preset").is_string()) {
                wrong_type("preset", "a string");
            }
            preset_name = layer->at("preset").get<std::string>();
            break;
        }
    }
    if (preset_name) {
        const auto preset = find_preset(*preset_name);
        if (!preset) {
            throw UsageError("unknown preset '" + *preset_name + "' (expected ukdale or iawe)");
        }
        s["preset"] = *preset_name;
        s["eta"] = preset->eta;
        s["lambda"] = preset->lambda;
        s["kp"] = preset->kp;
        s["ki"] = preset->ki;
        s["kd"] = preset->kd;
    }
    overlay(s, file, "config file");
    overlay(s, flags, "command line");

    RunSettings run;
    TrainConfig& c = run.train;
    c.optimizer = parse_optimizer(text(s, "optimizer"));
    c.eta = number(s, "eta");
    c.rank = count(s, "rank");
    c.max_epochs = count(s, "epochs");
    c.seed = count(s, "seed");
    c.fixed_lambda = opt_number(s, "lambda");
    c.control_input = parse_control_input(text(s, "control_input"));
    c.shuffle = boolean(s, "shuffle");
    c.convergence_eps = number(s, "eps");
    c.patience = count(s, "patience");
    c.divergence_limit = number(s, "divergence_limit");
    c.baseline.momentum = number(s, "momentum");
    c.baseline.beta1 = number(s, "beta1");
    c.baseline.beta2 = number(s, "beta2");
    c.baseline.epsilon = number(s, "epsilon");

    const auto kp = opt_number(s, "kp");
    const auto ki = opt_number(s, "ki");
    const auto kd = opt_number(s, "kd");
    if (kp || ki || kd) {
        PidGains g;
        g.kp = kp.value_or(0.0);
        g.ki = ki.value_or(0.0);
        g.kd = kd.value_or(0.0);
        g.lambda_min = opt_number(s, "lambda_min").value_or(0.0);
        if (const auto hi = opt_number(s, "lambda_max")) {
            g.lambda_max = *hi;
        } else if (c.fixed_lambda) {
            g.lambda_max = 2.0 * *c.fixed_lambda;
        } else if (c.optimizer == Optimizer::lambda_opt) {
            throw UsageError("lambda_opt needs --lambda-max, or --lambda for the default range [0, 2 lambda]");
        }
        if (opt_number(s, "lambda_max") || c.fixed_lambda) {
            s["kp"] = g.kp;
            s["ki"] = g.ki;
            s["kd"] = g.kd;
            s["lambda_min"] = g.lambda_min;
            s["lambda_max"] = g.lambda_max;
            c.gains = g;
        }
    } else if (c.optimizer == Optimizer::lambda_opt) {
        throw UsageError("lambda_opt needs PID gains: set --kp/--ki/--kd or --preset");
    }

    DatasetSpec& d = run.dataset;
    d.data_path = opt_text(s, "data");
    d.header_path = opt_text(s, "header");
    d.delimiter = parse_delimiter(text(s, "delimiter"));
    if (const auto synth = opt_text(s, "synth")) {
        SyntheticSpec defaults;
        defaults.seed = c.seed;
        d.synthetic = parse_synthetic_spec(*synth, defaults);
        s["synth"] = format_synthetic_spec(*d.synthetic);
    }
    d.normalization = parse_normalization(text(s, "normalize"));
    d.split_ratio = number(s, "split");
    d.split_seed = opt_count(s, "split_seed").value_or(c.seed);
    s["split_seed"] = d.split_seed;

    run.resolved = std::move(s);
    return run;
}

namespace {

/// Collects the settings flags that were actually given on the command line.
class SettingsFlags {
public:
    explicit SettingsFlags(CLI::App& app) : app_(app) {}

    template <class T>
    CLI::Option* add(const std::string& flag, const std::string& key, const std::string& help) {
        auto value = std::make_shared<T>();
        CLI::Option* opt = app_.add_option(flag, *value, help);
        collectors_.push_back([this, opt, value, key] {
            if (opt->count() > 0) {
                values_[key] = *value;
            }
        });
        return opt;
    }

    void add_training() {
        add<std::string>("--optimizer", "optimizer", "lambda_opt, sgd, momentum, nesterov, adam or nadam");
        add<std::string>("--preset", "preset", "Hyperparameter preset: ukdale or iawe");
        add<double>("--eta", "eta", "Learning rate");
        add<std::size_t>("--rank", "rank", "Latent dimension k");
        add<std::size_t>("--epochs", "epochs", "Maximum number of epochs");
        add<std::uint64_t>("--seed", "seed", "Seed for initialization and shuffling");
        add<double>("--lambda", "lambda", "Fixed regularization coefficient");
        add<double>("--kp", "kp", "Proportional gain");
        add<double>("--ki", "ki", "Integral gain");
        add<double>("--kd", "kd", "Derivative gain");
        add<double>("--lambda-min", "lambda_min", "Lower clip bound (default 0)");
        add<double>("--lambda-max", "lambda_max", "Upper clip bound (default 2 * lambda)");
        add<std::string>("--control-input", "control_input", "signed or absolute residual");
        add<double>("--eps", "eps", "Convergence threshold on the validation RMSE");
        add<std::size_t>("--patience", "patience", "Epochs below the threshold before stopping");
        add<double>("--divergence-limit", "divergence_limit", "Largest allowed factor magnitude");
        auto* no_shuffle = app_.add_flag("--no-shuffle", "Visit entries in file order");
        collectors_.push_back([this, no_shuffle] {
            if (no_shuffle->count() > 0) {
                values_["shuffle"] = false;
            }
        });
        add_data();
    }

    void add_data() {
        add<std::string>("--data", "data", "Triple file row,col,value");
        add<std::string>("--header", "header", "JSON header with m, n and delimiter");
        add<std::string>("--delimiter", "delimiter", "Field delimiter of the triple file");
        add<std::string>("--synth", "synth", "Synthetic data, e.g. m=100,n=50,rank=3,density=0.3,noise=0.01");
        add<std::string>("--normalize", "normalize", "none, minmax or zscore");
        add<double>("--split", "split", "Fraction of entries used for training");
        add<std::uint64_t>("--split-seed", "split_seed", "Seed of the train/test split (default: --seed)");
    }

    json values() {
        for (auto& collect : collectors_) {
            collect();
        }
        return values_;
    }

private:
    CLI::App& app_;
    json values_ = json::object();
    std::vector<std::function<void()>> collectors_;
};

json load_config(const std::string& path) {
    if (path.empty()) {
        return json::object();
    }
    try {
        return config_section(read_json_file(path));
    } catch (const DataError& e) {
        throw UsageError(std::string("bad config file: ") + e.what());
    }
}

void make_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create directory '" + dir.string() + "'");
    }
}

json eval_record(const EvalResult& r) { return {{"rmse", r.rmse}, {"mae", r.mae}, {"count", r.count}}; }

void print_progress(std::ostream& err, const EpochReport& r, std::size_t max_epochs) {
    const auto flags = err.flags();
    err << "epoch " << r.epoch << '/' << max_epochs << std::fixed << std::setprecision(6)
        << " train_rmse=" << r.train_rmse << " valid_rmse=" << r.valid_rmse << std::scientific
        << std::setprecision(3) << " mean_lambda=" << r.mean_lambda << std::fixed << " time_ms=" << r.wall_time_ms
        << '\n';
    err.flags(flags);
}

int cmd_train(const json& flags, const std::string& config_path, const std::string& out_dir, bool quiet,
              std::ostream& out, std::ostream& err) {
    RunSettings run = resolve_settings(flags, load_config(config_path));
    run.train.validate();
    run.dataset.validate();

    const fs::path dir(out_dir);
    make_directory(dir);

    RunManifest manifest;
    manifest.config = run.resolved;
    manifest.started_at = utc_timestamp();

    const PreparedData data = prepare_dataset(run.dataset);
    manifest.normalization = data.params;

    ReportWriter writer(dir);
    std::size_t epochs_seen = 0;
    const EpochObserver observer = [&](const EpochReport& report) {
        writer.append(report);
        ++epochs_seen;
        if (!quiet) {
            print_progress(err, report, run.train.max_epochs);
        }
    };

    std::optional<TrainResult> result;
    try {
        result.emplace(train(data.train, data.test, run.train, observer));
    } catch (const DivergenceError&) {
        manifest.status = "diverged";
        manifest.epochs_run = epochs_seen;
        manifest.finished_at = utc_timestamp();
        write_manifest(dir / kManifestFile, manifest);
        throw;
    }

    write_factors(dir, result->factors);
    manifest.test = evaluate(data.test, result->factors);
    manifest.train = evaluate(data.train, result->factors);
    manifest.epochs_run = result->epochs_run();
    manifest.converged = result->converged;
    manifest.finished_at = utc_timestamp();
    write_manifest(dir / kManifestFile, manifest);

    out << json{{"status", "ok"},
                {"epochs", manifest.epochs_run},
                {"converged", manifest.converged},
                {"test", eval_record(manifest.test)},
                {"train", eval_record(manifest.train)}}
               .dump()
        << '\n';
    return kExitOk;
}

ObservedMatrix concatenate(const ObservedMatrix& a, const ObservedMatrix& b) {
    std::vector<ObservedEntry> entries(a.entries().begin(), a.entries().end());
    entries.insert(entries.end(), b.entries().begin(), b.entries().end());
    return ObservedMatrix(a.rows(), a.cols(), std::move(entries));
}

int cmd_evaluate(const std::string& factor_dir, const json& data_flags, std::string manifest_path,
                 const std::string& part, std::ostream& out) {
    const fs::path dir(factor_dir);
    const FactorPair factors = read_factors(dir);
    if (manifest_path.empty() && fs::exists(dir / kManifestFile)) {
        manifest_path = (dir / kManifestFile).string();
    }
    std::optional<RunManifest> manifest;
    if (!manifest_path.empty()) {
        manifest = read_manifest(manifest_path);
    }

    EvalResult result;
    json record;
    if (data_flags.contains("data")) {
        DatasetSpec spec;
        spec.data_path = data_flags.at("data").get<std::string>();
        if (data_flags.contains("header")) {
            spec.header_path = data_flags.at("header").get<std::string>();
        }
        if (data_flags.contains("delimiter")) {
            spec.delimiter = parse_delimiter(data_flags.at("delimiter").get<std::string>());
        }
        LoadOptions fallback;
        fallback.rows = factors.rows();
        fallback.cols = factors.cols();
        ObservedMatrix matrix = load_dataset_file(spec, fallback);
        if (manifest) {
            matrix = apply_normalization(matrix, manifest->normalization);
        }
        result = evaluate(matrix, factors);
        record["data"] = *spec.data_path;
    } else {
        if (!manifest) {
            throw UsageError("evaluate needs --data or a run manifest next to the factors");
        }
        if (!data_flags.empty()) {
            throw UsageError("--header and --delimiter only apply together with --data");
        }
        const RunSettings run = resolve_settings(json::object(), manifest->config);
        const PreparedData data = prepare_dataset(run.dataset);
        if (part == "train") {
            result = evaluate(data.train, factors);
        } else if (part == "test") {
            result = evaluate(data.test, factors);
        } else {
            result = evaluate(concatenate(data.train, data.test), factors);
        }
        record["part"] = part;
    }
    record["rmse"] = result.rmse;
    record["mae"] = result.mae;
    record["count"] = result.count;
    out << record.dump() << '\n';
    return kExitOk;
}

struct BenchmarkOptions {
    std::vector<std::string> optimizers;
    std::vector<std::uint64_t> seeds;
    std::size_t jobs = 1;
    double rmse_slack = 0.005;
    std::string out_dir;
    bool quiet = false;
};

int cmd_benchmark(const json& flags, const std::string& config_path, const BenchmarkOptions& options,
                  std::ostream& out, std::ostream& err) {
    const json file = load_config(config_path);

    std::vector<Optimizer> optimizers;
    if (options.optimizers.empty()) {
        optimizers.push_back(Optimizer::lambda_opt);
        optimizers.insert(optimizers.end(), std::begin(kBaselineOptimizers), std::end(kBaselineOptimizers));
    } else {
        for (const auto& name : options.optimizers) {
            optimizers.push_back(parse_optimizer(name));
        }
    }
    if (options.jobs == 0) {
        throw UsageError("--jobs must be at least 1");
    }

    std::vector<std::uint64_t> seeds = options.seeds;
    if (seeds.empty()) {
        seeds.push_back(resolve_settings(flags, file).train.seed);
    }

    // Resolve and validate every run before training anything.
    std::vector<RunSettings> runs;
    for (const auto seed : seeds) {
        json seeded = flags;
        seeded["seed"] = seed;
        RunSettings run = resolve_settings(seeded, file);
        for (const auto optimizer : optimizers) {
            TrainConfig config = run.train;
            config.optimizer = optimizer;
            config.validate();
        }
        run.dataset.validate();
        runs.push_back(std::move(run));
    }

    const bool compare = std::find(optimizers.begin(), optimizers.end(), Optimizer::lambda_opt) != optimizers.end() &&
                         std::any_of(optimizers.begin(), optimizers.end(), [](Optimizer o) {
                             return std::find(std::begin(kBaselineOptimizers), std::end(kBaselineOptimizers), o) !=
                                    std::end(kBaselineOptimizers);
                         });

    std::ostringstream csv;
    std::size_t total = 0;
    std::size_t failed = 0;
    std::size_t compared = 0;
    std::size_t wins = 0;
    json verdicts = json::array();
    for (std::size_t s = 0; s < runs.size(); ++s) {
        const RunSettings& run = runs[s];
        if (!options.quiet) {
            err << "seed " << seeds[s] << ": training " << optimizers.size() << " optimizer(s)\n";
        }
        const PreparedData data = prepare_dataset(run.dataset);
        const auto rows = run_benchmark(data, run.train, optimizers, options.jobs);

        if (runs.size() > 1) {
            out << (s == 0 ? "" : "\n") << "seed " << seeds[s] << '\n';
        }
        write_benchmark_table(out, rows);
        write_benchmark_csv(csv, rows, s == 0, seeds[s]);
        for (const auto& row : rows) {
            ++total;
            failed += row.ok ? 0 : 1;
        }

        if (compare) {
            try {
                const auto v = compare_against_baselines(rows, run.train.max_epochs, options.rmse_slack);
                ++compared;
                wins += v.passed() ? 1 : 0;
                out << "lambda_opt: rmse " << (v.accuracy_ok ? "within" : "outside") << ' ' << options.rmse_slack
                    << " of best baseline " << v.best_baseline_rmse << ", epochs "
                    << (v.speed_ok ? "<=" : ">") << " baseline median " << v.median_baseline_epochs << '\n';
                verdicts.push_back({{"seed", seeds[s]},
                                    {"accuracy_ok", v.accuracy_ok},
                                    {"speed_ok", v.speed_ok},
                                    {"best_baseline_rmse", v.best_baseline_rmse},
                                    {"median_baseline_epochs", v.median_baseline_epochs}});
            } catch (const UsageError& e) {
                out << "comparison unavailable: " << e.what() << '\n';
            }
        }
    }
    if (compare && runs.size() > 1) {
        out << "\nlambda_opt met both targets in " << wins << " of " << compared << " seeds\n";
    }

    if (options.out_dir.empty()) {
        out << '\n' << csv.str();
    } else {
        const fs::path dir(options.out_dir);
        make_directory(dir);
        std::ofstream table(dir / "benchmark.csv", std::ios::binary | std::ios::trunc);
        table << csv.str();
        if (!table) {
            throw IoError("failed writing '" + (dir / "benchmark.csv").string() + "'");
        }
        json summary{{"version", kArtifactVersion}, {"config", runs.front().resolved}, {"seeds", seeds},
                     {"optimizers", json::array()}, {"comparisons", verdicts}};
        for (const auto o : optimizers) {
            summary["optimizers"].push_back(std::string(optimizer_name(o)));
        }
        std::ofstream meta(dir / "benchmark.json", std::ios::binary | std::ios::trunc);
        meta << summary.dump(2) << '\n';
        if (!meta) {
            throw IoError("failed writing '" + (dir / "benchmark.json").string() + "'");
        }
    }
    return failed == total ? kExitDiverged : kExitOk;
}

int cmd_synth(const std::string& spec_text, std::uint64_t seed, const std::string& delimiter,
              const std::string& out_dir, std::ostream& out) {
    SyntheticSpec defaults;
    defaults.seed = seed;
    const SyntheticSpec spec = parse_synthetic_spec(spec_text, defaults);
    spec.validate();
    const char delim = parse_delimiter(delimiter);
    const SyntheticData data = generate_synthetic(spec);

    const fs::path dir(out_dir);
    make_directory(dir);
    write_delimited(dir / "observed.csv", data.observed, delim);
    write_header(dir / "observed.json", {data.observed.rows(), data.observed.cols(), delim});
    write_dense(dir / "truth.csv", data.truth);

    const json description{{"version", kArtifactVersion},
                           {"spec", format_synthetic_spec(spec)},
                           {"m", spec.rows},
                           {"n", spec.cols},
                           {"rank", spec.rank},
                           {"density", spec.density},
                           {"noise", spec.noise_sigma},
                           {"seed", spec.seed},
                           {"observed", data.observed.size()}};
    std::ofstream meta(dir / "synth.json", std::ios::binary | std::ios::trunc);
    meta << description.dump(2) << '\n';
    if (!meta) {
        throw IoError("failed writing '" + (dir / "synth.json").string() + "'");
    }
    out << json{{"observed", data.observed.size()}, {"spec", format_synthetic_spec(spec)}, {"out", dir.string()}}.dump()
        << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Latent factor matrix completion with PID-adapted regularization", "pidlf"};
    app.require_subcommand(1);

    auto* train_cmd = app.add_subcommand("train", "Train a model and write factors, reports and a manifest");
    SettingsFlags train_flags(*train_cmd);
    train_flags.add_training();
    std::string train_config;
    std::string train_out;
    bool train_quiet = false;
    train_cmd->add_option("--config", train_config, "Settings JSON or a previous run manifest");
    train_cmd->add_option("--out", train_out, "Output directory")->required();
    train_cmd->add_flag("--quiet", train_quiet, "No per-epoch progress");

    auto* eval_cmd = app.add_subcommand("evaluate", "Score saved factors on a data set");
    SettingsFlags eval_flags(*eval_cmd);
    eval_flags.add<std::string>("--data", "data", "Triple file to score (default: the run's own split)");
    eval_flags.add<std::string>("--header", "header", "JSON header with m, n and delimiter");
    eval_flags.add<std::string>("--delimiter", "delimiter", "Field delimiter of the triple file");
    std::string factor_dir;
    std::string eval_manifest;
    std::string part = "test";
    eval_cmd->add_option("--factors", factor_dir, "Run directory holding U.csv and V.csv")->required();
    eval_cmd->add_option("--manifest", eval_manifest, "Run manifest (default: manifest.json next to the factors)");
    eval_cmd->add_option("--part", part, "Split to score when --data is absent")
        ->check(CLI::IsMember({"train", "test", "all"}));

    auto* bench_cmd = app.add_subcommand("benchmark", "Compare optimizers on identical data and seeds");
    SettingsFlags bench_flags(*bench_cmd);
    bench_flags.add_training();
    std::string bench_config;
    BenchmarkOptions bench;
    bench_cmd->add_option("--config", bench_config, "Settings JSON or a run manifest");
    bench_cmd->add_option("--optimizers", bench.optimizers, "Comma-separated list (default: the five main ones)")
        ->delimiter(',');
    bench_cmd->add_option("--seeds", bench.seeds, "Comma-separated seeds, one benchmark per seed")->delimiter(',');
    bench_cmd->add_option("--jobs", bench.jobs, "Concurrent training runs");
    bench_cmd->add_option("--rmse-slack", bench.rmse_slack, "Allowed RMSE gap to the best baseline");
    bench_cmd->add_option("--out", bench.out_dir, "Write benchmark.csv and benchmark.json here");
    bench_cmd->add_flag("--quiet", bench.quiet, "No progress lines");

    auto* synth_cmd = app.add_subcommand("synth", "Generate a planted low-rank data set");
    std::string synth_spec;
    std::uint64_t synth_seed = 0;
    std::string synth_delimiter = ",";
    std::string synth_out;
    synth_cmd->add_option("--synth", synth_spec, "m=..,n=..,rank=..,density=..,noise=..[,seed=..]")->required();
    synth_cmd->add_option("--seed", synth_seed, "Seed used when the spec has none");
    synth_cmd->add_option("--delimiter", synth_delimiter, "Field delimiter of observed.csv");
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();

    try {
        try {
            std::vector<std::string> reversed(args.rbegin(), args.rend());
            app.parse(reversed);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e, out, err);
            return code == 0 ? kExitOk : kExitUsage;
        }

        if (train_cmd->parsed()) {
            return cmd_train(train_flags.values(), train_config, train_out, train_quiet, out, err);
        }
        if (eval_cmd->parsed()) {
            return cmd_evaluate(factor_dir, eval_flags.values(), eval_manifest, part, out);
        }
        if (bench_cmd->parsed()) {
            return cmd_benchmark(bench_flags.values(), bench_config, bench, out, err);
        }
        return cmd_synth(synth_spec, synth_seed, synth_delimiter, synth_out, out);
    } catch (const DivergenceError& e) {
        err << "pidlf: diverged: " << e.what() << '\n';
        return kExitDiverged;
    } catch (const UsageError& e) {
        err << "pidlf: " << e.what() << '\n';
        return kExitUsage;
    } catch (const IoError& e) {
        err << "pidlf: " << e.what() << '\n';
        return kExitIo;
    } catch (const DataError& e) {
        err << "pidlf: " << e.what() << '\n';
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        err << "pidlf: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        err << "pidlf: " << e.what() << '\n';
        return kExitUsage;
    }
}

}  // namespace pidlf
