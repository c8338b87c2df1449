#include "pidlf/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <future>
#include <iomanip>
#include <limits>

#include "pidlf/errors.hpp"

namespace pidlf {

void DatasetSpec::validate() const {
    if (data_path.has_value() == synthetic.has_value()) {
        throw UsageError("specify exactly one data source (--data or --synth)");
    }
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) {
        throw UsageError("split ratio must lie strictly between 0 and 1");
    }
    if (synthetic) {
        synthetic->validate();
    }
}

std::optional<std::string> find_header(const DatasetSpec& spec) {
    if (spec.header_path) {
        return spec.header_path;
    }
    if (!spec.data_path) {
        return std::nullopt;
    }
    const std::filesystem::path data(*spec.data_path);
    auto candidate = std::filesystem::path(data).replace_extension(".json");
    if (candidate != data && std::filesystem::exists(candidate)) {
        return candidate.string();
    }
    return std::nullopt;
}

ObservedMatrix load_dataset_file(const DatasetSpec& spec, const LoadOptions& fallback) {
    LoadOptions options = fallback;
    options.delimiter = spec.delimiter;
    if (const auto header_path = find_header(spec)) {
        const TripleHeader header = read_header(*header_path);
        options.rows = header.rows;
        options.cols = header.cols;
        options.delimiter = header.delimiter;
    }
    return load_delimited(*spec.data_path, options);
}

PreparedData prepare_dataset(const DatasetSpec& spec) {
    spec.validate();
    ObservedMatrix raw = spec.synthetic ? generate_synthetic(*spec.synthetic).observed : load_dataset_file(spec);
    NormalizedMatrix normalized = normalize(raw, spec.normalization);
    SplitResult parts = split(normalized.matrix, spec.split_ratio, spec.split_seed);
    return {std::move(parts.train), std::move(parts.test), normalized.params};
}

namespace {

BenchmarkRow run_one(const PreparedData& data, TrainConfig config, Optimizer optimizer) {
    BenchmarkRow row;
    row.optimizer = optimizer;
    config.optimizer = optimizer;
    const auto start = std::chrono::steady_clock::now();
    try {
        TrainResult result = train(data.train, data.test, config);
        row.test = evaluate(data.test, result.factors);
        row.epochs = result.epochs_run();
        row.converged = result.converged;
        row.reports = std::move(result.reports);
        row.ok = true;
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return row;
}

}  // namespace

std::vector<BenchmarkRow> run_benchmark(const PreparedData& data, const TrainConfig& base,
                                        std::span<const Optimizer> optimizers, std::size_t jobs) {
    std::vector<BenchmarkRow> rows(optimizers.size());
    jobs = std::max<std::size_t>(1, jobs);
    for (std::size_t start = 0; start < optimizers.size(); start += jobs) {
        const std::size_t stop = std::min(optimizers.size(), start + jobs);
        if (stop - start == 1) {
            rows[start] = run_one(data, base, optimizers[start]);
            continue;
        }
        std::vector<std::future<BenchmarkRow>> pending;
        for (std::size_t k = start; k < stop; ++k) {
            pending.push_back(std::async(std::launch::async, run_one, std::cref(data), base, optimizers[k]));
        }
        for (std::size_t k = start; k < stop; ++k) {
            rows[k] = pending[k - start].get();
        }
    }
    return rows;
}

void write_benchmark_table(std::ostream& out, std::span<const BenchmarkRow> rows) {
    const auto flags = out.flags();
    out << std::left << std::setw(12) << "optimizer" << std::right << std::setw(12) << "rmse" << std::setw(12) << "mae"
        << std::setw(9) << "epochs" << std::setw(11) << "converged" << std::setw(12) << "wall_s" << '\n';
    for (const auto& row : rows) {
        out << std::left << std::setw(12) << optimizer_name(row.optimizer) << std::right;
        if (!row.ok) {
            out << "  failed: " << row.error << '\n';
            continue;
        }
        out << std::fixed << std::setprecision(6) << std::setw(12) << row.test.rmse << std::setw(12) << row.test.mae
            << std::setw(9) << row.epochs << std::setw(11) << (row.converged ? "yes" : "no") << std::setprecision(3)
            << std::setw(12) << row.wall_seconds << '\n';
    }
    out.flags(flags);
}

void write_benchmark_csv(std::ostream& out, std::span<const BenchmarkRow> rows, bool header,
                         std::optional<std::uint64_t> seed) {
    if (header) {
        out << (seed ? "seed," : "") << "optimizer,status,rmse,mae,epochs,converged,wall_seconds\n";
    }
    for (const auto& row : rows) {
        if (seed) {
            out << *seed << ',';
        }
        out << optimizer_name(row.optimizer) << ',' << (row.ok ? "ok" : "failed") << ',';
        if (row.ok) {
            out << format_double(row.test.rmse) << ',' << format_double(row.test.mae) << ',' << row.epochs << ','
                << (row.converged ? 1 : 0) << ',';
        } else {
            out << ",,,,";
        }
        out << format_double(row.wall_seconds) << '\n';
    }
}

ComparisonVerdict compare_against_baselines(std::span<const BenchmarkRow> rows, std::size_t max_epochs,
                                            double rmse_slack) {
    const BenchmarkRow* adaptive = nullptr;
    std::vector<double> epochs;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& row : rows) {
        if (row.optimizer == Optimizer::lambda_opt) {
            adaptive = &row;
        } else if (std::find(std::begin(kBaselineOptimizers), std::end(kBaselineOptimizers), row.optimizer) !=
                   std::end(kBaselineOptimizers)) {
            epochs.push_back(row.ok ? static_cast<double>(row.epochs) : static_cast<double>(max_epochs));
            if (row.ok) {
                best = std::min(best, row.test.rmse);
            }
        }
    }
    if (adaptive == nullptr || !adaptive->ok) {
        throw UsageError("comparison needs a successful lambda_opt row");
    }
    if (epochs.empty()) {
        throw UsageError("comparison needs at least one baseline row");
    }
    std::sort(epochs.begin(), epochs.end());
    const std::size_t n = epochs.size();
    const double median = n % 2 == 1 ? epochs[n / 2] : 0.5 * (epochs[n / 2 - 1] + epochs[n / 2]);

    ComparisonVerdict verdict;
    verdict.best_baseline_rmse = best;
    verdict.median_baseline_epochs = median;
    verdict.accuracy_ok = adaptive->test.rmse <= best + rmse_slack;
    verdict.speed_ok = static_cast<double>(adaptive->epochs) <= median;
    return verdict;
}

}  // namespace pidlf
