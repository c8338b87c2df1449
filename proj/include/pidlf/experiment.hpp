#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pidlf/data_io.hpp"
#include "pidlf/metrics.hpp"
#include "pidlf/trainers.hpp"

namespace pidlf {

/// Where the observations come from and how they are prepared for training.
/// Exactly one of `data_path` and `synthetic` is set.
struct DatasetSpec {
    std::optional<std::string> data_path;
    std::optional<std::string> header_path;  // JSON sidecar; <data>.json is tried when absent
    char delimiter = ',';
    std::optional<SyntheticSpec> synthetic;
    Normalization normalization = Normalization::minmax;
    double split_ratio = 0.8;
    std::uint64_t split_seed = 0;

    void validate() const;
};

struct PreparedData {
    ObservedMatrix train;
    ObservedMatrix test;
    NormalizationParams params;
};

/// Load or generate, normalize, split.
PreparedData prepare_dataset(const DatasetSpec& spec);

/// The header named in `spec`, else <data>.json when that file exists.
std::optional<std::string> find_header(const DatasetSpec& spec);

/// Reads the triple file of `spec`. The shape comes from the header when one
/// is found, otherwise from `fallback` (inferred when that is empty too).
ObservedMatrix load_dataset_file(const DatasetSpec& spec, const LoadOptions& fallback = {});

struct BenchmarkRow {
    Optimizer optimizer = Optimizer::lambda_opt;
    bool ok = false;
    std::string error;
    EvalResult test;
    std::size_t epochs = 0;
    bool converged = false;
    double wall_seconds = 0.0;
    std::vector<EpochReport> reports;
};

/// Trains every optimizer in `optimizers` on the same data with `base`
/// (only the optimizer kind changes between runs). Runs use up to `jobs`
/// threads; rows come back in the requested order. A failing run yields a
/// row with ok == false instead of an exception.
std::vector<BenchmarkRow> run_benchmark(const PreparedData& data, const TrainConfig& base,
                                        std::span<const Optimizer> optimizers, std::size_t jobs = 1);

void write_benchmark_table(std::ostream& out, std::span<const BenchmarkRow> rows);
void write_benchmark_csv(std::ostream& out, std::span<const BenchmarkRow> rows, bool header = true,
                         std::optional<std::uint64_t> seed = std::nullopt);

/// The four accelerated fixed-lambda baselines.
inline constexpr Optimizer kBaselineOptimizers[] = {Optimizer::momentum, Optimizer::nesterov, Optimizer::adam,
                                                    Optimizer::nadam};

/// Outcome of comparing the adaptive row against the baseline rows of one
/// benchmark: accuracy within `rmse_slack` of the best baseline and no more
/// epochs than the median baseline.
struct ComparisonVerdict {
    bool accuracy_ok = false;
    bool speed_ok = false;
    double best_baseline_rmse = 0.0;
    double median_baseline_epochs = 0.0;

    bool passed() const { return accuracy_ok && speed_ok; }
};

/// Failed baseline rows count as never converging (max epochs, infinite
/// RMSE). Throws UsageError when no lambda_opt row is present or it failed.
ComparisonVerdict compare_against_baselines(std::span<const BenchmarkRow> rows, std::size_t max_epochs,
                                            double rmse_slack);

}  // namespace pidlf
