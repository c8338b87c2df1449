#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "pidlf/core_model.hpp"
#include "pidlf/data_io.hpp"
#include "pidlf/metrics.hpp"
#include "pidlf/trainers.hpp"

namespace pidlf {

// Output layout of a training run directory.
inline constexpr const char* kReportFile = "reports.csv";
inline constexpr const char* kTimingFile = "timings.csv";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kFactorUFile = "U.csv";
inline constexpr const char* kFactorVFile = "V.csv";

inline constexpr const char* kReportHeader = "epoch,train_rmse,valid_rmse,valid_mae,mean_lambda";
inline constexpr const char* kTimingHeader = "epoch,wall_time_ms,epoch_seconds,pass_seconds";

inline constexpr const char* kArtifactVersion = "0.1.0";

/// Appends per-epoch records to reports.csv (deterministic metrics) and
/// timings.csv (clock readings), flushing after every epoch so the files can
/// be tailed while training runs.
class ReportWriter {
public:
    explicit ReportWriter(const std::filesystem::path& directory);

    void append(const EpochReport& report);

private:
    std::ofstream reports_;
    std::ofstream timings_;
};

/// Reads reports.csv and, if present, timings.csv back into records.
std::vector<EpochReport> read_reports(const std::filesystem::path& directory);

void write_factors(const std::filesystem::path& directory, const FactorPair& factors);

/// Throws DataError when U and V disagree on the rank.
FactorPair read_factors(const std::filesystem::path& directory);

/// Everything needed to reproduce and audit a training run.
struct RunManifest {
    nlohmann::json config;  // fully resolved settings, accepted back via --config
    std::string version = kArtifactVersion;
    std::string status = "ok";
    std::string started_at;
    std::string finished_at;
    NormalizationParams normalization;
    EvalResult test;
    EvalResult train;
    std::size_t epochs_run = 0;
    bool converged = false;
    std::string report_path = kReportFile;
    std::string timing_path = kTimingFile;
};

nlohmann::json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& j);

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);

/// UTC, ISO 8601 with second resolution.
std::string utc_timestamp();

}  // namespace pidlf
