#include "pidlf/run_files.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <sstream>

#include "pidlf/errors.hpp"

namespace pidlf {

namespace {

std::ofstream open_truncated(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        fields.push_back(field);
    }
    return fields;
}

template <class T>
T parse_field(const std::string& text, const std::filesystem::path& path, std::size_t line) {
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ParseError(path.string(), line, "bad field '" + text + "'");
    }
    return value;
}

nlohmann::json eval_json(const EvalResult& r) { return {{"rmse", r.rmse}, {"mae", r.mae}, {"count", r.count}}; }

EvalResult eval_from_json(const nlohmann::json& j) {
    return {j.at("rmse").get<double>(), j.at("mae").get<double>(), j.at("count").get<std::size_t>()};
}

}  // namespace

ReportWriter::ReportWriter(const std::filesystem::path& directory)
    : reports_(open_truncated(directory / kReportFile)), timings_(open_truncated(directory / kTimingFile)) {
    reports_ << kReportHeader << '\n';
    timings_ << kTimingHeader << '\n';
    reports_.flush();
    timings_.flush();
}

void ReportWriter::append(const EpochReport& r) {
    reports_ << r.epoch << ',' << format_double(r.train_rmse) << ',' << format_double(r.valid_rmse) << ','
             << format_double(r.valid_mae) << ',' << format_double(r.mean_lambda) << '\n';
    timings_ << r.epoch << ',' << r.wall_time_ms << ',' << format_double(r.epoch_seconds) << ','
             << format_double(r.pass_seconds) << '\n';
    reports_.flush();
    timings_.flush();
    if (!reports_ || !timings_) {
        throw IoError("failed writing epoch report");
    }
}

std::vector<EpochReport> read_reports(const std::filesystem::path& directory) {
    const auto report_path = directory / kReportFile;
    std::ifstream in(report_path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + report_path.string() + "'");
    }
    std::vector<EpochReport> reports;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1) {
            if (line != kReportHeader) {
                throw ParseError(report_path.string(), 1, "unexpected header");
            }
            continue;
        }
        if (line.empty()) {
            continue;
        }
        const auto f = split_line(line);
        if (f.size() != 5) {
            throw ParseError(report_path.string(), line_no, "expected 5 fields");
        }
        EpochReport r;
        r.epoch = parse_field<std::size_t>(f[0], report_path, line_no);
        r.train_rmse = parse_field<double>(f[1], report_path, line_no);
        r.valid_rmse = parse_field<double>(f[2], report_path, line_no);
        r.valid_mae = parse_field<double>(f[3], report_path, line_no);
        r.mean_lambda = parse_field<double>(f[4], report_path, line_no);
        reports.push_back(r);
    }

    const auto timing_path = directory / kTimingFile;
    std::ifstream timing(timing_path, std::ios::binary);
    if (!timing) {
        return reports;
    }
    line_no = 0;
    while (std::getline(timing, line)) {
        ++line_no;
        if (line_no == 1 || line.empty()) {
            continue;
        }
        const auto f = split_line(line);
        if (f.size() != 4) {
            throw ParseError(timing_path.string(), line_no, "expected 4 fields");
        }
        const auto epoch = parse_field<std::size_t>(f[0], timing_path, line_no);
        if (epoch == 0 || epoch > reports.size() || reports[epoch - 1].epoch != epoch) {
            throw ParseError(timing_path.string(), line_no, "epoch without a matching report");
        }
        auto& r = reports[epoch - 1];
        r.wall_time_ms = parse_field<std::int64_t>(f[1], timing_path, line_no);
        r.epoch_seconds = parse_field<double>(f[2], timing_path, line_no);
        r.pass_seconds = parse_field<double>(f[3], timing_path, line_no);
    }
    return reports;
}

void write_factors(const std::filesystem::path& directory, const FactorPair& factors) {
    const std::size_t k = factors.rank();
    write_dense(directory / kFactorUFile,
                {factors.rows(), k, {factors.u_values().begin(), factors.u_values().end()}});
    write_dense(directory / kFactorVFile,
                {factors.cols(), k, {factors.v_values().begin(), factors.v_values().end()}});
}

FactorPair read_factors(const std::filesystem::path& directory) {
    const DenseMatrix u = read_dense(directory / kFactorUFile);
    const DenseMatrix v = read_dense(directory / kFactorVFile);
    if (u.rows == 0 || v.rows == 0) {
        throw DataError("factor files in '" + directory.string() + "' are empty");
    }
    if (u.cols != v.cols) {
        throw DataError("factor rank mismatch: U has " + std::to_string(u.cols) + " columns, V has " +
                        std::to_string(v.cols));
    }
    FactorPair factors(u.rows, v.rows, u.cols);
    std::copy(u.values.begin(), u.values.end(), factors.u_values().begin());
    std::copy(v.values.begin(), v.values.end(), factors.v_values().begin());
    return factors;
}

nlohmann::json to_json(const RunManifest& m) {
    return {
        {"version", m.version},
        {"status", m.status},
        {"started_at", m.started_at},
        {"finished_at", m.finished_at},
        {"config", m.config},
        {"normalization",
         {{"mode", std::string(normalization_name(m.normalization.mode))},
          {"offset", m.normalization.offset},
          {"scale", m.normalization.scale}}},
        {"final", {{"test", eval_json(m.test)}, {"train", eval_json(m.train)}}},
        {"epochs_run", m.epochs_run},
        {"converged", m.converged},
        {"reports", m.report_path},
        {"timings", m.timing_path},
    };
}

RunManifest manifest_from_json(const nlohmann::json& j) {
    try {
        RunManifest m;
        m.version = j.at("version").get<std::string>();
        m.status = j.value("status", std::string("ok"));
        m.started_at = j.value("started_at", std::string());
        m.finished_at = j.value("finished_at", std::string());
        m.config = j.at("config");
        const auto& n = j.at("normalization");
        m.normalization.mode = parse_normalization(n.at("mode").get<std::string>());
        m.normalization.offset = n.at("offset").get<double>();
        m.normalization.scale = n.at("scale").get<double>();
        if (j.contains("final")) {
            m.test = eval_from_json(j.at("final").at("test"));
            m.train = eval_from_json(j.at("final").at("train"));
        }
        m.epochs_run = j.value("epochs_run", std::size_t{0});
        m.converged = j.value("converged", false);
        m.report_path = j.value("reports", std::string(kReportFile));
        m.timing_path = j.value("timings", std::string(kTimingFile));
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid manifest: ") + e.what());
    }
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
    auto out = open_truncated(path);
    out << to_json(manifest).dump(2) << '\n';
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid JSON in '" + path.string() + "': " + e.what());
    }
}

RunManifest read_manifest(const std::filesystem::path& path) { return manifest_from_json(read_json_file(path)); }

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buffer[32];
    std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buffer;
}

}  // namespace pidlf
