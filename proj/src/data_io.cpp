#include "pidlf/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "pidlf/errors.hpp"
#include "pidlf/rng.hpp"
#include "pidlf/summation.hpp"

namespace pidlf {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delimiter, start);
        fields.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return fields;
}

template <class T>
bool parse_number(std::string_view text, T& out) {
    if (text.empty()) {
        return false;
    }
    if constexpr (std::is_floating_point_v<T>) {
        // from_chars rejects a leading '+', which some exporters emit.
        if (text.front() == '+') {
            text.remove_prefix(1);
        }
    }
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "' for reading");
    }
    return in;
}

}  // namespace

std::string format_double(double x) {
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), x);
    return std::string(buffer, ptr);
}

ObservedMatrix parse_delimited(std::istream& in, const LoadOptions& options, const std::string& source) {
    struct Parsed {
        ObservedEntry entry;
        std::size_t line;
    };
    std::vector<Parsed> parsed;
    std::string line;
    std::size_t line_no = 0;
    bool seen_content = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty()) {
            continue;
        }
        const auto fields = split_fields(text, options.delimiter);
        std::size_t row = 0;
        if (!seen_content) {
            seen_content = true;
            if (!parse_number(fields[0], row)) {
                continue;  // header line
            }
        }
        if (fields.size() != 3) {
            throw ParseError(source, line_no, "expected 3 fields, found " + std::to_string(fields.size()));
        }
        std::size_t col = 0;
        double value = 0.0;
        if (!parse_number(fields[0], row) || !parse_number(fields[1], col)) {
            throw ParseError(source, line_no, "row and column must be non-negative integers");
        }
        if (!parse_number(fields[2], value)) {
            throw ParseError(source, line_no, "cannot parse value '" + std::string(fields[2]) + "'");
        }
        if (!std::isfinite(value)) {
            throw ParseError(source, line_no, "non-finite value '" + std::string(fields[2]) + "'");
        }
        if ((options.rows && row >= *options.rows) || (options.cols && col >= *options.cols)) {
            throw ParseError(source, line_no,
                             "index (" + std::to_string(row) + ", " + std::to_string(col) +
                                 ") outside declared shape " +
                                 (options.rows ? std::to_string(*options.rows) : std::string("?")) + "x" +
                                 (options.cols ? std::to_string(*options.cols) : std::string("?")));
        }
        if (col > 0xFFFFFFFFULL || row > 0xFFFFFFFFULL) {
            throw ParseError(source, line_no, "index too large");
        }
        parsed.push_back({{static_cast<Index>(row), static_cast<Index>(col), value}, line_no});
    }
    if (parsed.empty()) {
        throw ParseError(source, line_no, "no entries found");
    }

    std::unordered_map<std::uint64_t, std::size_t> first_line;
    first_line.reserve(parsed.size());
    std::string duplicates;
    std::size_t duplicate_count = 0;
    std::size_t max_row = 0;
    std::size_t max_col = 0;
    for (const auto& p : parsed) {
        const std::uint64_t key = (static_cast<std::uint64_t>(p.entry.row) << 32) | p.entry.col;
        const auto [it, inserted] = first_line.emplace(key, p.line);
        if (!inserted) {
            if (duplicate_count < 20) {
                duplicates += "\n  (" + std::to_string(p.entry.row) + ", " + std::to_string(p.entry.col) +
                              ") at lines " + std::to_string(it->second) + " and " + std::to_string(p.line);
            }
            ++duplicate_count;
        }
        max_row = std::max<std::size_t>(max_row, p.entry.row);
        max_col = std::max<std::size_t>(max_col, p.entry.col);
    }
    if (duplicate_count > 0) {
        throw DuplicateEntryError(source + ": " + std::to_string(duplicate_count) + " duplicate entr" +
                                  (duplicate_count == 1 ? "y" : "ies") + duplicates);
    }

    std::vector<ObservedEntry> entries;
    entries.reserve(parsed.size());
    for (const auto& p : parsed) {
        entries.push_back(p.entry);
    }
    return ObservedMatrix(options.rows.value_or(max_row + 1), options.cols.value_or(max_col + 1), std::move(entries));
}

ObservedMatrix load_delimited(const std::filesystem::path& path, const LoadOptions& options) {
    auto in = open_for_read(path);
    return parse_delimited(in, options, path.string());
}

void write_delimited(const std::filesystem::path& path, const ObservedMatrix& matrix, char delimiter) {
    auto out = open_for_write(path);
    for (const auto& e : matrix.entries()) {
        out << e.row << delimiter << e.col << delimiter << format_double(e.value) << '\n';
    }
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

TripleHeader read_header(const std::filesystem::path& path) {
    auto in = open_for_read(path);
    nlohmann::json j;
    try {
        in >> j;
        TripleHeader header;
        header.rows = j.at("m").get<std::size_t>();
        header.cols = j.at("n").get<std::size_t>();
        if (j.contains("delimiter")) {
            const auto d = j.at("delimiter").get<std::string>();
            if (d.size() != 1) {
                throw DataError("delimiter must be a single character");
            }
            header.delimiter = d[0];
        }
        return header;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid header file '" + path.string() + "': " + e.what());
    }
}

void write_header(const std::filesystem::path& path, const TripleHeader& header) {
    nlohmann::json j{{"m", header.rows}, {"n", header.cols}, {"delimiter", std::string(1, header.delimiter)}};
    auto out = open_for_write(path);
    out << j.dump(2) << '\n';
}

std::string_view normalization_name(Normalization mode) {
    switch (mode) {
        case Normalization::none:
            return "none";
        case Normalization::minmax:
            return "minmax";
        case Normalization::zscore:
            return "zscore";
    }
    return "none";
}

Normalization parse_normalization(std::string_view name) {
    for (auto mode : {Normalization::none, Normalization::minmax, Normalization::zscore}) {
        if (normalization_name(mode) == name) {
            return mode;
        }
    }
    throw UsageError("unknown normalization '" + std::string(name) + "' (expected none, minmax or zscore)");
}

NormalizedMatrix normalize(const ObservedMatrix& matrix, Normalization mode) {
    NormalizationParams params;
    params.mode = mode;
    const auto entries = matrix.entries();
    switch (mode) {
        case Normalization::none:
            return {matrix, params};
        case Normalization::minmax: {
            const auto [lo, hi] = std::minmax_element(entries.begin(), entries.end(),
                                                      [](const auto& a, const auto& b) { return a.value < b.value; });
            if (!(hi->value > lo->value)) {
                throw DegenerateDataError("min-max normalization needs at least two distinct values");
            }
            params.offset = lo->value;
            params.scale = hi->value - lo->value;
            break;
        }
        case Normalization::zscore: {
            if (entries.size() < 2) {
                throw UsageError("z-score normalization needs at least two entries");
            }
            CompensatedSum sum;
            for (const auto& e : entries) {
                sum.add(e.value);
            }
            const double mean = sum.value() / static_cast<double>(entries.size());
            CompensatedSum squares;
            for (const auto& e : entries) {
                squares.add((e.value - mean) * (e.value - mean));
            }
            const double stdev = std::sqrt(squares.value() / static_cast<double>(entries.size() - 1));
            if (!(stdev > 0.0)) {
                throw DegenerateDataError("z-score normalization needs at least two distinct values");
            }
            params.offset = mean;
            params.scale = stdev;
            break;
        }
    }
    return {apply_normalization(matrix, params), params};
}

ObservedMatrix apply_normalization(const ObservedMatrix& matrix, const NormalizationParams& params) {
    std::vector<ObservedEntry> entries(matrix.entries().begin(), matrix.entries().end());
    for (auto& e : entries) {
        e.value = params.apply(e.value);
    }
    return ObservedMatrix(matrix.rows(), matrix.cols(), std::move(entries));
}

ObservedMatrix denormalize(const ObservedMatrix& matrix, const NormalizationParams& params) {
    std::vector<ObservedEntry> entries(matrix.entries().begin(), matrix.entries().end());
    for (auto& e : entries) {
        e.value = params.invert(e.value);
    }
    return ObservedMatrix(matrix.rows(), matrix.cols(), std::move(entries));
}

SplitResult split(const ObservedMatrix& matrix, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw UsageError("split ratio must lie strictly between 0 and 1");
    }
    const std::size_t total = matrix.size();
    const auto train_count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(total)));
    if (train_count == 0 || train_count >= total) {
        throw UsageError("split of " + std::to_string(total) + " entries at ratio " + format_double(ratio) +
                         " leaves one side empty");
    }
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>{order});

    std::vector<ObservedEntry> train;
    std::vector<ObservedEntry> test;
    train.reserve(train_count);
    test.reserve(total - train_count);
    for (std::size_t k = 0; k < total; ++k) {
        (k < train_count ? train : test).push_back(matrix[order[k]]);
    }
    return {ObservedMatrix(matrix.rows(), matrix.cols(), std::move(train)),
            ObservedMatrix(matrix.rows(), matrix.cols(), std::move(test))};
}

std::size_t SyntheticSpec::observed_count() const {
    // The small slack keeps products such as 0.3 * 5000 from rounding up.
    const double cells = density * static_cast<double>(rows) * static_cast<double>(cols);
    return static_cast<std::size_t>(std::ceil(cells - 1e-9));
}

void SyntheticSpec::validate() const {
    if (rows == 0 || cols == 0) {
        throw UsageError("synthetic matrix needs m >= 1 and n >= 1");
    }
    if (rank == 0 || rank > std::min(rows, cols)) {
        throw UsageError("synthetic rank must lie in [1, min(m, n)]");
    }
    if (!(density > 0.0 && density <= 1.0)) {
        throw UsageError("synthetic density must lie in (0, 1]");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
        throw UsageError("synthetic noise must be finite and non-negative");
    }
    if (observed_count() < 1) {
        throw UsageError("synthetic spec observes no entries");
    }
}

SyntheticSpec parse_synthetic_spec(std::string_view text, const SyntheticSpec& defaults) {
    SyntheticSpec spec = defaults;
    for (const auto field : split_fields(text, ',')) {
        if (field.empty()) {
            continue;
        }
        const auto eq = field.find('=');
        if (eq == std::string_view::npos) {
            throw UsageError("synthetic spec field '" + std::string(field) + "' is not key=value");
        }
        const auto key = trim(field.substr(0, eq));
        const auto value = trim(field.substr(eq + 1));
        bool ok = false;
        if (key == "m") {
            ok = parse_number(value, spec.rows);
        } else if (key == "n") {
            ok = parse_number(value, spec.cols);
        } else if (key == "rank") {
            ok = parse_number(value, spec.rank);
        } else if (key == "density") {
            ok = parse_number(value, spec.density);
        } else if (key == "noise") {
            ok = parse_number(value, spec.noise_sigma);
        } else if (key == "seed") {
            ok = parse_number(value, spec.seed);
        } else {
            throw UsageError("unknown synthetic spec key '" + std::string(key) + "'");
        }
        if (!ok) {
            throw UsageError("bad value for synthetic spec key '" + std::string(key) + "'");
        }
    }
    return spec;
}

std::string format_synthetic_spec(const SyntheticSpec& spec) {
    return "m=" + std::to_string(spec.rows) + ",n=" + std::to_string(spec.cols) + ",rank=" + std::to_string(spec.rank) +
           ",density=" + format_double(spec.density) + ",noise=" + format_double(spec.noise_sigma) +
           ",seed=" + std::to_string(spec.seed);
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const std::size_t m = spec.rows;
    const std::size_t n = spec.cols;
    const std::size_t r = spec.rank;
    Rng rng(spec.seed);

    std::vector<double> left(m * r);
    std::vector<double> right(n * r);
    for (double& x : left) {
        x = rng.uniform();
    }
    for (double& x : right) {
        x = rng.uniform();
    }
    DenseMatrix truth{m, n, std::vector<double>(m * n)};
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double sum = 0.0;
            for (std::size_t d = 0; d < r; ++d) {
                sum += left[i * r + d] * right[j * r + d];
            }
            truth.values[i * n + j] = sum;
        }
    }

    // Partial Fisher-Yates over all cells picks `count` distinct ones.
    const std::size_t count = spec.observed_count();
    std::vector<std::size_t> cells(m * n);
    std::iota(cells.begin(), cells.end(), std::size_t{0});
    for (std::size_t k = 0; k < count && k + 1 < cells.size(); ++k) {
        const auto pick = k + static_cast<std::size_t>(rng.below(cells.size() - k));
        std::swap(cells[k], cells[pick]);
    }
    cells.resize(count);
    std::sort(cells.begin(), cells.end());

    std::vector<ObservedEntry> entries;
    entries.reserve(count);
    for (const std::size_t cell : cells) {
        const std::size_t i = cell / n;
        const std::size_t j = cell % n;
        const double noise = spec.noise_sigma > 0.0 ? spec.noise_sigma * rng.normal() : 0.0;
        entries.push_back({static_cast<Index>(i), static_cast<Index>(j), truth.values[cell] + noise});
    }
    return {ObservedMatrix(m, n, std::move(entries)), std::move(truth)};
}

void write_dense(const std::filesystem::path& path, const DenseMatrix& matrix, char delimiter) {
    auto out = open_for_write(path);
    for (std::size_t i = 0; i < matrix.rows; ++i) {
        for (std::size_t j = 0; j < matrix.cols; ++j) {
            if (j > 0) {
                out << delimiter;
            }
            out << format_double(matrix(i, j));
        }
        out << '\n';
    }
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

DenseMatrix read_dense(const std::filesystem::path& path, char delimiter) {
    auto in = open_for_read(path);
    DenseMatrix matrix;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto text = trim(line);
        if (text.empty()) {
            continue;
        }
        const auto fields = split_fields(text, delimiter);
        if (matrix.rows == 0) {
            matrix.cols = fields.size();
        } else if (fields.size() != matrix.cols) {
            throw ParseError(path.string(), line_no,
                             "expected " + std::to_string(matrix.cols) + " columns, found " +
                                 std::to_string(fields.size()));
        }
        for (const auto f : fields) {
            double x = 0.0;
            if (!parse_number(f, x) || !std::isfinite(x)) {
                throw ParseError(path.string(), line_no, "bad matrix value '" + std::string(f) + "'");
            }
            matrix.values.push_back(x);
        }
        ++matrix.rows;
    }
    return matrix;
}

}  // namespace pidlf
