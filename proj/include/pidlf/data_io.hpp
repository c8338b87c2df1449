#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pidlf/core_model.hpp"

namespace pidlf {

// ---------------------------------------------------------------------------
// Delimited triple files
// ---------------------------------------------------------------------------

/// Shape and delimiter of a triple file, usually stored in a JSON sidecar
/// such as {"m": 100, "n": 50, "delimiter": ","}.
struct TripleHeader {
    std::size_t rows = 0;
    std::size_t cols = 0;
    char delimiter = ',';
};

struct LoadOptions {
    std::optional<std::size_t> rows;  // inferred as max row index + 1 when absent
    std::optional<std::size_t> cols;
    char delimiter = ',';
};

/// Parses "row<d>col<d>value" lines. A first line whose leading field is not
/// an integer is treated as a header. Blank lines are skipped. Throws
/// ParseError naming the line for malformed, non-finite or out-of-range
/// entries, and DuplicateEntryError listing every repeated cell.
ObservedMatrix parse_delimited(std::istream& in, const LoadOptions& options, const std::string& source = "<input>");

/// Throws IoError if the file cannot be opened.
ObservedMatrix load_delimited(const std::filesystem::path& path, const LoadOptions& options);

/// One line per entry, values printed with round-trip precision, no header.
void write_delimited(const std::filesystem::path& path, const ObservedMatrix& matrix, char delimiter = ',');

TripleHeader read_header(const std::filesystem::path& path);
void write_header(const std::filesystem::path& path, const TripleHeader& header);

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

enum class Normalization { none, minmax, zscore };

std::string_view normalization_name(Normalization mode);
Normalization parse_normalization(std::string_view name);

/// x' = (x - offset) / scale.
struct NormalizationParams {
    Normalization mode = Normalization::none;
    double offset = 0.0;
    double scale = 1.0;

    double apply(double x) const { return mode == Normalization::none ? x : (x - offset) / scale; }
    double invert(double x) const { return mode == Normalization::none ? x : x * scale + offset; }
};

struct NormalizedMatrix {
    ObservedMatrix matrix;
    NormalizationParams params;
};

/// minmax maps the observed range onto [0, 1]; zscore uses the mean and the
/// sample standard deviation. Throws DegenerateDataError when all values are
/// equal, UsageError for zscore on a single entry.
NormalizedMatrix normalize(const ObservedMatrix& matrix, Normalization mode);

ObservedMatrix apply_normalization(const ObservedMatrix& matrix, const NormalizationParams& params);
ObservedMatrix denormalize(const ObservedMatrix& matrix, const NormalizationParams& params);

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

struct SplitResult {
    ObservedMatrix train;
    ObservedMatrix test;
};

/// Seeded shuffle of the entries, then the first round(ratio * N) go to
/// train and the rest to test. Throws UsageError if either side is empty.
SplitResult split(const ObservedMatrix& matrix, double ratio, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic planted low-rank data
// ---------------------------------------------------------------------------

struct SyntheticSpec {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t rank = 1;
    double density = 1.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
    std::size_t observed_count() const;

    bool operator==(const SyntheticSpec&) const = default;
};

/// Parses "m=100,n=50,rank=3,density=0.3,noise=0.01[,seed=7]". Unset keys
/// keep the values in `defaults`.
SyntheticSpec parse_synthetic_spec(std::string_view text, const SyntheticSpec& defaults = {});
std::string format_synthetic_spec(const SyntheticSpec& spec);

/// Dense row-major matrix.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

struct SyntheticData {
    ObservedMatrix observed;
    DenseMatrix truth;
};

/// U*, V* uniform on [0, 1), truth = U* V*^T, ceil(density m n) distinct
/// cells observed with additive N(0, sigma^2) noise. Entries are ordered by
/// (row, col).
SyntheticData generate_synthetic(const SyntheticSpec& spec);

void write_dense(const std::filesystem::path& path, const DenseMatrix& matrix, char delimiter = ',');
DenseMatrix read_dense(const std::filesystem::path& path, char delimiter = ',');

/// Round-trip decimal formatting used by every writer.
std::string format_double(double x);

}  // namespace pidlf
