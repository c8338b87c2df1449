#include "pidlf/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pidlf/errors.hpp"
#include "pidlf/rng.hpp"

namespace pidlf {

namespace {

constexpr double kInitLow = 0.01;
constexpr double kInitHigh = 0.1;

std::string cell(std::size_t row, std::size_t col) {
    return "(" + std::to_string(row) + ", " + std::to_string(col) + ")";
}

void check_index(const FactorPair& factors, std::size_t i, std::size_t j) {
    if (i >= factors.rows() || j >= factors.cols()) {
        throw UsageError("index " + cell(i, j) + " outside factor shape " +
                         std::to_string(factors.rows()) + "x" + std::to_string(factors.cols()));
    }
}

}  // namespace

ObservedMatrix::ObservedMatrix(std::size_t rows, std::size_t cols, std::vector<ObservedEntry> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (rows_ == 0 || cols_ == 0) {
        throw UsageError("observed matrix needs at least one row and one column");
    }
    if (rows_ > std::numeric_limits<Index>::max() || cols_ > std::numeric_limits<Index>::max()) {
        throw UsageError("observed matrix shape exceeds 32-bit indices");
    }
    if (entries_.empty()) {
        throw UsageError("observed matrix needs at least one entry");
    }
    std::vector<std::uint64_t> keys;
    keys.reserve(entries_.size());
    for (const auto& e : entries_) {
        if (e.row >= rows_ || e.col >= cols_) {
            throw UsageError("entry " + cell(e.row, e.col) + " outside declared shape " +
                             std::to_string(rows_) + "x" + std::to_string(cols_));
        }
        if (!std::isfinite(e.value)) {
            throw UsageError("entry " + cell(e.row, e.col) + " has a non-finite value");
        }
        keys.push_back(static_cast<std::uint64_t>(e.row) * cols_ + e.col);
    }
    std::sort(keys.begin(), keys.end());
    const auto dup = std::adjacent_find(keys.begin(), keys.end());
    if (dup != keys.end()) {
        throw DuplicateEntryError("duplicate observation at " + cell(*dup / cols_, *dup % cols_));
    }
}

FactorPair::FactorPair(std::size_t rows, std::size_t cols, std::size_t rank)
    : rows_(rows), cols_(cols), rank_(rank) {
    if (rows == 0 || cols == 0 || rank == 0) {
        throw UsageError("factor dimensions must be positive");
    }
    u_.assign(rows * rank, 0.0);
    v_.assign(cols * rank, 0.0);
}

bool FactorPair::all_finite() const {
    auto finite = [](double x) { return std::isfinite(x); };
    return std::all_of(u_.begin(), u_.end(), finite) && std::all_of(v_.begin(), v_.end(), finite);
}

double predict(const FactorPair& factors, std::size_t i, std::size_t j) {
    check_index(factors, i, j);
    return dot(factors.u_row(i), factors.v_row(j));
}

double residual(double observed, const FactorPair& factors, std::size_t i, std::size_t j) {
    return observed - predict(factors, i, j);
}

double sample_loss(double observed, const FactorPair& factors, std::size_t i, std::size_t j, double lambda) {
    if (!(lambda >= 0.0)) {
        throw UsageError("regularization coefficient must be non-negative");
    }
    const double e = residual(observed, factors, i, j);
    return e * e + lambda * (squared_norm(factors.u_row(i)) + squared_norm(factors.v_row(j)));
}

double total_loss(const ObservedMatrix& data, const FactorPair& factors, double lambda) {
    if (!(lambda >= 0.0)) {
        throw UsageError("regularization coefficient must be non-negative");
    }
    double fit = 0.0;
    for (const auto& entry : data.entries()) {
        const double e = residual(entry.value, factors, entry.row, entry.col);
        fit += e * e;
    }
    return fit + lambda * (squared_norm(factors.u_values()) + squared_norm(factors.v_values()));
}

FactorPair init_factors(std::size_t rows, std::size_t cols, std::size_t rank, std::uint64_t seed) {
    FactorPair factors(rows, cols, rank);
    Rng rng(seed);
    for (double& x : factors.u_values()) {
        x = rng.uniform(kInitLow, kInitHigh);
    }
    for (double& x : factors.v_values()) {
        x = rng.uniform(kInitLow, kInitHigh);
    }
    return factors;
}

}  // namespace pidlf
