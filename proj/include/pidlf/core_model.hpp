#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pidlf/accounting.hpp"

namespace pidlf {

/// Row and column indices are 32-bit; shapes above 2^32 - 1 are rejected.
using Index = std::uint32_t;

struct ObservedEntry {
    Index row = 0;
    Index col = 0;
    double value = 0.0;

    bool operator==(const ObservedEntry&) const = default;
};

/// Sparse set of observed cells of an m x n matrix. Every (row, col) pair
/// appears at most once, all values are finite, and the set is non-empty.
class ObservedMatrix {
public:
    /// Validates bounds, finiteness and uniqueness; throws UsageError or
    /// DuplicateEntryError.
    ObservedMatrix(std::size_t rows, std::size_t cols, std::vector<ObservedEntry> entries);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return entries_.size(); }
    std::span<const ObservedEntry> entries() const { return entries_; }
    const ObservedEntry& operator[](std::size_t index) const { return entries_[index]; }

    bool operator==(const ObservedMatrix&) const = default;

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<ObservedEntry> entries_;
};

/// Latent matrices U (rows x rank) and V (cols x rank), stored row-major.
class FactorPair {
public:
    /// Zero-filled; throws UsageError on a zero dimension.
    FactorPair(std::size_t rows, std::size_t cols, std::size_t rank);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t rank() const { return rank_; }

    std::span<double> u_row(std::size_t i) { return {u_.data() + i * rank_, rank_}; }
    std::span<const double> u_row(std::size_t i) const { return {u_.data() + i * rank_, rank_}; }
    std::span<double> v_row(std::size_t j) { return {v_.data() + j * rank_, rank_}; }
    std::span<const double> v_row(std::size_t j) const { return {v_.data() + j * rank_, rank_}; }

    std::span<double> u_values() { return u_; }
    std::span<const double> u_values() const { return u_; }
    std::span<double> v_values() { return v_; }
    std::span<const double> v_values() const { return v_; }

    bool all_finite() const;

    bool operator==(const FactorPair&) const = default;

private:
    std::size_t rows_;
    std::size_t cols_;
    std::size_t rank_;
    TrackedVector<double, Ledger::factors> u_;
    TrackedVector<double, Ledger::factors> v_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        sum += a[d] * b[d];
    }
    return sum;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

/// <U_i, V_j>. Throws UsageError when (i, j) is outside the factor shape.
double predict(const FactorPair& factors, std::size_t i, std::size_t j);

/// observed - predict(factors, i, j).
double residual(double observed, const FactorPair& factors, std::size_t i, std::size_t j);

/// Per-sample objective e^2 + lambda (|U_i|^2 + |V_j|^2). Its gradient with
/// respect to (U_i, V_j) is the per-sample update direction used in training.
double sample_loss(double observed, const FactorPair& factors, std::size_t i, std::size_t j, double lambda);

/// Sum of squared residuals over `data` plus lambda (|U|_F^2 + |V|_F^2).
double total_loss(const ObservedMatrix& data, const FactorPair& factors, double lambda);

/// Entries drawn independently and uniformly from [0.01, 0.1).
FactorPair init_factors(std::size_t rows, std::size_t cols, std::size_t rank, std::uint64_t seed);

}  // namespace pidlf
