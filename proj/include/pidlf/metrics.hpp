#pragma once

#include <cstddef>
#include <span>

#include "pidlf/core_model.hpp"

namespace pidlf {

struct EvalResult {
    double rmse = 0.0;
    double mae = 0.0;
    std::size_t count = 0;
};

/// RMSE and MAE of the residuals r - <U_i, V_j> over every entry of `test`.
/// Throws UsageError when the shape of `test` differs from the factors.
EvalResult evaluate(const ObservedMatrix& test, const FactorPair& factors);

/// Same statistics over precomputed residuals. Throws UsageError if empty.
EvalResult evaluate_residuals(std::span<const double> residuals);

}  // namespace pidlf
