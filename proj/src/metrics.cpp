#include "pidlf/metrics.hpp"

#include <cmath>
#include <string>

#include "pidlf/errors.hpp"
#include "pidlf/summation.hpp"

namespace pidlf {

namespace {

class ResidualAccumulator {
public:
    void add(double e) {
        squared_.add(e * e);
        absolute_.add(std::fabs(e));
        ++count_;
    }

    EvalResult result() const {
        const auto n = static_cast<double>(count_);
        return {std::sqrt(squared_.value() / n), absolute_.value() / n, count_};
    }

private:
    CompensatedSum squared_;
    CompensatedSum absolute_;
    std::size_t count_ = 0;
};

}  // namespace

EvalResult evaluate(const ObservedMatrix& test, const FactorPair& factors) {
    if (test.rows() != factors.rows() || test.cols() != factors.cols()) {
        throw UsageError("test data shape " + std::to_string(test.rows()) + "x" + std::to_string(test.cols()) +
                         " does not match factors " + std::to_string(factors.rows()) + "x" +
                         std::to_string(factors.cols()));
    }
    ResidualAccumulator acc;
    for (const auto& entry : test.entries()) {
        acc.add(entry.value - dot(factors.u_row(entry.row), factors.v_row(entry.col)));
    }
    return acc.result();
}

EvalResult evaluate_residuals(std::span<const double> residuals) {
    if (residuals.empty()) {
        throw UsageError("cannot evaluate an empty residual set");
    }
    ResidualAccumulator acc;
    for (double e : residuals) {
        acc.add(e);
    }
    return acc.result();
}

}  // namespace pidlf
