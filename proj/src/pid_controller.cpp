#include "pidlf/pid_controller.hpp"

#include <cmath>

#include "pidlf/errors.hpp"
#include "pidlf/summation.hpp"

namespace pidlf {

void PidGains::validate() const {
    auto ok = [](double x) { return std::isfinite(x) && x >= 0.0; };
    if (!ok(kp) || !ok(ki) || !ok(kd)) {
        throw UsageError("PID gains must be finite and non-negative");
    }
    if (!ok(lambda_min) || !ok(lambda_max)) {
        throw UsageError("lambda bounds must be finite and non-negative");
    }
    // Equal bounds are accepted: they pin the coefficient to a constant.
    if (lambda_min > lambda_max) {
        throw UsageError("lambda_min must not exceed lambda_max");
    }
}

double pid_raw(const PidGains& gains, const EntryPidState& state, double error) {
    if (!std::isfinite(error)) {
        throw UsageError("controller input must be finite");
    }
    return gains.kp * error + gains.ki * (state.integral + error) + gains.kd * (error - state.prev_error);
}

double pid_step(const PidGains& gains, EntryPidState& state, double error) {
    const double lambda = clip_lambda(pid_raw(gains, state, error), gains);
    state.integral += error;
    state.prev_error = error;
    state.lambda = lambda;
    return lambda;
}

PidTable::PidTable(std::size_t entries, const PidGains& gains) {
    gains.validate();
    states_.reserve(entries);
    states_.resize(entries, EntryPidState{0.0, 0.0, gains.lambda_min});
}

double PidTable::mean_lambda() const {
    if (states_.empty()) {
        return 0.0;
    }
    CompensatedSum sum;
    for (const auto& s : states_) {
        sum.add(s.lambda);
    }
    return sum.value() / static_cast<double>(states_.size());
}

}  // namespace pidlf
