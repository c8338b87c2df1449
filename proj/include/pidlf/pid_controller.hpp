#pragma once

#include <cstddef>
#include <span>

#include "pidlf/accounting.hpp"

namespace pidlf {

/// Controller gains and the clip range for the produced coefficient.
struct PidGains {
    double kp = 0.0;
    double ki = 0.0;
    double kd = 0.0;
    double lambda_min = 0.0;
    double lambda_max = 0.0;

    /// Throws UsageError unless all gains are finite and >= 0 and
    /// 0 <= lambda_min <= lambda_max.
    void validate() const;

    bool operator==(const PidGains&) const = default;
};

/// Controller memory for a single observed entry. Padded to 32 bytes so a
/// record never straddles a cache line.
struct alignas(32) EntryPidState {
    double integral = 0.0;    // sum of every residual fed so far, left to right
    double prev_error = 0.0;  // residual from the previous step, 0 before the first
    double lambda = 0.0;      // last clipped output

    bool operator==(const EntryPidState&) const = default;
};

/// What the controller sees as its error signal.
enum class ControlInput {
    signed_residual,    // e = r - <U_i, V_j>
    absolute_residual,  // |e|
};

/// kp e + ki (integral + e) + kd (e - prev_error). The running sum is taken
/// inclusive of the current error. Does not touch `state`.
double pid_raw(const PidGains& gains, const EntryPidState& state, double error);

/// Clamp to [lambda_min, lambda_max].
inline double clip_lambda(double raw, const PidGains& gains) {
    return raw < gains.lambda_min ? gains.lambda_min : (raw > gains.lambda_max ? gains.lambda_max : raw);
}

/// Evaluate, clip, then commit: integral += e, prev_error = e, lambda = clipped.
double pid_step(const PidGains& gains, EntryPidState& state, double error);

/// One EntryPidState per observed training entry, indexed like the entry list.
class PidTable {
public:
    PidTable(std::size_t entries, const PidGains& gains);

    EntryPidState& operator[](std::size_t index) { return states_[index]; }
    const EntryPidState& operator[](std::size_t index) const { return states_[index]; }
    std::size_t size() const { return states_.size(); }
    std::span<const EntryPidState> states() const { return states_; }

    /// Arithmetic mean of the per-entry coefficients.
    double mean_lambda() const;

private:
    TrackedVector<EntryPidState, Ledger::pid_state> states_;
};

}  // namespace pidlf
