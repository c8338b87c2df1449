#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pidlf/accounting.hpp"
#include "pidlf/core_model.hpp"
#include "pidlf/pid_controller.hpp"

namespace pidlf {

// `sgd` is plain fixed-lambda SGD, the reference every other trainer is
// compared against. The remaining fixed-lambda kinds are the accelerated
// baselines.
enum class Optimizer { lambda_opt, sgd, momentum, nesterov, adam, nadam };

std::string_view optimizer_name(Optimizer optimizer);

/// Throws UsageError for unknown names.
Optimizer parse_optimizer(std::string_view name);

inline constexpr Optimizer kAllOptimizers[] = {Optimizer::lambda_opt, Optimizer::sgd,  Optimizer::momentum,
                                               Optimizer::nesterov,   Optimizer::adam, Optimizer::nadam};

/// Constants of the accelerated baselines.
struct BaselineSettings {
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainConfig {
    Optimizer optimizer = Optimizer::lambda_opt;
    double eta = 5e-2;
    std::size_t rank = 3;
    std::size_t max_epochs = 100;
    std::uint64_t seed = 0;
    std::optional<double> fixed_lambda;  // consumed by every optimizer except lambda_opt
    std::optional<PidGains> gains;       // consumed by lambda_opt only
    ControlInput control_input = ControlInput::signed_residual;
    bool shuffle = true;
    double convergence_eps = 1e-5;
    std::size_t patience = 5;
    BaselineSettings baseline;
    double divergence_limit = 1e6;

    /// Throws UsageError when a field is out of range or the parameter the
    /// selected optimizer consumes is missing.
    void validate() const;
};

struct EpochReport {
    std::size_t epoch = 0;
    double train_rmse = 0.0;
    double valid_rmse = 0.0;
    double valid_mae = 0.0;
    double mean_lambda = 0.0;
    std::int64_t wall_time_ms = 0;  // whole epoch including evaluation
    double epoch_seconds = 0.0;     // same span, full resolution
    double pass_seconds = 0.0;      // the SGD pass over the training entries only
};

/// Per-row auxiliary buffers for the accelerated baselines. `first` holds the
/// velocity (momentum, nesterov) or first moment (adam, nadam); `second` holds
/// the second moment. Step counters are per row and only advance when that
/// row receives an update.
class OptimizerState {
public:
    OptimizerState(Optimizer optimizer, std::size_t rows, std::size_t cols, std::size_t rank);

    std::span<double> first_u(std::size_t i) { return row(first_u_, i); }
    std::span<double> first_v(std::size_t j) { return row(first_v_, j); }
    std::span<double> second_u(std::size_t i) { return row(second_u_, i); }
    std::span<double> second_v(std::size_t j) { return row(second_v_, j); }
    std::uint64_t& steps_u(std::size_t i) { return steps_u_[i]; }
    std::uint64_t& steps_v(std::size_t j) { return steps_v_[j]; }

    std::size_t buffer_values() const { return first_u_.size() + first_v_.size() + second_u_.size() + second_v_.size(); }

    bool operator==(const OptimizerState&) const = default;

private:
    using Buffer = TrackedVector<double, Ledger::optimizer>;

    std::span<double> row(Buffer& buffer, std::size_t index) {
        return buffer.empty() ? std::span<double>{} : std::span<double>{buffer.data() + index * rank_, rank_};
    }

    std::size_t rank_;
    Buffer first_u_;
    Buffer first_v_;
    Buffer second_u_;
    Buffer second_v_;
    std::vector<std::uint64_t> steps_u_;
    std::vector<std::uint64_t> steps_v_;
};

struct SampleGradient {
    std::vector<double> u;
    std::vector<double> v;
};

/// Gradient of sample_loss with respect to U_i and V_j:
///   gU_i = -2 e V_j + 2 lambda U_i,  gV_j = -2 e U_i + 2 lambda V_j.
SampleGradient grad_sample(const FactorPair& factors, std::size_t i, std::size_t j, double error, double lambda);

/// U_i -= eta gU_i, V_j -= eta gV_j.
void sgd_apply(FactorPair& factors, std::size_t i, std::size_t j, std::span<const double> grad_u,
               std::span<const double> grad_v, double eta);

// Row-level update rules for the baselines, exposed for direct testing.

/// velocity = beta velocity + grad; params -= eta velocity.
void momentum_update(std::span<double> params, std::span<const double> grad, std::span<double> velocity, double eta,
                     double beta);

/// Bias-corrected Adam step at 1-based `step`. With `nesterov` set the
/// first-moment term is the Nadam lookahead blend.
void adam_update(std::span<double> params, std::span<const double> grad, std::span<double> first,
                 std::span<double> second, std::uint64_t step, double eta, const BaselineSettings& settings,
                 bool nesterov);

/// Work buffers reused across steps so that a step does not allocate.
struct StepScratch {
    explicit StepScratch(std::size_t rank) : grad_u(rank), grad_v(rank), ahead_u(rank), ahead_v(rank) {}

    std::vector<double> grad_u;
    std::vector<double> grad_v;
    std::vector<double> ahead_u;
    std::vector<double> ahead_v;
};

/// One adaptive-lambda step on `entry`: residual, controller update, gradient,
/// SGD update. Returns the coefficient used. Touches only U_i, V_j and `state`.
double lambda_opt_step(FactorPair& factors, EntryPidState& state, const PidGains& gains, ControlInput input,
                       const ObservedEntry& entry, double eta, StepScratch& scratch);

/// One fixed-lambda step with the configured optimizer. Touches only U_i,
/// V_j and the matching rows of `state`.
void baseline_step(FactorPair& factors, OptimizerState& state, const TrainConfig& config, const ObservedEntry& entry,
                   StepScratch& scratch);

/// Called once per finished epoch, before the convergence check.
using EpochObserver = std::function<void(const EpochReport&)>;

struct TrainResult {
    FactorPair factors;
    std::vector<EpochReport> reports;
    bool converged = false;

    std::size_t epochs_run() const { return reports.size(); }
};

/// Adaptive-lambda training. Throws UsageError on bad input and
/// DivergenceError when a factor entry leaves the finite safe range.
TrainResult train_lambda_opt(const ObservedMatrix& train, const ObservedMatrix& valid, const TrainConfig& config,
                             const EpochObserver& observer = {});

/// Fixed-lambda training with sgd, momentum, nesterov, adam or nadam.
TrainResult train_baseline(const ObservedMatrix& train, const ObservedMatrix& valid, const TrainConfig& config,
                           const EpochObserver& observer = {});

/// Dispatches on config.optimizer.
TrainResult train(const ObservedMatrix& train, const ObservedMatrix& valid, const TrainConfig& config,
                  const EpochObserver& observer = {});

/// True once valid_rmse improved by less than `eps` on each of the last
/// `patience` epochs.
bool check_convergence(std::span<const EpochReport> reports, double eps, std::size_t patience);

/// Named hyperparameter sets for the two power-load datasets.
struct Preset {
    std::string_view name;
    double eta;
    double lambda;
    double kp;
    double ki;
    double kd;
};

inline constexpr Preset kUkdalePreset{"ukdale", 5e-2, 9e-4, 5e-2, 5e-4, 5e-4};
inline constexpr Preset kIawePreset{"iawe", 5e-2, 5e-4, 5e-3, 5e-4, 5e-5};

std::optional<Preset> find_preset(std::string_view name);

/// Gains of a preset with the default clip range [0, 2 lambda].
PidGains preset_gains(const Preset& preset);

}  // namespace pidlf
