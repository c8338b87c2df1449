#include "pidlf/trainers.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "pidlf/errors.hpp"
#include "pidlf/metrics.hpp"
#include "pidlf/rng.hpp"

namespace pidlf {

namespace {

// Keeps the visit-order stream independent of the factor initialization stream.
constexpr std::uint64_t kShuffleStream = 0x9E3779B97F4A7C15ULL;

void compute_gradient(std::span<const double> u, std::span<const double> v, double error, double lambda,
                      std::span<double> grad_u, std::span<double> grad_v) {
    for (std::size_t d = 0; d < u.size(); ++d) {
        grad_u[d] = -2.0 * error * v[d] + 2.0 * lambda * u[d];
        grad_v[d] = -2.0 * error * u[d] + 2.0 * lambda * v[d];
    }
}

void descend(std::span<double> params, std::span<const double> grad, double eta) {
    for (std::size_t d = 0; d < params.size(); ++d) {
        params[d] -= eta * grad[d];
    }
}

bool row_out_of_range(std::span<const double> row, double limit) {
    for (double x : row) {
        if (!(std::fabs(x) <= limit)) {
            return true;
        }
    }
    return false;
}

void check_shapes(const ObservedMatrix& train, const ObservedMatrix& valid) {
    if (train.rows() != valid.rows() || train.cols() != valid.cols()) {
        throw UsageError("training and validation data must share the same shape");
    }
}

inline void prefetch(const void* address) {
#if defined(__GNUC__)
    __builtin_prefetch(address);
#else
    (void)address;
#endif
}

// Entries are visited in shuffled order, so every step gathers from random
// positions of the entry list and the per-entry state. Loads are issued this
// many steps ahead; factor rows of an entry are requested half as far ahead,
// once the entry itself is likely resident.
constexpr std::size_t kPrefetchDistance = 16;

template <class Step, class PrefetchState, class MeanLambda>
TrainResult run_epochs(const ObservedMatrix& train, const ObservedMatrix& valid, const TrainConfig& config,
                       FactorPair factors, Step&& step, PrefetchState&& prefetch_state, MeanLambda&& mean_lambda,
                       const EpochObserver& observer) {
    using Clock = std::chrono::steady_clock;

    if (train.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw UsageError("training set exceeds 2^32 - 1 entries");
    }
    std::vector<std::uint32_t> order(train.size());
    std::iota(order.begin(), order.end(), std::uint32_t{0});
    Rng order_rng(config.seed ^ kShuffleStream);

    TrainResult result{std::move(factors), {}, false};
    result.reports.reserve(config.max_epochs);
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto epoch_start = Clock::now();
        if (config.shuffle) {
            order_rng.shuffle(std::span<std::uint32_t>{order});
        }
        const std::size_t count = order.size();
        for (std::size_t k = 0; k < count; ++k) {
            if (k + kPrefetchDistance < count) {
                prefetch(&train[order[k + kPrefetchDistance]]);
                prefetch_state(order[k + kPrefetchDistance]);
            }
            if (k + kPrefetchDistance / 2 < count) {
                const ObservedEntry& ahead = train[order[k + kPrefetchDistance / 2]];
                prefetch(result.factors.u_row(ahead.row).data());
                prefetch(result.factors.v_row(ahead.col).data());
            }
            const std::size_t index = order[k];
            const ObservedEntry& entry = train[index];
            step(result.factors, index, entry);
            if (row_out_of_range(result.factors.u_row(entry.row), config.divergence_limit) ||
                row_out_of_range(result.factors.v_row(entry.col), config.divergence_limit)) {
                throw DivergenceError(epoch, entry.row, entry.col,
                                      "factor entry non-finite or above " + std::to_string(config.divergence_limit));
            }
        }
        const auto pass_end = Clock::now();

        EpochReport report;
        report.epoch = epoch;
        report.train_rmse = evaluate(train, result.factors).rmse;
        const EvalResult held_out = evaluate(valid, result.factors);
        report.valid_rmse = held_out.rmse;
        report.valid_mae = held_out.mae;
        report.mean_lambda = mean_lambda();
        const auto epoch_end = Clock::now();
        report.pass_seconds = std::chrono::duration<double>(pass_end - epoch_start).count();
        report.epoch_seconds = std::chrono::duration<double>(epoch_end - epoch_start).count();
        report.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(epoch_end - epoch_start).count();
        result.reports.push_back(report);
        if (observer) {
            observer(report);
        }
        if (check_convergence(result.reports, config.convergence_eps, config.patience)) {
            result.converged = true;
            break;
        }
    }
    return result;
}

}  // namespace

std::string_view optimizer_name(Optimizer optimizer) {
    switch (optimizer) {
        case Optimizer::lambda_opt:
            return "lambda_opt";
        case Optimizer::sgd:
            return "sgd";
        case Optimizer::momentum:
            return "momentum";
        case Optimizer::nesterov:
            return "nesterov";
        case Optimizer::adam:
            return "adam";
        case Optimizer::nadam:
            return "nadam";
    }
    return "unknown";
}

Optimizer parse_optimizer(std::string_view name) {
    for (const Optimizer o : kAllOptimizers) {
        if (optimizer_name(o) == name) {
            return o;
        }
    }
    throw UsageError("unknown optimizer '" + std::string(name) +
                     "' (expected lambda_opt, sgd, momentum, nesterov, adam or nadam)");
}

void TrainConfig::validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) {
        throw UsageError("learning rate must be positive and finite");
    }
    if (rank == 0) {
        throw UsageError("rank must be at least 1");
    }
    if (max_epochs == 0) {
        throw UsageError("max_epochs must be at least 1");
    }
    if (!(convergence_eps > 0.0)) {
        throw UsageError("convergence eps must be positive");
    }
    if (patience == 0) {
        throw UsageError("patience must be at least 1");
    }
    if (!(divergence_limit > 0.0)) {
        throw UsageError("divergence limit must be positive");
    }
    if (optimizer == Optimizer::lambda_opt) {
        if (!gains) {
            throw UsageError("lambda_opt needs PID gains and lambda bounds");
        }
        gains->validate();
    } else {
        if (!fixed_lambda) {
            throw UsageError(std::string(optimizer_name(optimizer)) + " needs a fixed lambda");
        }
        if (!(*fixed_lambda >= 0.0) || !std::isfinite(*fixed_lambda)) {
            throw UsageError("fixed lambda must be finite and non-negative");
        }
        if (!(baseline.momentum >= 0.0 && baseline.momentum < 1.0) || !(baseline.beta1 >= 0.0 && baseline.beta1 < 1.0) ||
            !(baseline.beta2 >= 0.0 && baseline.beta2 < 1.0) || !(baseline.epsilon > 0.0)) {
            throw UsageError("baseline constants out of range");
        }
    }
}

OptimizerState::OptimizerState(Optimizer optimizer, std::size_t rows, std::size_t cols, std::size_t rank)
    : rank_(rank) {
    switch (optimizer) {
        case Optimizer::momentum:
        case Optimizer::nesterov:
            first_u_.assign(rows * rank, 0.0);
            first_v_.assign(cols * rank, 0.0);
            break;
        case Optimizer::adam:
        case Optimizer::nadam:
            first_u_.assign(rows * rank, 0.0);
            first_v_.assign(cols * rank, 0.0);
            second_u_.assign(rows * rank, 0.0);
            second_v_.assign(cols * rank, 0.0);
            steps_u_.assign(rows, 0);
            steps_v_.assign(cols, 0);
            break;
        case Optimizer::lambda_opt:
        case Optimizer::sgd:
            break;
    }
}

SampleGradient grad_sample(const FactorPair& factors, std::size_t i, std::size_t j, double error, double lambda) {
    if (i >= factors.rows() || j >= factors.cols()) {
        throw UsageError("gradient index out of bounds");
    }
    if (!(lambda >= 0.0)) {
        throw UsageError("regularization coefficient must be non-negative");
    }
    SampleGradient g{std::vector<double>(factors.rank()), std::vector<double>(factors.rank())};
    compute_gradient(factors.u_row(i), factors.v_row(j), error, lambda, g.u, g.v);
    return g;
}

void sgd_apply(FactorPair& factors, std::size_t i, std::size_t j, std::span<const double> grad_u,
               std::span<const double> grad_v, double eta) {
    descend(factors.u_row(i), grad_u, eta);
    descend(factors.v_row(j), grad_v, eta);
}

void momentum_update(std::span<double> params, std::span<const double> grad, std::span<double> velocity, double eta,
                     double beta) {
    for (std::size_t d = 0; d < params.size(); ++d) {
        velocity[d] = beta * velocity[d] + grad[d];
        params[d] -= eta * velocity[d];
    }
}

void adam_update(std::span<double> params, std::span<const double> grad, std::span<double> first,
                 std::span<double> second, std::uint64_t step, double eta, const BaselineSettings& settings,
                 bool nesterov) {
    const double b1 = settings.beta1;
    const double b2 = settings.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (std::size_t d = 0; d < params.size(); ++d) {
        first[d] = b1 * first[d] + (1.0 - b1) * grad[d];
        second[d] = b2 * second[d] + (1.0 - b2) * grad[d] * grad[d];
        const double m_hat = first[d] / correction1;
        const double v_hat = second[d] / correction2;
        const double direction = nesterov ? b1 * m_hat + (1.0 - b1) * grad[d] / correction1 : m_hat;
        params[d] -= eta * direction / (std::sqrt(v_hat) + settings.epsilon);
    }
}

double lambda_opt_step(FactorPair& factors, EntryPidState& state, const PidGains& gains, ControlInput input,
                       const ObservedEntry& entry, double eta, StepScratch& scratch) {
    auto u = factors.u_row(entry.row);
    auto v = factors.v_row(entry.col);
    const double error = entry.value - dot(u, v);
    const double signal = input == ControlInput::absolute_residual ? std::fabs(error) : error;
    const double lambda = pid_step(gains, state, signal);
    compute_gradient(u, v, error, lambda, scratch.grad_u, scratch.grad_v);
    descend(u, scratch.grad_u, eta);
    descend(v, scratch.grad_v, eta);
    return lambda;
}

void baseline_step(FactorPair& factors, OptimizerState& state, const TrainConfig& config, const ObservedEntry& entry,
                   StepScratch& scratch) {
    const std::size_t i = entry.row;
    const std::size_t j = entry.col;
    const double lambda = *config.fixed_lambda;
    const double eta = config.eta;
    auto u = factors.u_row(i);
    auto v = factors.v_row(j);

    switch (config.optimizer) {
        case Optimizer::sgd: {
            compute_gradient(u, v, entry.value - dot(u, v), lambda, scratch.grad_u, scratch.grad_v);
            descend(u, scratch.grad_u, eta);
            descend(v, scratch.grad_v, eta);
            break;
        }
        case Optimizer::momentum: {
            compute_gradient(u, v, entry.value - dot(u, v), lambda, scratch.grad_u, scratch.grad_v);
            momentum_update(u, scratch.grad_u, state.first_u(i), eta, config.baseline.momentum);
            momentum_update(v, scratch.grad_v, state.first_v(j), eta, config.baseline.momentum);
            break;
        }
        case Optimizer::nesterov: {
            // Gradient taken at the lookahead point theta - eta * beta * velocity.
            const double beta = config.baseline.momentum;
            auto vel_u = state.first_u(i);
            auto vel_v = state.first_v(j);
            for (std::size_t d = 0; d < u.size(); ++d) {
                scratch.ahead_u[d] = u[d] - eta * beta * vel_u[d];
                scratch.ahead_v[d] = v[d] - eta * beta * vel_v[d];
            }
            const double error = entry.value - dot(scratch.ahead_u, scratch.ahead_v);
            compute_gradient(scratch.ahead_u, scratch.ahead_v, error, lambda, scratch.grad_u, scratch.grad_v);
            momentum_update(u, scratch.grad_u, vel_u, eta, beta);
            momentum_update(v, scratch.grad_v, vel_v, eta, beta);
            break;
        }
        case Optimizer::adam:
        case Optimizer::nadam: {
            const bool nesterov = config.optimizer == Optimizer::nadam;
            compute_gradient(u, v, entry.value - dot(u, v), lambda, scratch.grad_u, scratch.grad_v);
            adam_update(u, scratch.grad_u, state.first_u(i), state.second_u(i), ++state.steps_u(i), eta,
                        config.baseline, nesterov);
            adam_update(v, scratch.grad_v, state.first_v(j), state.second_v(j), ++state.steps_v(j), eta,
                        config.baseline, nesterov);
            break;
        }
        case Optimizer::lambda_opt:
            throw UsageError("baseline_step called with lambda_opt");
    }
}

TrainResult train_lambda_opt(const ObservedMatrix& train, const ObservedMatrix& valid, const TrainConfig& config,
                             const EpochObserver& observer) {
    if (config.optimizer != Optimizer::lambda_opt) {
        throw UsageError("train_lambda_opt requires optimizer lambda_opt");
    }
    config.validate();
    check_shapes(train, valid);

    const PidGains gains = *config.gains;
    PidTable table(train.size(), gains);
    StepScratch scratch(config.rank);
    auto step = [&](FactorPair& factors, std::size_t index, const ObservedEntry& entry) {
        lambda_opt_step(factors, table[index], gains, config.control_input, entry, config.eta, scratch);
    };
    auto prefetch_state = [&](std::size_t index) { prefetch(&table[index]); };
    return run_epochs(train, valid, config, init_factors(train.rows(), train.cols(), config.rank, config.seed), step,
                      prefetch_state, [&] { return table.mean_lambda(); }, observer);
}

TrainResult train_baseline(const ObservedMatrix& train, const ObservedMatrix& valid, const TrainConfig& config,
                           const EpochObserver& observer) {
    if (config.optimizer == Optimizer::lambda_opt) {
        throw UsageError("train_baseline requires a fixed-lambda optimizer");
    }
    config.validate();
    check_shapes(train, valid);

    OptimizerState state(config.optimizer, train.rows(), train.cols(), config.rank);
    StepScratch scratch(config.rank);
    auto step = [&](FactorPair& factors, std::size_t, const ObservedEntry& entry) {
        baseline_step(factors, state, config, entry, scratch);
    };
    const double lambda = *config.fixed_lambda;
    return run_epochs(train, valid, config, init_factors(train.rows(), train.cols(), config.rank, config.seed), step,
                      [](std::size_t) {}, [lambda] { return lambda; }, observer);
}

TrainResult train(const ObservedMatrix& train, const ObservedMatrix& valid, const TrainConfig& config,
                  const EpochObserver& observer) {
    return config.optimizer == Optimizer::lambda_opt ? train_lambda_opt(train, valid, config, observer)
                                                     : train_baseline(train, valid, config, observer);
}

bool check_convergence(std::span<const EpochReport> reports, double eps, std::size_t patience) {
    if (reports.size() < patience + 1) {
        return false;
    }
    for (std::size_t k = reports.size() - patience; k < reports.size(); ++k) {
        const double improvement = reports[k - 1].valid_rmse - reports[k].valid_rmse;
        if (!(improvement < eps)) {
            return false;
        }
    }
    return true;
}

std::optional<Preset> find_preset(std::string_view name) {
    if (name == kUkdalePreset.name) {
        return kUkdalePreset;
    }
    if (name == kIawePreset.name) {
        return kIawePreset;
    }
    return std::nullopt;
}

PidGains preset_gains(const Preset& preset) {
    return {preset.kp, preset.ki, preset.kd, 0.0, 2.0 * preset.lambda};
}

}  // namespace pidlf
