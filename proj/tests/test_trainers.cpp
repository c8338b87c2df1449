#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <bit>
#include <cmath>
#include <random>

#include "pidlf/core_model.hpp"
#include "pidlf/data_io.hpp"
#include "pidlf/errors.hpp"
#include "pidlf/experiment.hpp"
#include "pidlf/trainers.hpp"

using namespace pidlf;

namespace {

PreparedData planted(std::size_t m, std::size_t n, std::size_t rank, double density, std::uint64_t seed) {
    DatasetSpec spec;
    spec.synthetic = SyntheticSpec{m, n, rank, density, 0.01, seed};
    spec.split_seed = seed;
    return prepare_dataset(spec);
}

double norm(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

// Copy of a factor pair with one scalar nudged.
double loss_with(FactorPair f, bool in_u, std::size_t row, std::size_t d, double delta, double observed,
                 std::size_t i, std::size_t j, double lambda) {
    (in_u ? f.u_row(row) : f.v_row(row))[d] += delta;
    return sample_loss(observed, f, i, j, lambda);
}

bool rows_equal_except(std::span<const double> a, std::span<const double> b, std::size_t rank, std::size_t skip) {
    for (std::size_t r = 0; r * rank < a.size(); ++r) {
        if (r == skip) {
            continue;
        }
        for (std::size_t d = 0; d < rank; ++d) {
            if (std::bit_cast<std::uint64_t>(a[r * rank + d]) != std::bit_cast<std::uint64_t>(b[r * rank + d])) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace

TEST_CASE("grad_sample examples") {
    FactorPair f(1, 1, 2);
    SampleGradient g = grad_sample(f, 0, 0, 0.0, 0.0);
    CHECK(g.u == std::vector<double>{0.0, 0.0});
    CHECK(g.v == std::vector<double>{0.0, 0.0});

    f.u_row(0)[0] = 1.0;
    f.v_row(0)[1] = 1.0;
    g = grad_sample(f, 0, 0, 1.0, 0.5);
    CHECK(g.u == std::vector<double>{1.0, -2.0});
    CHECK(g.v == std::vector<double>{-2.0, 1.0});
}

TEST_CASE("property: grad_sample matches central finite differences") {
    std::mt19937_64 gen(31);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> reg(0.0, 1.0);
    const double h = 1e-6;
    for (const std::size_t k : {1, 3, 8}) {
        for (int probe = 0; probe < 100; ++probe) {
            FactorPair f(4, 3, k);
            for (auto& x : f.u_values()) x = unit(gen);
            for (auto& x : f.v_values()) x = unit(gen);
            const std::size_t i = probe % 4;
            const std::size_t j = probe % 3;
            const double observed = 2.0 * unit(gen);
            const double lambda = reg(gen);
            const SampleGradient g = grad_sample(f, i, j, residual(observed, f, i, j), lambda);

            std::vector<double> fd_u(k), fd_v(k);
            for (std::size_t d = 0; d < k; ++d) {
                fd_u[d] = (loss_with(f, true, i, d, h, observed, i, j, lambda) -
                           loss_with(f, true, i, d, -h, observed, i, j, lambda)) /
                          (2 * h);
                fd_v[d] = (loss_with(f, false, j, d, h, observed, i, j, lambda) -
                           loss_with(f, false, j, d, -h, observed, i, j, lambda)) /
                          (2 * h);
            }
            std::vector<double> diff_u(k), diff_v(k);
            for (std::size_t d = 0; d < k; ++d) {
                diff_u[d] = fd_u[d] - g.u[d];
                diff_v[d] = fd_v[d] - g.v[d];
            }
            REQUIRE(norm(diff_u) / std::max(norm(g.u), 1e-8) < 1e-5);
            REQUIRE(norm(diff_v) / std::max(norm(g.v), 1e-8) < 1e-5);
        }
    }
}

TEST_CASE("sgd_apply examples") {
    FactorPair f = init_factors(4, 3, 2, 1);
    const FactorPair before = f;
    const std::vector<double> zero{0.0, 0.0};
    sgd_apply(f, 1, 2, zero, zero, 0.1);
    CHECK(f == before);

    FactorPair g(1, 1, 2);
    g.u_row(0)[0] = 1.0;
    const std::vector<double> gu{1.0, -2.0};
    sgd_apply(g, 0, 0, gu, zero, 0.1);
    CHECK(g.u_row(0)[0] == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(g.u_row(0)[1] == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("property: a step touches only its own rows and state") {
    const std::size_t k = 3;
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const PidGains gains{0.05, 5e-4, 5e-4, 0.0, 0.02};
    for (const Optimizer optimizer : kAllOptimizers) {
        CAPTURE(optimizer_name(optimizer));
        FactorPair f = init_factors(6, 5, k, 3);
        OptimizerState state(optimizer, 6, 5, k);
        PidTable table(10, gains);
        TrainConfig config;
        config.optimizer = optimizer;
        config.fixed_lambda = 0.01;
        StepScratch scratch(k);
        // Warm up so that buffers hold non-trivial values.
        for (int t = 0; t < 40; ++t) {
            const ObservedEntry e{static_cast<Index>(t % 6), static_cast<Index>(t % 5), unit(gen)};
            if (optimizer == Optimizer::lambda_opt) {
                lambda_opt_step(f, table[t % 10], gains, ControlInput::signed_residual, e, 0.05, scratch);
            } else {
                baseline_step(f, state, config, e, scratch);
            }
        }
        for (int t = 0; t < 30; ++t) {
            const ObservedEntry e{static_cast<Index>(gen() % 6), static_cast<Index>(gen() % 5), unit(gen)};
            const FactorPair before = f;
            const OptimizerState state_before = state;
            const auto table_before = std::vector<EntryPidState>(table.states().begin(), table.states().end());
            const std::size_t slot = gen() % 10;
            if (optimizer == Optimizer::lambda_opt) {
                lambda_opt_step(f, table[slot], gains, ControlInput::signed_residual, e, 0.05, scratch);
            } else {
                baseline_step(f, state, config, e, scratch);
            }
            REQUIRE(rows_equal_except(f.u_values(), before.u_values(), k, e.row));
            REQUIRE(rows_equal_except(f.v_values(), before.v_values(), k, e.col));
            for (std::size_t s = 0; s < table.size(); ++s) {
                if (s != slot) {
                    REQUIRE(table[s] == table_before[s]);
                }
            }
            OptimizerState probe = state_before;
            for (std::size_t d = 0; d < probe.first_u(e.row).size(); ++d) {
                probe.first_u(e.row)[d] = state.first_u(e.row)[d];
                probe.first_v(e.col)[d] = state.first_v(e.col)[d];
            }
            for (std::size_t d = 0; d < probe.second_u(e.row).size(); ++d) {
                probe.second_u(e.row)[d] = state.second_u(e.row)[d];
                probe.second_v(e.col)[d] = state.second_v(e.col)[d];
            }
            if (optimizer == Optimizer::adam || optimizer == Optimizer::nadam) {
                probe.steps_u(e.row) = state.steps_u(e.row);
                probe.steps_v(e.col) = state.steps_v(e.col);
            }
            REQUIRE(probe == state);
        }
    }
}

TEST_CASE("single observed entry is fitted to below 1e-3") {
    const ObservedMatrix one(1, 1, {{0, 0, 0.5}});
    TrainConfig config;
    config.optimizer = Optimizer::lambda_opt;
    config.rank = 1;
    config.max_epochs = 20000;
    config.convergence_eps = 1e-12;
    config.gains = PidGains{0.05, 5e-4, 5e-4, 0.0, 1e-4};
    const TrainResult result = train(one, one, config);
    REQUIRE(result.epochs_run() >= 2);
    for (std::size_t t = 1; t < result.reports.size(); ++t) {
        REQUIRE(result.reports[t].valid_rmse <= result.reports[t - 1].valid_rmse);
    }
    CHECK(result.reports.back().valid_rmse < 1e-3);
}

TEST_CASE("zero gains with collapsed bounds reproduce fixed-lambda SGD bitwise") {
    const PreparedData data = planted(50, 20, 3, 0.5, 4);
    const double lambda0 = 0.01;
    TrainConfig pid;
    pid.optimizer = Optimizer::lambda_opt;
    pid.max_epochs = 50;
    pid.seed = 17;
    pid.convergence_eps = 1e-300;
    pid.gains = PidGains{0.0, 0.0, 0.0, lambda0, lambda0};
    TrainConfig plain = pid;
    plain.optimizer = Optimizer::sgd;
    plain.gains.reset();
    plain.fixed_lambda = lambda0;

    const TrainResult a = train(data.train, data.test, pid);
    const TrainResult b = train(data.train, data.test, plain);
    REQUIRE(a.epochs_run() == 50);
    REQUIRE(b.epochs_run() == 50);
    CHECK(a.factors == b.factors);
    for (std::size_t t = 0; t < 50; ++t) {
        CHECK(a.reports[t].train_rmse == b.reports[t].train_rmse);
        CHECK(a.reports[t].valid_rmse == b.reports[t].valid_rmse);
        CHECK(a.reports[t].mean_lambda == lambda0);
    }
}

TEST_CASE("momentum with coefficient 0 is plain SGD bitwise") {
    const PreparedData data = planted(40, 30, 3, 0.4, 9);
    TrainConfig plain;
    plain.optimizer = Optimizer::sgd;
    plain.fixed_lambda = 5e-3;
    plain.max_epochs = 30;
    plain.seed = 2;
    TrainConfig heavy = plain;
    heavy.optimizer = Optimizer::momentum;
    heavy.baseline.momentum = 0.0;
    const TrainResult a = train(data.train, data.test, plain);
    const TrainResult b = train(data.train, data.test, heavy);
    CHECK(a.factors == b.factors);
    CHECK(a.epochs_run() == b.epochs_run());
}

TEST_CASE("adam_update matches a scalar Adam reference") {
    // Single entry, k = 1, V frozen at 1: loss (r - u)^2 + lambda (u^2 + 1).
    const double r = 0.8;
    const double lambda = 0.01;
    const double eta = 0.05;
    const BaselineSettings s;
    for (const bool nesterov : {false, true}) {
        double u = 0.03;
        double m = 0.0;
        double v = 0.0;
        std::vector<double> params{u}, first{0.0}, second{0.0};
        for (std::uint64_t t = 1; t <= 200; ++t) {
            FactorPair f(1, 1, 1);
            f.u_row(0)[0] = params[0];
            f.v_row(0)[0] = 1.0;
            const SampleGradient g = grad_sample(f, 0, 0, residual(r, f, 0, 0), lambda);
            adam_update(params, g.u, first, second, t, eta, s, nesterov);

            const double grad = -2.0 * (r - u) + 2.0 * lambda * u;
            m = 0.9 * m + 0.1 * grad;
            v = 0.999 * v + 0.001 * grad * grad;
            const double mh = m / (1.0 - std::pow(0.9, t));
            const double vh = v / (1.0 - std::pow(0.999, t));
            const double dir = nesterov ? 0.9 * mh + 0.1 * grad / (1.0 - std::pow(0.9, t)) : mh;
            const double u_before = u;
            u -= eta * dir / (std::sqrt(vh) + 1e-8);
            if (t == 1 && !nesterov) {
                // Bias correction turns the first step into eta times the sign of the gradient.
                CHECK(std::fabs(u - u_before) == doctest::Approx(eta).epsilon(1e-6));
            }
            REQUIRE(params[0] == doctest::Approx(u).epsilon(1e-14));
        }
    }
}

TEST_CASE("first adam step moves each coordinate by about eta") {
    const ObservedMatrix one(1, 1, {{0, 0, 0.9}});
    TrainConfig config;
    config.optimizer = Optimizer::adam;
    config.rank = 1;
    config.fixed_lambda = 0.0;
    FactorPair f = init_factors(1, 1, 1, 3);
    const FactorPair before = f;
    OptimizerState state(Optimizer::adam, 1, 1, 1);
    StepScratch scratch(1);
    baseline_step(f, state, config, one[0], scratch);
    CHECK(f.u_row(0)[0] - before.u_row(0)[0] == doctest::Approx(config.eta).epsilon(1e-6));
    CHECK(f.v_row(0)[0] - before.v_row(0)[0] == doctest::Approx(config.eta).epsilon(1e-6));
}

TEST_CASE("check_convergence examples") {
    auto reports = [](std::initializer_list<double> values) {
        std::vector<EpochReport> out;
        for (const double v : values) {
            EpochReport r;
            r.epoch = out.size() + 1;
            r.valid_rmse = v;
            out.push_back(r);
        }
        return out;
    };
    const auto improving = reports({1.0, 0.9, 0.8, 0.7, 0.6, 0.5});
    for (std::size_t n = 1; n <= improving.size(); ++n) {
        CHECK_FALSE(check_convergence(std::span(improving).first(n), 1e-3, 2));
    }
    const auto flat = reports({0.4, 0.3, 0.3, 0.3});
    CHECK_FALSE(check_convergence(std::span(flat).first(3), 1e-6, 2));
    CHECK(check_convergence(flat, 1e-6, 2));

    const auto hand = reports({0.50, 0.499, 0.4989, 0.4988});
    CHECK_FALSE(check_convergence(std::span(hand).first(3), 1e-3, 2));
    CHECK(check_convergence(hand, 1e-3, 2));

    const auto worse = reports({0.5, 0.6, 0.7});
    CHECK(check_convergence(worse, 1e-3, 2));
}

TEST_CASE("training is deterministic for a fixed seed") {
    const PreparedData data = planted(60, 40, 3, 0.3, 21);
    for (const Optimizer optimizer : kAllOptimizers) {
        CAPTURE(optimizer_name(optimizer));
        TrainConfig config;
        config.optimizer = optimizer;
        config.max_epochs = 25;
        config.seed = 99;
        config.fixed_lambda = 1e-3;
        config.gains = preset_gains(kIawePreset);
        const TrainResult a = train(data.train, data.test, config);
        const TrainResult b = train(data.train, data.test, config);
        CHECK(a.factors == b.factors);
        REQUIRE(a.epochs_run() == b.epochs_run());
        for (std::size_t t = 0; t < a.epochs_run(); ++t) {
            CHECK(a.reports[t].valid_rmse == b.reports[t].valid_rmse);
            CHECK(a.reports[t].mean_lambda == b.reports[t].mean_lambda);
        }
        config.seed = 100;
        CHECK_FALSE(train(data.train, data.test, config).factors == a.factors);
    }
}

TEST_CASE("observer sees every epoch before the stop decision") {
    const PreparedData data = planted(30, 20, 2, 0.5, 1);
    TrainConfig config;
    config.gains = preset_gains(kUkdalePreset);
    config.max_epochs = 500;
    std::vector<std::size_t> seen;
    const TrainResult r = train(data.train, data.test, config, [&](const EpochReport& e) { seen.push_back(e.epoch); });
    REQUIRE(seen.size() == r.epochs_run());
    for (std::size_t t = 0; t < seen.size(); ++t) {
        CHECK(seen[t] == t + 1);
    }
    CHECK(r.converged == check_convergence(r.reports, config.convergence_eps, config.patience));
}

TEST_CASE("divergence raises DivergenceError") {
    const PreparedData data = planted(30, 20, 2, 0.5, 1);
    TrainConfig config;
    config.optimizer = Optimizer::sgd;
    config.fixed_lambda = 0.0;
    config.eta = 50.0;
    CHECK_THROWS_AS(train(data.train, data.test, config), DivergenceError);
    config.optimizer = Optimizer::lambda_opt;
    config.gains = preset_gains(kUkdalePreset);
    CHECK_THROWS_AS(train(data.train, data.test, config), DivergenceError);
}

TEST_CASE("config validation") {
    TrainConfig config;
    config.optimizer = Optimizer::momentum;
    CHECK_THROWS_AS(config.validate(), UsageError);
    config.fixed_lambda = 1e-3;
    CHECK_NOTHROW(config.validate());
    config.optimizer = Optimizer::lambda_opt;
    CHECK_THROWS_AS(config.validate(), UsageError);
    config.gains = preset_gains(kUkdalePreset);
    CHECK_NOTHROW(config.validate());
    config.eta = 0.0;
    CHECK_THROWS_AS(config.validate(), UsageError);
    config.eta = 0.05;
    config.rank = 0;
    CHECK_THROWS_AS(config.validate(), UsageError);

    CHECK(parse_optimizer("nadam") == Optimizer::nadam);
    CHECK_THROWS_AS(parse_optimizer("rmsprop"), UsageError);
    for (const Optimizer o : kAllOptimizers) {
        CHECK(parse_optimizer(optimizer_name(o)) == o);
    }
}

TEST_CASE("presets") {
    REQUIRE(find_preset("ukdale"));
    CHECK(find_preset("ukdale")->kp == 5e-2);
    CHECK(find_preset("iawe")->lambda == 5e-4);
    CHECK_FALSE(find_preset("redd"));
    const PidGains g = preset_gains(kUkdalePreset);
    CHECK(g.lambda_min == 0.0);
    CHECK(g.lambda_max == 2 * 9e-4);
}

TEST_CASE("planted rank-3 recovery") {
    const PreparedData data = planted(100, 50, 3, 0.3, 7);
    SUBCASE("lambda_opt within 200 epochs") {
        TrainConfig config;
        config.gains = preset_gains(kUkdalePreset);
        config.max_epochs = 200;
        config.seed = 7;
        const TrainResult r = train(data.train, data.test, config);
        CHECK(r.epochs_run() <= 200);
        CHECK(r.reports.back().valid_rmse <= 0.05);
    }
    SUBCASE("every baseline within 300 epochs") {
        for (const Optimizer o : {Optimizer::momentum, Optimizer::nesterov, Optimizer::adam, Optimizer::nadam}) {
            CAPTURE(optimizer_name(o));
            TrainConfig config;
            config.optimizer = o;
            config.fixed_lambda = kUkdalePreset.lambda;
            config.max_epochs = 300;
            config.seed = 7;
            const TrainResult r = train(data.train, data.test, config);
            CHECK(r.reports.back().valid_rmse <= 0.1);
        }
    }
}
