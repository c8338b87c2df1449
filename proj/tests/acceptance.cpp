// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pidlf/accounting.hpp"
#include "pidlf/cli.hpp"
#include "pidlf/core_model.hpp"
#include "pidlf/data_io.hpp"
#include "pidlf/experiment.hpp"
#include "pidlf/metrics.hpp"
#include "pidlf/pid_controller.hpp"
#include "pidlf/run_files.hpp"
#include "pidlf/trainers.hpp"

using namespace pidlf;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass;
    std::string detail;
};

PreparedData planted(const SyntheticSpec& spec, std::uint64_t split_seed) {
    DatasetSpec d;
    d.synthetic = spec;
    d.split_seed = split_seed;
    return prepare_dataset(d);
}

std::string fmt(const char* format, double a, double b = 0, double c = 0, double d = 0) {
    char buffer[256];
    std::snprintf(buffer, sizeof(buffer), format, a, b, c, d);
    return buffer;
}

// 1. grad_sample against central differences of sample_loss.
Verdict gradient_oracle() {
    std::mt19937_64 gen(101);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> reg(0.0, 0.5);
    const double h = 1e-6;
    double worst = 0.0;
    int probes = 0;
    for (const std::size_t k : {1, 3, 8}) {
        for (int p = 0; p < 100; ++p, ++probes) {
            FactorPair f(3, 3, k);
            for (auto& x : f.u_values()) x = unit(gen);
            for (auto& x : f.v_values()) x = unit(gen);
            const std::size_t i = gen() % 3, j = gen() % 3;
            const double r = 2.0 * unit(gen);
            const double lambda = reg(gen);
            const SampleGradient g = grad_sample(f, i, j, residual(r, f, i, j), lambda);
            for (const bool in_u : {true, false}) {
                double diff = 0.0, ref = 0.0;
                for (std::size_t d = 0; d < k; ++d) {
                    FactorPair plus = f, minus = f;
                    (in_u ? plus.u_row(i) : plus.v_row(j))[d] += h;
                    (in_u ? minus.u_row(i) : minus.v_row(j))[d] -= h;
                    const double fd = (sample_loss(r, plus, i, j, lambda) - sample_loss(r, minus, i, j, lambda)) / (2 * h);
                    const double an = in_u ? g.u[d] : g.v[d];
                    diff += (fd - an) * (fd - an);
                    ref += an * an;
                }
                worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(ref), 1e-8));
            }
        }
    }
    return {worst < 1e-5, fmt("%.0f probes, worst relative error %.2e (limit 1e-5)", probes, worst)};
}

// 2. pid_step against a from-history evaluator.
Verdict pid_oracle() {
    std::mt19937_64 gen(202);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    bool in_bounds = true;
    const int sequences = 50;
    for (int s = 0; s < sequences; ++s) {
        const double lo = 0.01 * unit(gen);
        const PidGains g{unit(gen), 0.01 * unit(gen), unit(gen), lo, lo + unit(gen)};
        EntryPidState state;
        std::vector<double> history;
        for (int t = 0; t < 1000; ++t) {
            history.push_back(3.0 * unit(gen) - 1.5);
            const double lambda = pid_step(g, state, history.back());
            double sum = 0.0;
            for (const double e : history) {
                sum += e;
            }
            const double prev = history.size() > 1 ? history[history.size() - 2] : 0.0;
            const double raw = g.kp * history.back() + g.ki * sum + g.kd * (history.back() - prev);
            const double expect = std::min(g.lambda_max, std::max(g.lambda_min, raw));
            worst = std::max(worst, std::fabs(lambda - expect));
            in_bounds = in_bounds && state.lambda >= g.lambda_min && state.lambda <= g.lambda_max;
        }
    }
    return {worst <= 1e-12 && in_bounds,
            fmt("%.0f sequences x 1000 steps, worst deviation %.2e (limit 1e-12), bounds ", sequences, worst) +
                (in_bounds ? "held" : "violated")};
}

// 3. Zero gains with collapsed bounds against plain fixed-lambda SGD.
Verdict degeneracy() {
    const PreparedData data = planted({50, 20, 3, 0.5, 0.01, 3}, 3);
    const double lambda0 = 0.01;
    TrainConfig pid;
    pid.max_epochs = 50;
    pid.seed = 3;
    pid.convergence_eps = 1e-300;
    pid.gains = PidGains{0.0, 0.0, 0.0, lambda0, lambda0};
    TrainConfig sgd = pid;
    sgd.optimizer = Optimizer::sgd;
    sgd.gains.reset();
    sgd.fixed_lambda = lambda0;
    const TrainResult a = train(data.train, data.test, pid);
    const TrainResult b = train(data.train, data.test, sgd);
    bool same = a.factors == b.factors && a.epochs_run() == 50 && b.epochs_run() == 50;
    for (std::size_t t = 0; same && t < a.reports.size(); ++t) {
        same = a.reports[t].train_rmse == b.reports[t].train_rmse && a.reports[t].valid_rmse == b.reports[t].valid_rmse;
    }
    return {same, std::string("50 epochs on 50x20, factors and per-epoch metrics ") +
                      (same ? "bitwise identical" : "differ")};
}

// 4. Planted-matrix recovery over five seeds.
Verdict recovery() {
    int passed = 0;
    std::string values;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const PreparedData data = planted({100, 50, 3, 0.3, 0.01, seed}, seed);
        TrainConfig config;
        config.gains = preset_gains(kUkdalePreset);
        config.eta = kUkdalePreset.eta;
        config.max_epochs = 200;
        config.seed = seed;
        const TrainResult r = train(data.train, data.test, config);
        const double rmse = evaluate(data.test, r.factors).rmse;
        passed += rmse <= 0.05 ? 1 : 0;
        values += fmt(" %.4f", rmse);
    }
    return {passed >= 4, fmt("%.0f of 5 seeds with held-out RMSE <= 0.05 within 200 epochs; RMSE", passed) + values};
}

// 5. lambda_opt against the four accelerated baselines.
Verdict comparison() {
    const std::size_t seeds = 7;
    const std::size_t max_epochs = 500;
    int wins = 0, accurate = 0, fast = 0;
    std::string per_seed;
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
        const PreparedData data = planted({100, 50, 3, 0.3, 0.01, seed}, seed);
        TrainConfig base;
        base.eta = kUkdalePreset.eta;
        base.fixed_lambda = kUkdalePreset.lambda;
        base.gains = preset_gains(kUkdalePreset);
        base.max_epochs = max_epochs;
        base.seed = seed;
        std::vector<Optimizer> optimizers{Optimizer::lambda_opt};
        optimizers.insert(optimizers.end(), std::begin(kBaselineOptimizers), std::end(kBaselineOptimizers));
        const auto rows = run_benchmark(data, base, optimizers);
        const ComparisonVerdict v = compare_against_baselines(rows, max_epochs, 0.005);
        wins += v.passed() ? 1 : 0;
        accurate += v.accuracy_ok ? 1 : 0;
        fast += v.speed_ok ? 1 : 0;
        per_seed += fmt(" [%.0f vs %.0f]", static_cast<double>(rows[0].epochs), v.median_baseline_epochs);
    }
    return {2 * wins > static_cast<int>(seeds),
            fmt("both targets met in %.0f of %.0f seeds (accuracy %.0f, speed %.0f); epochs lambda_opt vs baseline "
                "median:",
                wins, seeds, accurate, fast) +
                per_seed};
}

// 6. Epoch time scaling in |Omega| and k.
Verdict scaling() {
    const std::size_t m = 20000, n = 50;
    struct Case {
        SplitResult data;
        std::size_t rank;
        std::vector<double> means;
    };
    auto make = [&](std::size_t omega, std::size_t rank) {
        SyntheticSpec s{m, n, 4, omega / 0.8 / static_cast<double>(m * n), 0.01, 3};
        return Case{split(generate_synthetic(s).observed, 0.8, 1), rank, {}};
    };
    auto time = [](Case& c) {
        TrainConfig config;
        config.rank = c.rank;
        config.max_epochs = 16;
        config.seed = 1;
        config.eta = 0.01;
        config.gains = preset_gains(kUkdalePreset);
        config.convergence_eps = 1e-300;
        config.patience = 100;
        const TrainResult r = train(c.data.train, c.data.test, config);
        double total = 0.0;
        for (std::size_t e = 1; e < r.reports.size(); ++e) {
            total += r.reports[e].epoch_seconds;
        }
        c.means.push_back(total / static_cast<double>(r.reports.size() - 1));
    };
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    Case base = make(100000, 8), doubled = make(200000, 8), wide = make(100000, 16);
    for (int rep = 0; rep < 15; ++rep) {
        time(base);
        time(doubled);
        time(wide);
    }
    const double omega_ratio = median(doubled.means) / median(base.means);
    const double rank_ratio = median(wide.means) / median(base.means);
    const bool ok = omega_ratio >= 1.6 && omega_ratio <= 2.4 && rank_ratio >= 1.6 && rank_ratio <= 2.4;
    return {ok, fmt("|Omega| 200k/100k ratio %.3f, k 16/8 ratio %.3f (band [1.6, 2.4]); base epoch %.2f ms",
                    omega_ratio, rank_ratio, 1e3 * median(base.means))};
}

// 7. Metrics against a naive recomputation.
Verdict metric_oracle() {
    const std::size_t m = 1000, n = 1000;
    const FactorPair f = init_factors(m, n, 4, 7);
    std::mt19937_64 gen(303);
    std::normal_distribution<double> noise(0.0, 0.2);
    std::vector<ObservedEntry> entries;
    entries.reserve(m * n);
    for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < n; ++j) {
            entries.push_back({i, j, predict(f, i, j) + noise(gen)});
        }
    }
    const ObservedMatrix test(m, n, entries);
    const EvalResult r = evaluate(test, f);

    double sq = 0.0, ab = 0.0;
    for (const auto& e : entries) {
        double p = 0.0;
        for (std::size_t d = 0; d < f.rank(); ++d) {
            p += f.u_row(e.row)[d] * f.v_row(e.col)[d];
        }
        const double res = e.value - p;
        sq += res * res;
        ab += std::fabs(res);
    }
    const double rmse = std::sqrt(sq / static_cast<double>(entries.size()));
    const double mae = ab / static_cast<double>(entries.size());
    const double rel = std::max(std::fabs(r.rmse - rmse) / rmse, std::fabs(r.mae - mae) / mae);

    bool ordered = r.mae <= r.rmse;
    std::uniform_real_distribution<double> expo(-30.0, 30.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> res(1 + gen() % 100);
        for (auto& x : res) {
            x = std::pow(10.0, expo(gen) / 3.0) * noise(gen);
        }
        const EvalResult e = evaluate_residuals(res);
        ordered = ordered && e.mae <= e.rmse;
    }
    return {rel <= 1e-10 && ordered && r.count == m * n,
            fmt("10^6 residuals, relative deviation %.2e (limit 1e-10), mae <= rmse on 1001 inputs: ", rel) +
                (ordered ? "yes" : "no")};
}

// 8. Train through the command line, replay from the manifest, compare files.
Verdict manifest_replay() {
    const fs::path dir = fs::temp_directory_path() / "pidlf_acceptance_replay";
    fs::remove_all(dir);
    std::ostringstream out, err;
    const int first = run_cli({"train", "--synth", "m=50,n=20,rank=3,density=0.5,noise=0.01", "--preset", "ukdale",
                               "--epochs", "50", "--seed", "11", "--quiet", "--out", (dir / "first").string()},
                              out, err);
    const int second = run_cli(
        {"train", "--config", (dir / "first" / kManifestFile).string(), "--quiet", "--out", (dir / "replay").string()},
        out, err);
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    bool same = first == 0 && second == 0;
    for (const char* name : {kReportFile, kFactorUFile, kFactorVFile}) {
        same = same && !slurp(dir / "first" / name).empty() && slurp(dir / "first" / name) == slurp(dir / "replay" / name);
    }
    fs::remove_all(dir);
    return {same, std::string("reports.csv, U.csv and V.csv after replay: ") + (same ? "bitwise identical" : "differ")};
}

// 9. Allocation accounting for factors and the controller table.
Verdict memory_accounting() {
    const PreparedData data = planted({120, 70, 3, 0.25, 0.01, 5}, 5);
    const std::size_t m = data.train.rows(), n = data.train.cols(), k = 6;
    const std::size_t omega = data.train.size();

    auto& factors = allocation_stats(Ledger::factors);
    auto& pid = allocation_stats(Ledger::pid_state);

    const auto f0 = factors.snapshot();
    const auto p0 = pid.snapshot();
    std::int64_t factor_live = 0, pid_live = 0, pid_allocs = 0;
    {
        const FactorPair f = init_factors(m, n, k, 1);
        const PidTable table(omega, preset_gains(kUkdalePreset));
        factor_live = factors.snapshot().live_elements - f0.live_elements;
        pid_live = pid.snapshot().live_elements - p0.live_elements;
        pid_allocs = pid.snapshot().allocations - p0.allocations;
    }

    factors.reset_peak();
    pid.reset_peak();
    const auto f1 = factors.snapshot();
    const auto p1 = pid.snapshot();
    TrainConfig config;
    config.rank = k;
    config.max_epochs = 5;
    config.gains = preset_gains(kUkdalePreset);
    {
        const TrainResult r = train(data.train, data.test, config);
        (void)r;
    }
    const std::int64_t factor_peak = factors.snapshot().peak_elements - f1.live_elements;
    const std::int64_t pid_peak = pid.snapshot().peak_elements - p1.live_elements;
    const std::int64_t opt_live = allocation_stats(Ledger::optimizer).snapshot().live_elements;

    const auto expect_factors = static_cast<std::int64_t>((m + n) * k);
    const auto expect_pid = static_cast<std::int64_t>(omega);
    const bool ok = factor_live == expect_factors && pid_live == expect_pid && pid_allocs == 1 &&
                    factor_peak == expect_factors && pid_peak == expect_pid && opt_live == 0;
    return {ok, fmt("PID records %.0f (|Omega| = %.0f), factor values %.0f ((m+n)k = %.0f)", pid_live, expect_pid,
                    factor_live, expect_factors) +
                    fmt("; training peak %.0f records, %.0f values", pid_peak, factor_peak)};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        double budget_seconds;
        std::function<Verdict()> check;
    };
    const std::vector<Criterion> criteria{
        {1, 1.0, gradient_oracle},   {2, 1.0, pid_oracle},      {3, 5.0, degeneracy},
        {4, 30.0, recovery},         {5, 300.0, comparison},    {6, 120.0, scaling},
        {7, 5.0, metric_oracle},     {8, 5.0, manifest_replay}, {9, 1.0, memory_accounting},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.check();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = seconds <= c.budget_seconds;
        const bool pass = v.pass && in_time;
        failures += pass ? 0 : 1;
        std::printf("criterion %d: %s  %s  [%.2f s, budget %.0f s%s]\n", c.id, pass ? "PASS" : "FAIL",
                    v.detail.c_str(), seconds, c.budget_seconds, in_time ? "" : ", exceeded");
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
