#include "carbon/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <atomic>
#include <iostream>
#include <thread>
#include <vector>

#include "carbon/mc.hpp"

namespace carbon {
namespace {

namespace fs = std::filesystem;

// Interior margin used for mask statistics, matching the reproduction
// checks: five nodes dropped at each wall.
constexpr int kInteriorMargin = 5;

// Monte Carlo check tolerances: three standard errors plus a frozen
// discretization allowance for the value comparison, two e-spacings for the
// one-sided price.
constexpr double kSigmas = 3.0;
constexpr double kValueSlack = 0.05;

struct FieldStats {
    double min, max;
};

FieldStats stats(const Field& f) { return {f.min_value(), f.max_value()}; }

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, v);
    return buf;
}

struct MaskCounts {
    long plus = 0, zero = 0, minus = 0, interior = 0;
};

MaskCounts interior_mask_counts(const Solution& solution,
                                const Snapshot& snap) {
    const GridSpec& g = solution.grid;
    MaskCounts c;
    for (int i = kInteriorMargin; i < g.e_nodes() - kInteriorMargin; ++i)
        for (int j = kInteriorMargin; j < g.y_nodes() - kInteriorMargin; ++j) {
            const int m = snap.mask[static_cast<size_t>(i) * g.y_nodes() + j];
            ++c.interior;
            if (m > 0) ++c.plus;
            else if (m < 0) ++c.minus;
            else ++c.zero;
        }
    return c;
}

void print_summary(const Solution& solution, std::ostream& out) {
    const Snapshot& snap = solution.at_time(0.0);
    const auto row = [&](const char* name, const Field& f) {
        const auto s = stats(f);
        char line[128];
        std::snprintf(line, sizeof(line), "  %-12s min %12.6g   max %12.6g\n",
                      name, s.min, s.max);
        out << line;
    };
    out << "fields at t=0:\n";
    row("V", snap.value);
    row("q_policy", snap.policy);
    row("q_benchmark", snap.benchmark);
    row("tau", snap.tau);
    const MaskCounts c = interior_mask_counts(solution, snap);
    out << "  mask (interior " << c.interior << " nodes): +" << c.plus
        << " / 0:" << c.zero << " / -" << c.minus << "\n";
    out << "  max residual " << fmt("%.6g", snap.max_residual) << ", -V_e+ in ["
        << fmt("%.6g", snap.price_min) << ", " << fmt("%.6g", snap.price_max)
        << "]\n";
}

Solution solve_config(const RunConfig& config) {
    return solve(config.solver());
}

int classify(const std::exception& err) {
    if (dynamic_cast<const ConfigError*>(&err)) return kExitConfig;
    if (dynamic_cast<const std::invalid_argument*>(&err)) return kExitConfig;
    if (dynamic_cast<const SolveError*>(&err)) return kExitNumeric;
    if (dynamic_cast<const ConsistencyError*>(&err)) return kExitNumeric;
    if (dynamic_cast<const ModelError*>(&err)) return kExitNumeric;
    return kExitIo;
}

struct SweepRow {
    double gamma = 0.0, alpha = 0.0;
    double frac_plus = 0.0, mean_diff = 0.0, value_at_probe = 0.0;
    int exit_code = kExitOk;
    std::string error;
};

SweepRow run_one_combo(RunConfig config, double gamma, double alpha,
                       const fs::path& dir) {
    SweepRow row;
    row.gamma = gamma;
    row.alpha = alpha;
    try {
        config.gamma_vol = gamma;
        config.alpha = alpha;
        const Solution solution = solve_config(config);
        export_solution(solution, dir);

        const Snapshot& snap = solution.at_time(0.0);
        const GridSpec& g = solution.grid;
        long plus = 0, n = 0;
        double diff_sum = 0.0;
        for (int i = kInteriorMargin; i < g.e_nodes() - kInteriorMargin; ++i)
            for (int j = kInteriorMargin; j < g.y_nodes() - kInteriorMargin;
                 ++j) {
                const double d =
                    snap.policy.at(i, j) - snap.benchmark.at(i, j);
                diff_sum += d;
                if (snap.mask[static_cast<size_t>(i) * g.y_nodes() + j] > 0)
                    ++plus;
                ++n;
            }
        row.frac_plus = static_cast<double>(plus) / static_cast<double>(n);
        row.mean_diff = diff_sum / static_cast<double>(n);
        row.value_at_probe = snap.value.sample_clamped(0.0, 0.0);
    } catch (const std::exception& err) {
        row.exit_code = classify(err);
        row.error = err.what();
    }
    return row;
}

struct Check {
    std::string name;
    double e = 0.0, y = 0.0;
    double value = 0.0;      // quantity under test
    double reference = 0.0;  // what it is compared against
    double gap = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

Check make_check(std::string name, double e, double y, double value,
                 double reference, double tolerance, bool one_sided = false) {
    Check c;
    c.name = std::move(name);
    c.e = e;
    c.y = y;
    c.value = value;
    c.reference = reference;
    c.gap = one_sided ? value - reference : std::abs(value - reference);
    c.tolerance = tolerance;
    c.pass = c.gap <= tolerance;
    return c;
}

}  // namespace

int run_solve(const RunConfig& config, bool quiet) {
    const Solution solution = solve_config(config);
    export_solution(solution, config.out_dir);
    if (!quiet) print_summary(solution, std::cout);
    return kExitOk;
}

int run_sweep(const RunConfig& config, bool quiet) {
    if (config.gamma_vol_sweep.empty() || config.alpha_sweep.empty())
        throw ConfigError(
            "sweep needs nonempty gamma_vol_sweep and alpha_sweep lists");

    std::vector<std::pair<double, double>> combos;
    for (double g : config.gamma_vol_sweep)
        for (double a : config.alpha_sweep) combos.emplace_back(g, a);

    const fs::path base(config.out_dir);
    fs::create_directories(base);

    // Independent solves; each combination writes to its own subdirectory.
    const int workers = std::max(
        1, config.threads > 0
               ? config.threads
               : static_cast<int>(std::thread::hardware_concurrency()));
    std::vector<SweepRow> rows(combos.size());
    std::atomic<size_t> cursor{0};
    const auto worker = [&] {
        for (;;) {
            const size_t k = cursor.fetch_add(1);
            if (k >= combos.size()) return;
            const auto [g, a] = combos[k];
            char sub[64];
            std::snprintf(sub, sizeof(sub), "g%g_a%g", g, a);
            rows[k] = run_one_combo(config, g, a, base / sub);
        }
    };
    std::vector<std::thread> pool;
    const size_t pool_size = std::min<size_t>(workers, combos.size());
    for (size_t w = 0; w < pool_size; ++w)
        pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    std::ofstream csv(base / "sweep.csv");
    if (!csv) throw std::runtime_error("cannot write sweep.csv");
    csv << "gamma,alpha,frac_nodes_q3_gt_q1,mean_q3_minus_q1,V_at_probe\n";
    int first_failure = kExitOk;
    for (const SweepRow& row : rows) {
        if (row.exit_code != kExitOk) {
            if (first_failure == kExitOk) first_failure = row.exit_code;
            std::cerr << "sweep combination gamma=" << row.gamma
                      << " alpha=" << row.alpha << " failed: " << row.error
                      << "\n";
            continue;
        }
        char line[192];
        std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      row.gamma, row.alpha, row.frac_plus, row.mean_diff,
                      row.value_at_probe);
        csv << line;
        if (!quiet)
            std::cout << "gamma=" << row.gamma << " alpha=" << row.alpha
                      << " frac+=" << fmt("%.4f", row.frac_plus)
                      << " V(0,0,0)=" << fmt("%.6g", row.value_at_probe)
                      << "\n";
    }
    return first_failure;
}

int run_verify(const RunConfig& config, bool quiet) {
    const Solution solution = solve_config(config);
    const Snapshot& snap = solution.at_time(0.0);
    const MarketDynamics market = config.market();
    const FirmModel firm = config.firm();
    const MarkovPolicy optimal = MarkovPolicy::from_solution(solution);
    const MarkovPolicy idle = MarkovPolicy::constant(0.0);

    // Price field -V_e+ at t = 0 for the identity check.
    Field price(solution.grid, 0.0);
    for (int i = 0; i < solution.grid.e_nodes(); ++i)
        for (int j = 0; j < solution.grid.y_nodes(); ++j)
            price.at(i, j) = -e_forward_difference(snap.value, i, j);

    const fs::path base(config.out_dir);
    fs::create_directories(base);
    std::ofstream estimates(base / "estimates.csv");
    if (!estimates) throw std::runtime_error("cannot write estimates.csv");
    write_estimate_csv_header(estimates);

    std::vector<Check> checks;
    const double de = solution.grid.de();

    for (size_t p = 0; p < kProbePoints.size(); ++p) {
        const auto [e0, y0] = kProbePoints[p];
        SimPlan plan;
        plan.t0 = 0.0;
        plan.e0 = e0;
        plan.y0 = y0;
        plan.n_paths = config.mc_paths;
        plan.n_steps = config.mc_steps;
        plan.seed = config.seed + 10 * p;
        plan.n_threads = config.threads;

        const auto records = simulate_paths(optimal, market, firm, plan);
        const McEstimate value = value_from_records(records, market, plan);
        const McEstimate price_mc = price_from_records(records, market, plan);

        char tag[48];
        std::snprintf(tag, sizeof(tag), "probe_e%g_y%g", e0, y0);
        write_estimate_csv_row(estimates, std::string("J_opt_") + tag, value);
        write_estimate_csv_row(estimates, std::string("S_") + tag, price_mc);

        const double v_pde = snap.value.sample_clamped(e0, y0);
        checks.push_back(make_check(
            std::string("consistency_") + tag, e0, y0, v_pde, value.mean,
            kSigmas * value.std_error + kValueSlack));

        const double s_pde = price.sample_clamped(e0, y0);
        checks.push_back(make_check(std::string("price_identity_") + tag, e0,
                                    y0, s_pde, price_mc.mean,
                                    kSigmas * price_mc.std_error + 2.0 * de));

        SimPlan idle_plan = plan;
        idle_plan.seed = config.seed + 500 + 10 * p;
        const McEstimate idle_value =
            evaluate_policy(idle, market, firm, idle_plan);
        write_estimate_csv_row(estimates, std::string("J_idle_") + tag,
                               idle_value);
        checks.push_back(make_check(
            std::string("suboptimality_") + tag, e0, y0, idle_value.mean,
            v_pde, kSigmas * idle_value.std_error, /*one_sided=*/true));
    }

    // Dual multiplier / budget constraint on the optimal policy from the
    // first probe point.
    {
        SimPlan plan;
        plan.t0 = 0.0;
        plan.e0 = kProbePoints[0].first;
        plan.y0 = kProbePoints[0].second;
        plan.n_paths = config.mc_paths;
        plan.n_steps = config.mc_steps;
        plan.seed = config.seed + 900;
        plan.n_threads = config.threads;
        const DualReport dual =
            dual_multiplier(config.mc_wealth, optimal, market, firm, plan);
        McEstimate as_estimate;
        as_estimate.mean = dual.multiplier;
        as_estimate.std_error = 0.0;
        as_estimate.n_paths = dual.n_paths;
        as_estimate.n_steps = plan.n_steps;
        as_estimate.seed = dual.seed;
        write_estimate_csv_row(estimates, "dual_multiplier", as_estimate);
        checks.push_back(make_check("dual_budget_gap", plan.e0, plan.y0,
                                    dual.budget_gap, 0.0,
                                    kSigmas * dual.budget_gap_se));
    }

    std::ofstream csv(base / "verify.csv");
    if (!csv) throw std::runtime_error("cannot write verify.csv");
    csv << "check,e,y,value,reference,gap,tolerance,pass\n";
    bool all_pass = true;
    for (const Check& c : checks) {
        char line[256];
        std::snprintf(line, sizeof(line),
                      "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                      c.name.c_str(), c.e, c.y, c.value, c.reference, c.gap,
                      c.tolerance, c.pass ? 1 : 0);
        csv << line;
        all_pass = all_pass && c.pass;
        if (!quiet || !c.pass) {
            std::ostream& out = c.pass ? std::cout : std::cerr;
            out << (c.pass ? "[PASS] " : "[FAIL] ") << c.name
                << " gap=" << fmt("%.6g", c.gap)
                << " tol=" << fmt("%.6g", c.tolerance) << "\n";
        }
    }
    return all_pass ? kExitOk : kExitVerify;
}

int cli_main(int argc, const char* const* argv) {
    const auto usage = [](std::ostream& out) {
        out << "usage: carbon <solve|sweep|verify> <config> [--out <dir>] "
               "[--seed <u64>] [--quiet]\n";
    };
    try {
        if (argc < 3) {
            usage(std::cerr);
            return kExitConfig;
        }
        const std::string command = argv[1];
        const std::string config_path = argv[2];
        bool quiet = false;
        std::string out_override, seed_override;
        for (int k = 3; k < argc; ++k) {
            const std::string arg = argv[k];
            if (arg == "--quiet") {
                quiet = true;
            } else if (arg == "--out" && k + 1 < argc) {
                out_override = argv[++k];
            } else if (arg == "--seed" && k + 1 < argc) {
                seed_override = argv[++k];
            } else {
                std::cerr << "unknown argument '" << arg << "'\n";
                usage(std::cerr);
                return kExitConfig;
            }
        }

        RunConfig config = RunConfig::from_file(config_path);
        if (!out_override.empty()) config.out_dir = out_override;
        if (!seed_override.empty())
            config.seed = std::stoull(seed_override);

        if (command == "solve") return run_solve(config, quiet);
        if (command == "sweep") return run_sweep(config, quiet);
        if (command == "verify") return run_verify(config, quiet);
        std::cerr << "unknown command '" << command << "'\n";
        usage(std::cerr);
        return kExitConfig;
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return kExitConfig;
    } catch (const SolveError& err) {
        std::cerr << "solver error: " << err.what() << "\n";
        return kExitNumeric;
    } catch (const ConsistencyError& err) {
        std::cerr << "consistency error: " << err.what() << "\n";
        return kExitNumeric;
    } catch (const ModelError& err) {
        std::cerr << "model error: " << err.what() << "\n";
        return kExitNumeric;
    } catch (const std::invalid_argument& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitIo;
    }
}

}  // namespace carbon
