// Acceptance suite for the production-policy solver.  Each numbered check
// below runs the full pipeline at the pinned configuration and tolerance and
// prints one PASS/FAIL line; the process exits nonzero if any check fails.
//
// Configuration under test: pi(q) = q(1-q), eta = lambda = q, beta = 1,
// mu = 0.1, alpha = 0.1, a = 5 (rho = 0.9), T = 10, on the default grid
// L_e = 3, L_y = 6, N_e = 100, N_y = 120, N_t = 1000.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

#include "carbon/mc.hpp"
#include "carbon/solver.hpp"

using namespace carbon;

namespace {

constexpr std::uint64_t kSeed = 20240917ULL;
constexpr int kMargin = 5;  // interior = grid minus a 5-node boundary rim
constexpr std::pair<double, double> kProbes[] = {
    {0.0, 0.0}, {1.0, -1.0}, {1.0, 1.0}, {-1.0, 0.0}, {0.5, -2.0}};

int g_failures = 0;

void report(const char* label, bool pass, const std::string& detail) {
    std::printf("[%s] %s%s%s\n", pass ? "PASS" : "FAIL", label,
                detail.empty() ? "" : ": ", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* pattern, ...) {
    char buf[512];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof(buf), pattern, args);
    va_end(args);
    return buf;
}

GridSpec default_grid(int refine = 1) {
    GridSpec g;
    g.e_half_width = 3.0;
    g.y_half_width = 6.0;
    g.e_half_nodes = 100 * refine;
    g.y_half_nodes = 120 * refine;
    g.time_steps = 1000 * refine;
    g.horizon = 10.0;
    return g;
}

SolverConfig reference_config(double gamma, double alpha = 0.1, int refine = 1,
                          int store_every = 500) {
    SolverConfig config;
    config.grid = default_grid(refine);
    config.market =
        MarketDynamics::constant_coefficients(0.1, gamma, 1.0, alpha, 10.0);
    config.firm = FirmModel::quadratic_firm(5.0, FirmMode::LargePremiumImpact);
    config.store_every = store_every;
    return config;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         t0)
        .count();
}

struct InteriorScan {
    long nodes = 0, below = 0, above = 0;
    double tau_min = 1e300;
    double identity_err = 0.0;
    long identity_nodes = 0;
};

InteriorScan scan_interior(const Solution& solution) {
    const Snapshot& snap = solution.at_time(0.0);
    const GridSpec& g = solution.grid;
    InteriorScan s;
    for (int i = kMargin; i < g.e_nodes() - kMargin; ++i)
        for (int j = kMargin; j < g.y_nodes() - kMargin; ++j) {
            const double q3 = snap.policy.at(i, j);
            const double q1 = snap.benchmark.at(i, j);
            const double tau = snap.tau.at(i, j);
            ++s.nodes;
            if (q3 < q1 - 1e-3) ++s.below;
            if (q3 > q1 + 1e-3) ++s.above;
            s.tau_min = std::min(s.tau_min, tau);
            if (q3 > 1e-3 && q1 > 1e-3) {
                ++s.identity_nodes;
                s.identity_err = std::max(
                    s.identity_err, std::abs(q3 - q1 - 0.5 * tau));
            }
        }
    return s;
}

struct BandScan {
    double fd_min = 1e300, fd_max = -1e300;
    double convexity_min = 1e300;
};

BandScan scan_e_differences(const Field& value) {
    const GridSpec& g = value.spec();
    const double de = g.de();
    BandScan s;
    for (int j = 0; j < g.y_nodes(); ++j) {
        double prev = 0.0;
        for (int i = 0; i + 1 < g.e_nodes(); ++i) {
            const double fd = (value.at(i + 1, j) - value.at(i, j)) / de;
            s.fd_min = std::min(s.fd_min, fd);
            s.fd_max = std::max(s.fd_max, fd);
            if (i > 0) s.convexity_min = std::min(s.convexity_min, fd - prev);
            prev = fd;
        }
    }
    return s;
}

}  // namespace

int main() {
    std::printf("acceptance: quadratic cap-and-trade production experiment\n");

    // --- gamma = 1.5 and gamma = 0.5 reproduction runs ------------------
    const auto t_run1 = std::chrono::steady_clock::now();
    const Solution run_high = solve(reference_config(1.5));
    const double secs_high = seconds_since(t_run1);
    const Solution run_low = solve(reference_config(0.5));

    {
        const InteriorScan s = scan_interior(run_high);
        const bool pass = s.below == 0 && s.tau_min >= -1e-3 &&
                          secs_high < 120.0;
        report("1. gamma=1.5: production never falls below the benchmark",
               pass,
               fmt("nodes q3<q1-1e-3: %ld of %ld, tau_min=%.3g, solve %.1fs "
                   "(budget 120s)",
                   s.below, s.nodes, s.tau_min, secs_high));
    }

    {
        const InteriorScan s = scan_interior(run_low);
        const double frac_below =
            static_cast<double>(s.below) / static_cast<double>(s.nodes);
        const double frac_above =
            static_cast<double>(s.above) / static_cast<double>(s.nodes);
        const bool pass = frac_below >= 0.01 && frac_above >= 0.01;
        // The qualitative mixed-sign mask (dead band 1e-6) is also reported:
        // the below-benchmark sliver sits against the +L_e wall and barely
        // clears the 1e-3 band on this domain.
        const auto masks = policy_comparison(run_low, 0.0);
        report("2. gamma=0.5: mixed comparison region at t=0", pass,
               fmt("frac(q3<q1-1e-3)=%.4f, frac(q3>q1+1e-3)=%.4f, "
                   "tau_min=%.4g (need both fracs >= 0.01); mask at 1e-6: "
                   "+%ld/-%ld",
                   frac_below, frac_above, s.tau_min, masks.plus,
                   masks.minus));
    }

    {
        const InteriorScan sh = scan_interior(run_high);
        const InteriorScan sl = scan_interior(run_low);
        const bool pass = sh.identity_err <= 1e-8 && sl.identity_err <= 1e-8;
        report("3. benchmark identity q3 = q1 + tau/2 at interior optima",
               pass,
               fmt("max |q3-q1-tau/2| = %.3g (gamma=1.5, %ld nodes) / %.3g "
                   "(gamma=0.5, %ld nodes), tol 1e-8",
                   sh.identity_err, sh.identity_nodes, sl.identity_err,
                   sl.identity_nodes));
    }

    {
        bool pass = true;
        std::string detail;
        for (const Solution* run : {&run_high, &run_low}) {
            for (double t : {0.0, 5.0}) {
                const BandScan s =
                    scan_e_differences(run->at_time(t).value);
                const bool ok = s.fd_min >= -0.1 - 1e-3 &&
                                s.fd_max <= 1e-3 &&
                                s.convexity_min >= -1e-6 * 0.1 &&
                                std::max(std::abs(s.fd_min),
                                         std::abs(s.fd_max)) <= 0.1 + 1e-3;
                pass = pass && ok;
                detail += fmt("t=%g:[%.4g,%.4g,conv %.2g] ", t, s.fd_min,
                              s.fd_max, s.convexity_min);
            }
        }
        report("4. e-gradient band, convexity and Lipschitz bound in e",
               pass, detail);
    }

    // --- no-premium-impact variant --------------------------------------
    {
        SolverConfig config = reference_config(0.65, 0.1, 1, 1000);
        config.firm = FirmModel::quadratic_constant_premium(
            5.0, 0.65, FirmMode::LargeNoPremiumImpact);
        const Solution run = solve(config);
        const Snapshot& snap = run.at_time(0.0);
        const GridSpec& g = run.grid;
        long checked = 0, bad = 0;
        double worst = 0.0;
        for (int i = 0; i < g.e_nodes(); ++i) {
            if (g.e_at(i) < 0.0) continue;
            for (int j = 0; j < g.y_nodes(); ++j) {
                if (y_central_difference(snap.value, i, j) > 0.0) continue;
                ++checked;
                const double excess =
                    snap.policy.at(i, j) - snap.benchmark.at(i, j);
                worst = std::max(worst, excess);
                if (excess > 1e-3) ++bad;
            }
        }
        report("5. constant-premium variant stays below the benchmark on "
               "{e>=0, V_y<=0}",
               bad == 0 && checked > 0,
               fmt("%ld violations of %ld nodes, worst excess %.3g (tol "
                   "1e-3)",
                   bad, checked, worst));
    }

    // --- Monte Carlo oracle against the gamma = 0.65 solve --------------
    const auto t_mc = std::chrono::steady_clock::now();
    const Solution run_mid = solve(reference_config(0.65, 0.1, 1, 10));
    const Snapshot& mid0 = run_mid.at_time(0.0);
    const MarketDynamics market_mid =
        MarketDynamics::constant_coefficients(0.1, 0.65, 1.0, 0.1, 10.0);
    const FirmModel firm_mid =
        FirmModel::quadratic_firm(5.0, FirmMode::LargePremiumImpact);
    const MarkovPolicy optimal = MarkovPolicy::from_solution(run_mid);
    const MarkovPolicy idle = MarkovPolicy::constant(0.0);

    Field price_field(run_mid.grid, 0.0);
    for (int i = 0; i < run_mid.grid.e_nodes(); ++i)
        for (int j = 0; j < run_mid.grid.y_nodes(); ++j)
            price_field.at(i, j) = -e_forward_difference(mid0.value, i, j);

    {
        bool pass6 = true, pass7 = true;
        std::string d6, d7;
        int probe_id = 0;
        for (const auto& [e0, y0] : kProbes) {
            SimPlan plan;
            plan.e0 = e0;
            plan.y0 = y0;
            plan.n_paths = 100000;
            plan.n_steps = 1000;
            plan.seed = kSeed + 10 * probe_id;
            const auto records =
                simulate_paths(optimal, market_mid, firm_mid, plan);
            const McEstimate value =
                value_from_records(records, market_mid, plan);
            const McEstimate price =
                price_from_records(records, market_mid, plan);

            const double v_pde = mid0.value.sample_clamped(e0, y0);
            const double gap_v = std::abs(v_pde - value.mean);
            const double tol_v = 3.0 * value.std_error + 0.05;
            if (gap_v > tol_v) pass6 = false;
            d6 += fmt("(%g,%g):%.4f/%.4f ", e0, y0, gap_v, tol_v);

            SimPlan idle_plan = plan;
            idle_plan.seed = kSeed + 500 + 10 * probe_id;
            const McEstimate idle_value =
                evaluate_policy(idle, market_mid, firm_mid, idle_plan);
            if (idle_value.mean > v_pde + 3.0 * idle_value.std_error)
                pass6 = false;

            const double s_pde = price_field.sample_clamped(e0, y0);
            const double gap_s = std::abs(s_pde - price.mean);
            const double tol_s =
                3.0 * price.std_error + 2.0 * run_mid.grid.de();
            if (gap_s > tol_s) pass7 = false;
            d7 += fmt("(%g,%g):%.4f/%.4f ", e0, y0, gap_s, tol_s);
            ++probe_id;
        }
        const double mc_secs = seconds_since(t_mc);
        pass6 = pass6 && mc_secs < 300.0;
        report("6. Monte Carlo value consistency and sub-optimality at the "
               "probes",
               pass6, d6 + fmt("elapsed %.1fs (budget 300s)", mc_secs));
        report("7. allowance-price identity -V_e+ = alpha P(Y_T >= 0)",
               pass7, d7);
    }

    // --- zero-penalty closed form ---------------------------------------
    {
        const Solution run = solve(reference_config(0.65, 0.0, 1, 1000));
        const Snapshot& snap = run.at_time(0.0);
        const GridSpec& g = run.grid;
        const double v_exact = 10.0 / 3.6;
        const double q_exact = 1.0 / 1.8;
        double v_err = 0.0, q_err = 0.0;
        for (int i = 0; i < g.e_nodes(); ++i)
            for (int j = 0; j < g.y_nodes(); ++j) {
                v_err = std::max(v_err,
                                 std::abs(snap.value.at(i, j) - v_exact));
                q_err = std::max(q_err,
                                 std::abs(snap.policy.at(i, j) - q_exact));
            }
        bool walls = true;
        const MarketDynamics market0 =
            MarketDynamics::constant_coefficients(0.1, 0.65, 1.0, 0.0, 10.0);
        const FirmModel firm0 =
            FirmModel::quadratic_firm(5.0, FirmMode::LargePremiumImpact);
        for (int i = 0; i < g.e_nodes(); ++i) {
            walls = walls &&
                    snap.value.at(i, 0) ==
                        lower_y_boundary(0.0, market0, firm0) &&
                    snap.value.at(i, g.y_nodes() - 1) ==
                        upper_y_boundary(0.0, g.e_at(i), market0, firm0);
        }
        const bool pass = v_err <= 0.01 * v_exact && q_err <= 0.01 * q_exact &&
                          walls;
        report("8. zero-penalty run hits the deterministic closed form", pass,
               fmt("max |V - T/(4rho)| = %.2g (tol %.2g), max |q - 1/(2rho)| "
                   "= %.2g, walls exact: %s",
                   v_err, 0.01 * v_exact, q_err, walls ? "yes" : "no"));
    }

    // --- refinement stability --------------------------------------------
    {
        bool pass = true;
        std::string detail;
        for (double gamma : {1.5, 0.5}) {
            const Solution& coarse = gamma == 1.5 ? run_high : run_low;
            const Solution fine = solve(reference_config(gamma, 0.1, 2, 2000));
            const Field& vc = coarse.at_time(0.0).value;
            const Field& vf = fine.at_time(0.0).value;
            for (const auto& [e0, y0] : kProbes) {
                const double a = vc.sample_clamped(e0, y0);
                const double b = vf.sample_clamped(e0, y0);
                const double rel = std::abs(b - a) / std::abs(a);
                pass = pass && rel <= 0.01;
                detail += fmt("g%.1f(%g,%g):%.4f%% ", gamma, e0, y0,
                              100.0 * rel);
            }
        }
        report("9. halving every grid spacing moves probe values by <= 1%",
               pass, detail);
    }

    // --- dual multiplier ---------------------------------------------------
    {
        const FirmModel degenerate = FirmModel::quadratic_constant_premium(
            5.0, 0.0, FirmMode::LargeNoPremiumImpact);
        SimPlan plan;
        plan.e0 = 0.0;
        plan.y0 = 0.0;
        plan.n_paths = 2000;
        plan.n_steps = 100;
        plan.seed = kSeed;
        const auto rep0 =
            dual_multiplier(0.0, idle, market_mid, degenerate, plan);
        const auto rep1 =
            dual_multiplier(1.0, idle, market_mid, degenerate, plan);
        const double err0 = std::abs(rep0.multiplier - 5.0) / 5.0;
        const double err1 =
            std::abs(rep1.multiplier - 5.0 * std::exp(-5.0)) /
            (5.0 * std::exp(-5.0));

        SimPlan budget_plan;
        budget_plan.e0 = 0.0;
        budget_plan.y0 = 0.0;
        budget_plan.n_paths = 100000;
        budget_plan.n_steps = 1000;
        budget_plan.seed = kSeed + 900;
        const auto budget = dual_multiplier(0.0, optimal, market_mid,
                                            firm_mid, budget_plan);
        const bool pass = err0 <= 1e-13 && err1 <= 1e-13 &&
                          budget.budget_gap <= 3.0 * budget.budget_gap_se;
        report("10. dual multiplier closed form and budget-constraint gap",
               pass,
               fmt("rel err %.2g / %.2g (tol 1e-13), budget gap %.3g vs 3SE "
                   "%.3g",
                   err0, err1, budget.budget_gap,
                   3.0 * budget.budget_gap_se));
    }

    std::printf("%d of 10 criteria passed\n", 10 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
