#include "doctest.h"

#include <cmath>

#include "carbon/mc.hpp"

using namespace carbon;

namespace {

MarketDynamics market_of(double mu, double gamma, double beta = 1.0,
                         double alpha = 0.1, double horizon = 10.0) {
    return MarketDynamics::constant_coefficients(mu, gamma, beta, alpha,
                                                 horizon);
}

FirmModel reference_firm() {
    return FirmModel::quadratic_firm(5.0, FirmMode::LargePremiumImpact);
}

SimPlan plan_at(double e0, double y0, long n_paths = 20000,
                int n_steps = 400, std::uint64_t seed = 7) {
    SimPlan p;
    p.e0 = e0;
    p.y0 = y0;
    p.n_paths = n_paths;
    p.n_steps = n_steps;
    p.seed = seed;
    return p;
}

}  // namespace

TEST_CASE("simulate_paths degenerate dynamics") {
    const FirmModel firm = reference_firm();
    const MarkovPolicy idle = MarkovPolicy::constant(0.0);

    SUBCASE("zero volatility gives the deterministic drift line") {
        // gamma must stay positive; use a tiny declared floor instead.
        MarketDynamics market = market_of(0.2, 1e-12);
        const auto records =
            simulate_paths(idle, market, firm, plan_at(1.0, -0.5, 64, 128));
        for (const auto& r : records) {
            CHECK(r.terminal_y == doctest::Approx(-0.5 + 0.2 * 10.0)
                                      .epsilon(1e-6));
            CHECK(r.terminal_e == doctest::Approx(1.0));
            CHECK(r.reward_integral == 0.0);
            CHECK(r.premium_sq_integral == 0.0);
            CHECK(r.premium_dw_integral == 0.0);
        }
    }

    SUBCASE("constant control matches the gaussian law") {
        const double c = 0.4, gamma = 0.65, mu = 0.1, T = 10.0;
        const MarketDynamics market = market_of(mu, gamma);
        const auto records = simulate_paths(MarkovPolicy::constant(c), market,
                                            firm, plan_at(0.0, 0.0));
        double mean_y = 0.0;
        for (const auto& r : records) mean_y += r.terminal_y;
        mean_y /= static_cast<double>(records.size());
        const double want = (mu + (1.0 - gamma) * c) * T;
        const double se = gamma * std::sqrt(T) /
                          std::sqrt(static_cast<double>(records.size()));
        CHECK(std::abs(mean_y - want) <= 3.0 * se);
        for (const auto& r : records)
            CHECK(r.terminal_e == doctest::Approx(c * T).epsilon(1e-9));
    }
}

TEST_CASE("evaluate_policy closed forms") {
    const FirmModel firm = reference_firm();
    const MarkovPolicy idle = MarkovPolicy::constant(0.0);

    SUBCASE("no penalty, no production: exactly zero") {
        const MarketDynamics market = market_of(0.1, 0.65, 1.0, 0.0);
        const auto est =
            evaluate_policy(idle, market, firm, plan_at(1.0, 0.0, 500, 50));
        CHECK(est.mean == 0.0);
        CHECK(est.std_error == 0.0);
    }

    SUBCASE("zero initial emission: zero on every path") {
        const MarketDynamics market = market_of(0.1, 0.65);
        const auto est =
            evaluate_policy(idle, market, firm, plan_at(0.0, -1.0, 500, 50));
        CHECK(est.mean == 0.0);
    }

    SUBCASE("gaussian indicator value") {
        // Y_T ~ N(0, 0.65^2 * 10), P(Y_T >= 0) = 1/2, J = -alpha/2.
        const MarketDynamics market = market_of(0.1, 0.65);
        const auto est = evaluate_policy(idle, market, firm,
                                         plan_at(1.0, -1.0, 40000, 400));
        CHECK(std::abs(est.mean - (-0.05)) <= 3.0 * est.std_error);
    }
}

TEST_CASE("allowance price estimates") {
    const FirmModel firm = reference_firm();
    const MarkovPolicy idle = MarkovPolicy::constant(0.0);

    SUBCASE("deep above the cap: price near alpha") {
        const MarketDynamics market = market_of(0.1, 0.65);
        const auto est = estimate_allowance_price(
            idle, market, firm, plan_at(0.0, 50.0, 2000, 100));
        CHECK(est.mean == doctest::Approx(0.1));
    }

    SUBCASE("gaussian transition probability") {
        const MarketDynamics market = market_of(0.1, 0.65);
        const auto est = estimate_allowance_price(
            idle, market, firm, plan_at(0.0, -1.0, 40000, 400));
        CHECK(std::abs(est.mean - 0.05) <= 3.0 * est.std_error + 1e-3);
    }

    SUBCASE("zero penalty: price is identically zero") {
        const MarketDynamics market = market_of(0.1, 0.65, 1.0, 0.0);
        const auto est = estimate_allowance_price(
            idle, market, firm, plan_at(0.0, 0.0, 500, 50));
        CHECK(est.mean == 0.0);
    }
}

TEST_CASE("dual multiplier and budget constraint") {
    const MarketDynamics market = market_of(0.1, 0.65);
    const FirmModel firm = reference_firm();
    const MarkovPolicy idle = MarkovPolicy::constant(0.0);

    SUBCASE("degenerate lambda: closed form to machine precision") {
        // q = 0 makes lambda vanish; e0 = 0 makes B_T vanish.
        const auto rep0 = dual_multiplier(0.0, idle, market, firm,
                                          plan_at(0.0, 0.0, 1000, 50));
        CHECK(rep0.multiplier == doctest::Approx(5.0).epsilon(1e-14));
        CHECK(rep0.budget_gap <= 1e-14);

        const auto rep1 = dual_multiplier(1.0, idle, market, firm,
                                          plan_at(0.0, 0.0, 1000, 50));
        CHECK(rep1.multiplier ==
              doctest::Approx(5.0 * std::exp(-5.0)).epsilon(1e-14));
    }

    SUBCASE("budget gap is sampling noise on any policy") {
        const auto rep = dual_multiplier(
            0.3, MarkovPolicy::constant(0.4), market, firm,
            plan_at(0.5, -0.5, 20000, 200, 17));
        CHECK(rep.budget_gap <= 3.0 * rep.budget_gap_se);
        CHECK(rep.multiplier > 0.0);
    }
}

TEST_CASE("determinism across thread counts") {
    const MarketDynamics market = market_of(0.1, 0.65);
    const FirmModel firm = reference_firm();
    const MarkovPolicy policy = MarkovPolicy::constant(0.3);

    SimPlan serial = plan_at(0.5, -0.5, 5000, 100, 999);
    serial.n_threads = 1;
    SimPlan parallel = serial;
    parallel.n_threads = 4;

    const auto a = evaluate_policy(policy, market, firm, serial);
    const auto b = evaluate_policy(policy, market, firm, parallel);
    CHECK(a.mean == b.mean);
    CHECK(a.std_error == b.std_error);

    const auto c = evaluate_policy(policy, market, firm, serial);
    CHECK(a.mean == c.mean);

    SimPlan other = serial;
    other.seed = 1000;
    const auto d = evaluate_policy(policy, market, firm, other);
    CHECK(a.mean != d.mean);
}

TEST_CASE("terminal law has no atom at the cap") {
    const MarketDynamics market = market_of(0.1, 0.65);
    const FirmModel firm = reference_firm();
    const auto records = simulate_paths(MarkovPolicy::constant(0.3), market,
                                        firm, plan_at(0.0, -2.0, 100000, 200));
    for (const double delta : {1e-2, 1e-3}) {
        long hits = 0;
        for (const auto& r : records)
            if (std::abs(r.terminal_y) < delta) ++hits;
        const double frac = static_cast<double>(hits) /
                            static_cast<double>(records.size());
        // Density of Y_T is bounded by ~0.2 here; 0.6 leaves noise room.
        CHECK(frac <= 0.6 * delta);
    }
}

TEST_CASE("grid policy lookup clamps to the box") {
    SolverConfig config;
    config.grid.e_half_width = 1.0;
    config.grid.y_half_width = 1.0;
    config.grid.e_half_nodes = 8;
    config.grid.y_half_nodes = 8;
    config.grid.time_steps = 10;
    config.grid.horizon = 1.0;
    config.market = market_of(0.1, 0.65, 1.0, 0.1, 1.0);
    config.firm = reference_firm();
    config.store_every = 2;
    const Solution solution = solve(config);
    const MarkovPolicy policy = MarkovPolicy::from_solution(solution);

    const Snapshot& snap = solution.at_time(0.0);
    const GridSpec& g = config.grid;
    CHECK(policy(0.0, 99.0, 99.0) ==
          doctest::Approx(snap.policy.at(g.e_nodes() - 1, g.y_nodes() - 1)));
    CHECK(policy(0.0, -99.0, -99.0) ==
          doctest::Approx(snap.policy.at(0, 0)));

    // Floor lookup in time: between stored levels the earlier one is used.
    const Snapshot& later = solution.at_time(0.4);
    CHECK(policy(0.45, 0.0, 0.0) ==
          doctest::Approx(later.policy.at(g.e_index(0.0), g.y_index(0.0))));

    CHECK_THROWS_AS(MarkovPolicy::constant(-1.0), std::domain_error);
}

TEST_CASE("estimates against the solver on a coarse grid") {
    // The value function dominates every admissible policy.
    SolverConfig config;
    config.grid.e_half_width = 3.0;
    config.grid.y_half_width = 6.0;
    config.grid.e_half_nodes = 25;
    config.grid.y_half_nodes = 30;
    config.grid.time_steps = 200;
    config.grid.horizon = 10.0;
    config.market = market_of(0.1, 0.65);
    config.firm = reference_firm();
    config.store_every = 10;
    const Solution solution = solve(config);
    const Snapshot& snap = solution.at_time(0.0);

    const MarkovPolicy idle = MarkovPolicy::constant(0.0);
    const MarkovPolicy bau = MarkovPolicy::constant(0.5);
    for (const auto& [e0, y0] : {std::pair{0.0, 0.0}, {1.0, -1.0}}) {
        const double v = snap.value.sample_clamped(e0, y0);
        const auto j_idle = evaluate_policy(idle, config.market, config.firm,
                                            plan_at(e0, y0, 20000, 250));
        const auto j_bau = evaluate_policy(bau, config.market, config.firm,
                                           plan_at(e0, y0, 20000, 250));
        CHECK(j_idle.mean <= v + 3.0 * j_idle.std_error);
        CHECK(j_bau.mean <= v + 3.0 * j_bau.std_error);
    }
}

TEST_CASE("plan validation") {
    SimPlan p;
    p.n_paths = 1;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = SimPlan{};
    p.n_steps = 0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
