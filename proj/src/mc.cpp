#include "carbon/mc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>
#include <thread>

#include "carbon/rng.hpp"

namespace carbon {
namespace {

// Fixed-order compensated sum, reproducible regardless of thread count.
class KahanSum {
  public:
    void add(double x) {
        const double y = x - comp_;
        const double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

template <typename PerPath>
McEstimate reduce_records(const std::vector<PathRecord>& records,
                          const SimPlan& plan, PerPath value_of) {
    KahanSum sum;
    for (const PathRecord& r : records) sum.add(value_of(r));
    const double mean = sum.value() / static_cast<double>(records.size());
    KahanSum varsum;
    for (const PathRecord& r : records) {
        const double d = value_of(r) - mean;
        varsum.add(d * d);
    }
    McEstimate est;
    est.mean = mean;
    est.std_error = std::sqrt(varsum.value() /
                              (static_cast<double>(records.size()) - 1.0)) /
                    std::sqrt(static_cast<double>(records.size()));
    est.n_paths = static_cast<long>(records.size());
    est.n_steps = plan.n_steps;
    est.seed = plan.seed;
    return est;
}

}  // namespace

MarkovPolicy MarkovPolicy::from_function(
    std::function<double(double, double, double)> q) {
    MarkovPolicy p;
    p.fn_ = std::move(q);
    return p;
}

MarkovPolicy MarkovPolicy::constant(double q) {
    if (q < 0.0) throw std::domain_error("policy must be nonnegative");
    return from_function([q](double, double, double) { return q; });
}

MarkovPolicy MarkovPolicy::from_solution(const Solution& solution) {
    if (solution.snapshots.empty())
        throw std::invalid_argument("solution holds no snapshots");
    struct Stack {
        std::vector<double> times;
        std::vector<Field> fields;
    };
    auto stack = std::make_shared<Stack>();
    for (const Snapshot& s : solution.snapshots) {
        stack->times.push_back(s.time);
        stack->fields.push_back(s.policy);
    }
    return from_function([stack](double t, double e, double y) {
        // Floor lookup: last stored level at or before t.
        const auto& ts = stack->times;
        size_t k = std::upper_bound(ts.begin(), ts.end(), t) - ts.begin();
        k = k == 0 ? 0 : k - 1;
        return std::max(stack->fields[k].sample_clamped(e, y), 0.0);
    });
}

void SimPlan::validate() const {
    if (n_paths < 2) throw std::invalid_argument("need at least two paths");
    if (n_steps < 1) throw std::invalid_argument("need at least one step");
    if (!(t0 >= 0.0)) throw std::invalid_argument("t0 must be >= 0");
}

std::vector<PathRecord> simulate_paths(const MarkovPolicy& policy,
                                       const MarketDynamics& market,
                                       const FirmModel& firm,
                                       const SimPlan& plan) {
    plan.validate();
    market.validate();
    firm.validate();
    if (!(plan.t0 < market.horizon))
        throw std::invalid_argument("t0 must precede the horizon");

    const double dt = (market.horizon - plan.t0) / plan.n_steps;
    const double sqrt_dt = std::sqrt(dt);
    std::vector<PathRecord> records(plan.n_paths);

    const auto run_block = [&](long lo, long hi) {
        for (long p = lo; p < hi; ++p) {
            GaussianStream normals(
                Xoshiro256pp::path_stream(plan.seed,
                                          static_cast<std::uint64_t>(p)));
            double y = plan.y0;
            double e = plan.e0;
            KahanSum reward, lam_sq, lam_dw;
            for (int m = 0; m < plan.n_steps; ++m) {
                const double t = plan.t0 + m * dt;
                const double q = policy(t, e, y);
                const double eta = firm.emission(t, q);
                const double lam = firm.premium(t, q);
                const double g = market.gamma_vol(t, y);
                const double dw = sqrt_dt * normals.next();

                reward.add(effective_running_reward(firm, t, q) * dt);
                lam_sq.add(lam * lam * dt);
                lam_dw.add(lam * dw);

                y += (market.mu(t, y) + market.beta * eta - g * lam) * dt +
                     g * dw;
                e += eta * dt;
            }
            records[p] = {y, e, reward.value(), lam_sq.value(),
                          lam_dw.value()};
        }
    };

    long workers = plan.n_threads > 0
                       ? plan.n_threads
                       : static_cast<long>(std::thread::hardware_concurrency());
    workers = std::max<long>(1, std::min<long>(workers, plan.n_paths));
    if (workers == 1) {
        run_block(0, plan.n_paths);
    } else {
        std::vector<std::thread> pool;
        const long chunk = (plan.n_paths + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const long lo = w * chunk;
            const long hi = std::min<long>(lo + chunk, plan.n_paths);
            if (lo >= hi) break;
            pool.emplace_back(run_block, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    return records;
}

McEstimate value_from_records(const std::vector<PathRecord>& records,
                              const MarketDynamics& market,
                              const SimPlan& plan) {
    const double alpha = market.alpha;
    return reduce_records(records, plan, [alpha](const PathRecord& r) {
        const double penalty =
            r.terminal_y >= 0.0 ? alpha * r.terminal_e : 0.0;
        return r.reward_integral - penalty;
    });
}

McEstimate evaluate_policy(const MarkovPolicy& policy,
                           const MarketDynamics& market, const FirmModel& firm,
                           const SimPlan& plan) {
    return value_from_records(simulate_paths(policy, market, firm, plan),
                              market, plan);
}

McEstimate price_from_records(const std::vector<PathRecord>& records,
                              const MarketDynamics& market,
                              const SimPlan& plan) {
    long hits = 0;
    for (const PathRecord& r : records)
        if (r.terminal_y >= 0.0) ++hits;
    const double n = static_cast<double>(records.size());
    const double p = hits / n;
    McEstimate est;
    est.mean = market.alpha * p;
    est.std_error = market.alpha * std::sqrt(p * (1.0 - p) / n);
    est.n_paths = static_cast<long>(records.size());
    est.n_steps = plan.n_steps;
    est.seed = plan.seed;
    return est;
}

McEstimate estimate_allowance_price(const MarkovPolicy& policy,
                                    const MarketDynamics& market,
                                    const FirmModel& firm,
                                    const SimPlan& plan) {
    return price_from_records(simulate_paths(policy, market, firm, plan),
                              market, plan);
}

DualReport dual_from_records(double initial_wealth,
                             const std::vector<PathRecord>& records,
                             const MarketDynamics& market,
                             const FirmModel& firm, const SimPlan& plan) {
    const double a = firm.risk_aversion;
    if (!(a > 0.0)) throw std::domain_error("risk aversion must be positive");
    const double alpha = market.alpha;
    const bool entropy = firm.premium_impact();

    // B_T = running profit without the entropy bonus, minus the penalty.
    const auto profit_of = [&](const PathRecord& r) {
        const double base =
            entropy ? r.reward_integral - r.premium_sq_integral / (2.0 * a)
                    : r.reward_integral;
        const double penalty =
            r.terminal_y >= 0.0 ? alpha * r.terminal_e : 0.0;
        return base - penalty;
    };

    KahanSum b_sum, lam_sq_sum;
    for (const PathRecord& r : records) {
        b_sum.add(profit_of(r));
        lam_sq_sum.add(r.premium_sq_integral);
    }
    const double n = static_cast<double>(records.size());
    const double mean_b = b_sum.value() / n;
    const double mean_lam_sq = lam_sq_sum.value() / n;

    // Under the simulated measure, E[ln dQ/dP] = 1/2 E[int lambda^2 dt].
    const double multiplier =
        a * std::exp(-a * (initial_wealth + mean_b) - 0.5 * mean_lam_sq);

    // (U')^{-1}(z) = -ln(z / a) / a, applied to y_q * dQ/dP on the same
    // paths; the gap against x + E[B_T] is pure sampling noise.
    const double ln_mult = std::log(multiplier / a);
    KahanSum gap_sum;
    std::vector<double> gap_terms(records.size());
    for (size_t k = 0; k < records.size(); ++k) {
        const PathRecord& r = records[k];
        const double ln_density =
            -r.premium_dw_integral + 0.5 * r.premium_sq_integral;
        const double inv_marginal = -(ln_mult + ln_density) / a;
        gap_terms[k] = inv_marginal - profit_of(r) - initial_wealth;
        gap_sum.add(gap_terms[k]);
    }
    const double mean_gap = gap_sum.value() / n;
    KahanSum varsum;
    for (double g : gap_terms) varsum.add((g - mean_gap) * (g - mean_gap));

    DualReport rep;
    rep.multiplier = multiplier;
    rep.budget_gap = std::abs(mean_gap);
    rep.budget_gap_se = std::sqrt(varsum.value() / (n - 1.0)) / std::sqrt(n);
    rep.n_paths = static_cast<long>(records.size());
    rep.seed = plan.seed;
    return rep;
}

DualReport dual_multiplier(double initial_wealth, const MarkovPolicy& policy,
                           const MarketDynamics& market, const FirmModel& firm,
                           const SimPlan& plan) {
    return dual_from_records(initial_wealth,
                             simulate_paths(policy, market, firm, plan),
                             market, firm, plan);
}

void write_estimate_csv_header(std::ostream& out) {
    out << "quantity,mean,std_error,n_paths,seed\n";
}

void write_estimate_csv_row(std::ostream& out, const std::string& quantity,
                            const McEstimate& estimate) {
    char line[192];
    std::snprintf(line, sizeof(line), "%s,%.17g,%.17g,%ld,%llu\n",
                  quantity.c_str(), estimate.mean, estimate.std_error,
                  estimate.n_paths,
                  static_cast<unsigned long long>(estimate.seed));
    out << line;
}

}  // namespace carbon
