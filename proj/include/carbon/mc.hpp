#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "carbon/model.hpp"
#include "carbon/solver.hpp"

// Independent Monte Carlo verification of the PDE solution: policy
// evaluation, allowance-price estimation and the exponential-utility dual
// multiplier.  Paths are simulated directly under the policy-dependent
// dynamics the value function integrates against, so no likelihood-ratio
// weighting enters the estimators; the change-of-measure density is
// accumulated only for the dual-multiplier check.

namespace carbon {

// Markov production policy q(t, e, y) >= 0.  Grid-backed policies are
// bilinear in (e, y), clamped to the box, and piecewise constant in time
// over the stored levels (floor lookup).
class MarkovPolicy {
  public:
    static MarkovPolicy from_function(
        std::function<double(double t, double e, double y)> q);
    static MarkovPolicy constant(double q);
    static MarkovPolicy from_solution(const Solution& solution);

    double operator()(double t, double e, double y) const {
        return fn_(t, e, y);
    }

  private:
    std::function<double(double, double, double)> fn_;
};

struct SimPlan {
    double t0 = 0.0;
    double y0 = 0.0;
    double e0 = 0.0;
    long n_paths = 100000;  // >= 2
    int n_steps = 1000;     // >= 1
    std::uint64_t seed = 0;
    int n_threads = 0;  // 0 = hardware concurrency

    void validate() const;
};

// Per-path terminal state and accumulators (left-endpoint rule):
// Y_T, E_T, integral of the effective reward, of lambda^2 dt, of lambda dW.
struct PathRecord {
    double terminal_y = 0.0;
    double terminal_e = 0.0;
    double reward_integral = 0.0;
    double premium_sq_integral = 0.0;
    double premium_dw_integral = 0.0;
};

std::vector<PathRecord> simulate_paths(const MarkovPolicy& policy,
                                       const MarketDynamics& market,
                                       const FirmModel& firm,
                                       const SimPlan& plan);

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;  // sample std / sqrt(n)
    long n_paths = 0;
    int n_steps = 0;
    std::uint64_t seed = 0;
};

// J_q = E[ integral pi~ dt - alpha 1{Y_T >= 0} E_T ].
McEstimate evaluate_policy(const MarkovPolicy& policy,
                           const MarketDynamics& market, const FirmModel& firm,
                           const SimPlan& plan);
McEstimate value_from_records(const std::vector<PathRecord>& records,
                              const MarketDynamics& market,
                              const SimPlan& plan);

// S_t = alpha P(Y_T >= 0) under the supplied (ideally optimal) policy,
// binomial standard error.
McEstimate estimate_allowance_price(const MarkovPolicy& policy,
                                    const MarketDynamics& market,
                                    const FirmModel& firm,
                                    const SimPlan& plan);
McEstimate price_from_records(const std::vector<PathRecord>& records,
                              const MarketDynamics& market,
                              const SimPlan& plan);

struct DualReport {
    double multiplier = 0.0;     // y_q > 0
    double budget_gap = 0.0;     // | E[(U')^{-1}(y_q dQ/dP)] - (x + E[B_T]) |
    double budget_gap_se = 0.0;  // SE of the per-path gap term
    long n_paths = 0;
    std::uint64_t seed = 0;
};

// Exponential-utility dual multiplier from the budget constraint:
// y_q = a exp(-a (x + E[B_T]) - E[ln dQ/dP]), with B_T the running profit
// without the entropy bonus, and the budget gap evaluated on the same paths.
DualReport dual_multiplier(double initial_wealth, const MarkovPolicy& policy,
                           const MarketDynamics& market, const FirmModel& firm,
                           const SimPlan& plan);
DualReport dual_from_records(double initial_wealth,
                             const std::vector<PathRecord>& records,
                             const MarketDynamics& market,
                             const FirmModel& firm, const SimPlan& plan);

// CSV rows "quantity,mean,std_error,n_paths,seed".
void write_estimate_csv_header(std::ostream& out);
void write_estimate_csv_row(std::ostream& out, const std::string& quantity,
                            const McEstimate& estimate);

}  // namespace carbon
