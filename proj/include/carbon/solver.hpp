#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "carbon/grid.hpp"
#include "carbon/model.hpp"

// Backward-in-time Trotter-Kato splitting for the production HJB equation.
// Each step over [t_n, t_{n+1}] first diffuses in y (implicit tridiagonal
// solves per e-row), then freezes the control from the diffused gradients and
// applies a semi-Lagrangian transport update that mirrors a one-step dynamic
// programming principle.

namespace carbon {

// Numerical failure inside a solve; the message names the time level.
class SolveError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Disagreement between the policy-difference mask and the tau-sign mask
// where they must coincide; flags a discretization bug.
class ConsistencyError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

using BoundaryFn = std::function<double(double t, double e)>;

struct SolverConfig {
    GridSpec grid;
    MarketDynamics market;
    FirmModel firm;
    int store_every = 100;         // snapshot stride in time levels, >= 1
    double diffusion_theta = 1.0;  // time weighting of the heat step, [1/2, 1]
    double mask_epsilon = 1e-6;    // dead band of the comparison mask

    void validate() const;
};

// Stored state at one time level.  policy/benchmark/tau all derive from the
// same one-sided gradients of `value`, so the quadratic-family identity
// q3 = q1 + tau/2 holds node by node wherever both policies are interior.
struct Snapshot {
    int level = 0;
    double time = 0.0;
    Field value;      // V
    Field policy;     // q3 (or q2 without premium impact)
    Field benchmark;  // q1 from S = clamp(-V_e+, 0, alpha)
    Field tau;        // correction term
    std::vector<std::int8_t> mask;  // sign(policy - benchmark), e-major
    double max_residual = 0.0;      // discrete PDE residual, interior max
    double price_min = 0.0;         // min of -V_e+
    double price_max = 0.0;         // max of -V_e+
};

struct Solution {
    GridSpec grid;
    double alpha = 0.0;        // penalty used by the run
    bool identity_masks = false;  // q3 = q1 + tau/2 holds for this firm
    std::vector<Snapshot> snapshots;  // ascending in time; t = 0 always held

    const Snapshot& at_time(double t) const;   // exact stored level
    const Snapshot& floor_time(double t) const;  // last stored time <= t
};

// One backward diffusion half-step dV/dt + gamma^2/2 V_yy = 0 over
// [t_to, t_from], independently per e-row, theta-weighted in time.  Dirichlet
// walls hold the boundary functions at t_from, the time level of the data
// being diffused; the transport half advances them to t_to.
Field heat_half_step(const Field& field, const MarketDynamics& market,
                     double t_from, double t_to, const BoundaryFn& bc_upper,
                     const BoundaryFn& bc_lower, double theta = 1.0);

// Pointwise Hamiltonian maximizer from the field's one-sided gradients.
Field control_field(const Field& field, const MarketDynamics& market,
                    const FirmModel& firm);

// Semi-Lagrangian update with the control frozen at phi: trace the
// characteristic foot (e + eta dt, y + (mu + beta eta - gamma lambda) dt),
// interpolate, and accrue the running reward.  Feet beyond the y-walls read
// the wall rows (which carry the ABC values); feet beyond +L_e extend
// affinely.
Field transport_half_step(const Field& field, const Field& phi,
                          const MarketDynamics& market, const FirmModel& firm,
                          double t_from, double t_to);

Solution solve(const SolverConfig& config);

struct ComparisonMasks {
    std::vector<std::int8_t> policy_mask;  // sign(q3 - q1) with dead band eps
    std::vector<std::int8_t> tau_mask;     // sign(tau) with dead band 2 eps
    long plus = 0, zero = 0, minus = 0;    // policy_mask counts
};

// Ternary masks at a stored level; throws ConsistencyError when the two
// masks disagree at an interior node where both policies are interior and
// the benchmark price was not clamped.
ComparisonMasks policy_comparison(const Solution& solution, double t_level,
                                  double eps = 1e-6);

// One CSV per stored field per level ({field}_{t}.csv) plus diagnostics.txt.
void export_solution(const Solution& solution,
                     const std::filesystem::path& dir);

}  // namespace carbon
