#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

// Economic primitives of the allowance-market production problem: the
// emission-perception dynamics, the firm's profit/emission/risk-premium
// curves, the Hamiltonian maximization that yields the optimal production
// rate, the small-producer benchmark and the correction term that separates
// the two.

namespace carbon {

// Raised when a model violates its structural assumptions (e.g. a convex
// effective objective where a concave one is required).
class ModelError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class FirmMode {
    SmallProducer,         // price taker, no state feedback
    LargeNoPremiumImpact,  // moves the perception drift, not the risk premium
    LargePremiumImpact,    // moves drift and risk premium
};

// Coefficient of (t, y): drift/volatility surfaces.
using StateFn = std::function<double(double t, double y)>;
// Curve of (t, q): profit, emission and premium schedules.
using CurveFn = std::function<double(double t, double q)>;

// Emission-perception diffusion dY = mu dt + gamma dW plus the market
// parameters: production impact beta on the drift, penalty alpha per tonne,
// horizon T.  The cap itself is fixed at zero.
struct MarketDynamics {
    StateFn mu;
    StateFn gamma_vol;
    double gamma_floor = 0.0;  // declared uniform lower bound c, gamma >= c > 0
    double beta = 1.0;         // >= 0
    double alpha = 0.1;        // >= 0, penalty per tonne
    double horizon = 10.0;     // > 0

    static MarketDynamics constant_coefficients(double mu0, double gamma0,
                                                double beta, double alpha,
                                                double horizon);
    void validate() const;  // throws std::invalid_argument
};

// pi(q) = q(1-q), eta(q) = q, lambda(q) = slope*q + level.  Enables the
// closed-form maximizer used in the solver's hot loop.
struct QuadraticFamily {
    double lambda_slope = 1.0;
    double lambda_level = 0.0;
};

struct FirmModel {
    FirmMode mode = FirmMode::LargePremiumImpact;
    double risk_aversion = 5.0;  // a > 0 in U(x) = -exp(-a x)

    CurveFn profit, profit_dq;        // pi, strictly concave in q, pi(t,0)=0
    CurveFn emission, emission_dq;    // eta, convex, strictly increasing
    CurveFn premium, premium_dq;      // lambda, concave, nondecreasing

    std::optional<QuadraticFamily> quadratic;

    // The quadratic example firm: pi=q(1-q), eta=lambda=q.  Rejects
    // risk_aversion <= 1/2, where the effective reward loses concavity.
    static FirmModel quadratic_firm(double risk_aversion, FirmMode mode);
    // Quadratic profit/emission with a production-independent premium.
    static FirmModel quadratic_constant_premium(
        double risk_aversion, double lambda_level,
        FirmMode mode = FirmMode::LargeNoPremiumImpact);

    // rho = 1 - 1/(2a); meaningful for the quadratic example firm.
    double rho_coef() const { return 1.0 - 0.5 / risk_aversion; }

    bool premium_impact() const { return mode == FirmMode::LargePremiumImpact; }
    void validate() const;
};

// pi(t,q) plus the entropy bonus lambda^2/(2a) when the firm moves the risk
// premium; plain pi otherwise.  q must be nonnegative.
double effective_running_reward(const FirmModel& firm, double t, double q);

// -alpha * e when y >= 0, else 0.  The y = 0 node uses the discrete
// convention 1{y >= 0}.
double terminal_payoff(double alpha, double y, double e);

struct HamiltonianPoint {
    double q_star = 0.0;      // maximizer, >= 0
    double theta_star = 0.0;  // maximum of the Hamiltonian integrand
};

// Maximizes theta(q) = pi~(t,q) + eta(t,q)(p_e + beta p_y)
//                      - gamma(t,y) lambda(t,q) p_y over q >= 0.
// With a production-independent premium the last term is a constant and the
// maximizer reduces to the no-premium-impact characterization.
HamiltonianPoint hamiltonian_argmax(const FirmModel& firm,
                                    const MarketDynamics& market, double t,
                                    double y, double p_e, double p_y);

// Root of dpi/dq = S deta/dq, clipped at zero.  S must lie in [0, alpha].
double small_producer_policy(const FirmModel& firm,
                             const MarketDynamics& market, double t, double S);

// tau = (beta deta/dq - gamma dlambda/dq) p_y + (1/a) dlambda/dq lambda(q3),
// the wedge between the large-impact and small-producer first-order
// conditions.  tau >= 0 forces q3 >= q1.
double correction_tau(const FirmModel& firm, const MarketDynamics& market,
                      double t, double y, double q3, double p_y);

}  // namespace carbon
