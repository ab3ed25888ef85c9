#include "carbon/model.hpp"

#include <cmath>

namespace carbon {
namespace {

constexpr double kRootTol = 1e-10;

// Effective concavity of the quadratic-family objective: coefficient of -q^2
// in pi~(q).  1 - slope^2/(2a) with the entropy bonus, 1 without.
double effective_quad_coef(const FirmModel& firm) {
    const double s = firm.quadratic->lambda_slope;
    return firm.premium_impact()
               ? 1.0 - s * s / (2.0 * firm.risk_aversion)
               : 1.0;
}

// Safeguarded bisection for the root of a strictly decreasing g on q >= 0.
// Returns 0 when g(0) <= 0; expands the bracket geometrically otherwise.
double decreasing_root(const std::function<double(double)>& g) {
    if (g(0.0) <= 0.0) return 0.0;
    double lo = 0.0, hi = 1.0;
    int expand = 0;
    while (g(hi) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (++expand > 200)
            throw ModelError("objective derivative never turns negative; "
                             "maximizer is unbounded");
    }
    while (hi - lo > kRootTol) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

MarketDynamics MarketDynamics::constant_coefficients(double mu0, double gamma0,
                                                     double beta, double alpha,
                                                     double horizon) {
    MarketDynamics m;
    m.mu = [mu0](double, double) { return mu0; };
    m.gamma_vol = [gamma0](double, double) { return gamma0; };
    m.gamma_floor = gamma0;
    m.beta = beta;
    m.alpha = alpha;
    m.horizon = horizon;
    m.validate();
    return m;
}

void MarketDynamics::validate() const {
    if (!mu || !gamma_vol)
        throw std::invalid_argument("market dynamics need mu and gamma_vol");
    if (!(gamma_floor > 0.0))
        throw std::invalid_argument("gamma_vol must be bounded below by a "
                                    "positive constant");
    // alpha = 0 is admitted: it is the no-penalty closed-form configuration.
    if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be > 0");
    if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
}

FirmModel FirmModel::quadratic_firm(double risk_aversion, FirmMode mode) {
    if (!(risk_aversion > 0.5))
        throw std::invalid_argument(
            "quadratic firm needs risk_aversion > 1/2 (rho in (0,1))");
    FirmModel f;
    f.mode = mode;
    f.risk_aversion = risk_aversion;
    f.profit = [](double, double q) { return q * (1.0 - q); };
    f.profit_dq = [](double, double q) { return 1.0 - 2.0 * q; };
    f.emission = [](double, double q) { return q; };
    f.emission_dq = [](double, double) { return 1.0; };
    f.premium = [](double, double q) { return q; };
    f.premium_dq = [](double, double) { return 1.0; };
    f.quadratic = QuadraticFamily{1.0, 0.0};
    return f;
}

FirmModel FirmModel::quadratic_constant_premium(double risk_aversion,
                                                double lambda_level,
                                                FirmMode mode) {
    if (!(risk_aversion > 0.0))
        throw std::invalid_argument("risk_aversion must be > 0");
    if (!(lambda_level >= 0.0))
        throw std::invalid_argument("lambda level must be >= 0");
    FirmModel f;
    f.mode = mode;
    f.risk_aversion = risk_aversion;
    f.profit = [](double, double q) { return q * (1.0 - q); };
    f.profit_dq = [](double, double q) { return 1.0 - 2.0 * q; };
    f.emission = [](double, double q) { return q; };
    f.emission_dq = [](double, double) { return 1.0; };
    f.premium = [lambda_level](double, double) { return lambda_level; };
    f.premium_dq = [](double, double) { return 0.0; };
    f.quadratic = QuadraticFamily{0.0, lambda_level};
    return f;
}

void FirmModel::validate() const {
    if (!(risk_aversion > 0.0))
        throw std::invalid_argument("risk_aversion must be > 0");
    if (!profit || !profit_dq || !emission || !emission_dq || !premium ||
        !premium_dq)
        throw std::invalid_argument("firm model needs pi, eta, lambda and "
                                    "their q-derivatives");
}

double effective_running_reward(const FirmModel& firm, double t, double q) {
    if (q < 0.0)
        throw std::domain_error("production rate must be nonnegative");
    if (firm.quadratic) {
        const double base = q * (1.0 - q);
        if (!firm.premium_impact()) return base;
        const double lam =
            firm.quadratic->lambda_slope * q + firm.quadratic->lambda_level;
        return base + lam * lam / (2.0 * firm.risk_aversion);
    }
    const double base = firm.profit(t, q);
    if (!firm.premium_impact()) return base;
    const double lam = firm.premium(t, q);
    return base + lam * lam / (2.0 * firm.risk_aversion);
}

double terminal_payoff(double alpha, double y, double e) {
    return y >= 0.0 ? -alpha * e : 0.0;
}

HamiltonianPoint hamiltonian_argmax(const FirmModel& firm,
                                    const MarketDynamics& market, double t,
                                    double y, double p_e, double p_y) {
    const double gamma = market.gamma_vol(t, y);
    const double slope_e = p_e + market.beta * p_y;

    if (firm.quadratic) {
        const double s = firm.quadratic->lambda_slope;
        const double l = firm.quadratic->lambda_level;
        const double a = firm.risk_aversion;
        const double rho_eff = effective_quad_coef(firm);
        if (!(rho_eff > 0.0))
            throw ModelError("effective objective is not concave "
                             "(nonpositive leading coefficient)");
        const bool entropy = firm.premium_impact();
        const double lin =
            1.0 + (entropy ? s * l / a : 0.0) + slope_e - gamma * s * p_y;
        const double cst =
            (entropy ? l * l / (2.0 * a) : 0.0) - gamma * l * p_y;
        HamiltonianPoint out;
        out.q_star = lin > 0.0 ? lin / (2.0 * rho_eff) : 0.0;
        out.theta_star = cst + out.q_star * (lin - rho_eff * out.q_star);
        return out;
    }

    const auto dtheta = [&](double q) {
        double d = firm.profit_dq(t, q) + firm.emission_dq(t, q) * slope_e -
                   gamma * firm.premium_dq(t, q) * p_y;
        if (firm.premium_impact())
            d += firm.premium(t, q) * firm.premium_dq(t, q) /
                 firm.risk_aversion;
        return d;
    };
    HamiltonianPoint out;
    out.q_star = decreasing_root(dtheta);
    out.theta_star = effective_running_reward(firm, t, out.q_star) +
                     firm.emission(t, out.q_star) * slope_e -
                     gamma * firm.premium(t, out.q_star) * p_y;
    return out;
}

double small_producer_policy(const FirmModel& firm,
                             const MarketDynamics& market, double t,
                             double S) {
    if (!(S >= 0.0) || !(S <= market.alpha))
        throw std::domain_error("allowance price must lie in [0, alpha]");
    if (firm.quadratic) {
        const double q = 0.5 * (1.0 - S);
        return q > 0.0 ? q : 0.0;
    }
    return decreasing_root([&](double q) {
        return firm.profit_dq(t, q) - S * firm.emission_dq(t, q);
    });
}

double correction_tau(const FirmModel& firm, const MarketDynamics& market,
                      double t, double y, double q3, double p_y) {
    if (q3 < 0.0)
        throw std::domain_error("production rate must be nonnegative");
    const double gamma = market.gamma_vol(t, y);
    const double lam_dq = firm.premium_dq(t, q3);
    return (market.beta * firm.emission_dq(t, q3) - gamma * lam_dq) * p_y +
           lam_dq * firm.premium(t, q3) / firm.risk_aversion;
}

}  // namespace carbon
