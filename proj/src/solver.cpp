#include "carbon/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

namespace carbon {
namespace {

std::string level_tag(double t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", t);
    return buf;
}

struct GradientPair {
    double p_e, p_y;
};

GradientPair gradients_at(const Field& f, int i, int j) {
    return {e_forward_difference(f, i, j), y_central_difference(f, i, j)};
}

Snapshot make_snapshot(int level, double t, const Field& value,
                       const Field& prev_value, const MarketDynamics& market,
                       const FirmModel& firm, double mask_eps) {
    const GridSpec& spec = value.spec();
    Snapshot snap{level, t, value, Field(spec, t), Field(spec, t),
                  Field(spec, t), {}, 0.0, 0.0, 0.0};
    snap.mask.assign(static_cast<size_t>(spec.e_nodes()) * spec.y_nodes(), 0);

    const double dt = spec.dt();
    const double dy = spec.dy();
    double res_max = 0.0;
    double price_min = std::numeric_limits<double>::infinity();
    double price_max = -price_min;

    for (int i = 0; i < spec.e_nodes(); ++i) {
        for (int j = 0; j < spec.y_nodes(); ++j) {
            const auto [p_e, p_y] = gradients_at(value, i, j);
            const double y = spec.y_at(j);
            const auto h = hamiltonian_argmax(firm, market, t, y, p_e, p_y);
            const double price = std::clamp(-p_e, 0.0, market.alpha);
            const double q1 = small_producer_policy(firm, market, t, price);

            snap.policy.at(i, j) = h.q_star;
            snap.benchmark.at(i, j) = q1;
            snap.tau.at(i, j) =
                correction_tau(firm, market, t, y, h.q_star, p_y);

            const double diff = h.q_star - q1;
            std::int8_t m = 0;
            if (diff > mask_eps) m = 1;
            else if (diff < -mask_eps) m = -1;
            snap.mask[static_cast<size_t>(i) * spec.y_nodes() + j] = m;

            price_min = std::min(price_min, -p_e);
            price_max = std::max(price_max, -p_e);

            // Discrete residual of the full equation, interior only.
            if (i > 0 && i < spec.e_nodes() - 1 && j > 0 &&
                j < spec.y_nodes() - 1) {
                const double vyy = (value.at(i, j + 1) - 2.0 * value.at(i, j) +
                                    value.at(i, j - 1)) /
                                   (dy * dy);
                const double g = market.gamma_vol(t, y);
                const double r = (prev_value.at(i, j) - value.at(i, j)) / dt +
                                 market.mu(t, y) * p_y + 0.5 * g * g * vyy +
                                 h.theta_star;
                res_max = std::max(res_max, std::abs(r));
            }
        }
    }
    snap.max_residual = res_max;
    snap.price_min = price_min;
    snap.price_max = price_max;
    return snap;
}

}  // namespace

void SolverConfig::validate() const {
    grid.validate();
    market.validate();
    firm.validate();
    if (firm.mode == FirmMode::SmallProducer)
        throw std::invalid_argument(
            "small-producer mode has no dynamic program; use "
            "small_producer_policy directly");
    if (store_every < 1)
        throw std::invalid_argument("store_every must be >= 1");
    if (!(diffusion_theta >= 0.5) || !(diffusion_theta <= 1.0))
        throw std::invalid_argument("diffusion_theta must lie in [1/2, 1]");
    if (std::abs(grid.horizon - market.horizon) > 1e-12)
        throw std::invalid_argument("grid horizon differs from market horizon");
}

const Snapshot& Solution::at_time(double t) const {
    for (const Snapshot& s : snapshots)
        if (std::abs(s.time - t) <= 1e-9 * std::max(1.0, std::abs(t)))
            return s;
    throw std::out_of_range("no snapshot stored at t=" + level_tag(t));
}

const Snapshot& Solution::floor_time(double t) const {
    const Snapshot* best = nullptr;
    for (const Snapshot& s : snapshots)
        if (s.time <= t + 1e-12) best = &s;
    if (!best) throw std::out_of_range("no snapshot at or before t");
    return *best;
}

Field heat_half_step(const Field& field, const MarketDynamics& market,
                     double t_from, double t_to, const BoundaryFn& bc_upper,
                     const BoundaryFn& bc_lower, double theta) {
    if (!(t_to < t_from))
        throw std::invalid_argument("heat step must run backward in time");
    const GridSpec& spec = field.spec();
    const int ny = spec.y_nodes();
    const int ne = spec.e_nodes();
    const double dt = t_from - t_to;
    const double dy = spec.dy();

    // Diffusion numbers per y-row; the tridiagonal matrix is shared by every
    // e-row, so factor once per step.
    std::vector<double> c_imp(ny), c_exp(ny);
    for (int j = 0; j < ny; ++j) {
        const double y = spec.y_at(j);
        const double gi = market.gamma_vol(t_to, y);
        const double ge = market.gamma_vol(t_from, y);
        c_imp[j] = 0.5 * gi * gi * dt / (dy * dy);
        c_exp[j] = 0.5 * ge * ge * dt / (dy * dy);
    }

    const int m = ny - 2;  // interior unknowns
    std::vector<double> diag(m), upper(m), work(m), rhs(m);
    for (int k = 0; k < m; ++k) {
        diag[k] = 1.0 + 2.0 * theta * c_imp[k + 1];
        upper[k] = -theta * c_imp[k + 1];
    }
    // Thomas forward sweep on the shared matrix.
    work[0] = upper[0] / diag[0];
    for (int k = 1; k < m; ++k) {
        const double denom = diag[k] + theta * c_imp[k + 1] * work[k - 1];
        if (!(denom > 0.0))
            throw SolveError("singular tridiagonal system in heat step");
        work[k] = upper[k] / denom;
    }

    Field out(spec, t_to);
    for (int i = 0; i < ne; ++i) {
        const double e = spec.e_at(i);
        const double lo = bc_lower(t_from, e);
        const double up = bc_upper(t_from, e);
        for (int k = 0; k < m; ++k) {
            const int j = k + 1;
            const double expl =
                field.at(i, j) +
                (1.0 - theta) * c_exp[j] *
                    (field.at(i, j + 1) - 2.0 * field.at(i, j) +
                     field.at(i, j - 1));
            rhs[k] = expl;
        }
        rhs[0] += theta * c_imp[1] * lo;
        rhs[m - 1] += theta * c_imp[ny - 2] * up;

        // Back-substitution with the shared factorization.
        rhs[0] /= diag[0];
        for (int k = 1; k < m; ++k) {
            const double denom = diag[k] + theta * c_imp[k + 1] * work[k - 1];
            rhs[k] = (rhs[k] + theta * c_imp[k + 1] * rhs[k - 1]) / denom;
        }
        for (int k = m - 2; k >= 0; --k) rhs[k] -= work[k] * rhs[k + 1];

        out.at(i, 0) = lo;
        for (int k = 0; k < m; ++k) out.at(i, k + 1) = rhs[k];
        out.at(i, ny - 1) = up;
    }
    return out;
}

Field control_field(const Field& field, const MarketDynamics& market,
                    const FirmModel& firm) {
    const GridSpec& spec = field.spec();
    Field phi(spec, field.time());
    const double t = field.time();
    for (int i = 0; i < spec.e_nodes(); ++i)
        for (int j = 0; j < spec.y_nodes(); ++j) {
            const auto [p_e, p_y] = gradients_at(field, i, j);
            phi.at(i, j) =
                hamiltonian_argmax(firm, market, t, spec.y_at(j), p_e, p_y)
                    .q_star;
        }
    return phi;
}

Field transport_half_step(const Field& field, const Field& phi,
                          const MarketDynamics& market, const FirmModel& firm,
                          double t_from, double t_to) {
    if (!(t_to < t_from))
        throw std::invalid_argument("transport step must run backward in time");
    const GridSpec& spec = field.spec();
    const double dt = t_from - t_to;

    // Row caches: mu and gamma depend on (t, y) only.
    const int ny = spec.y_nodes();
    std::vector<double> mu_row(ny), gamma_row(ny);
    for (int j = 0; j < ny; ++j) {
        const double y = spec.y_at(j);
        mu_row[j] = market.mu(t_to, y);
        gamma_row[j] = market.gamma_vol(t_to, y);
    }

    Field out(spec, t_to);
    for (int i = 0; i < spec.e_nodes(); ++i) {
        const double e = spec.e_at(i);
        for (int j = 0; j < ny; ++j) {
            const double q = phi.at(i, j);
            const double eta = firm.quadratic ? q : firm.emission(t_to, q);
            const double lam = firm.quadratic
                                   ? firm.quadratic->lambda_slope * q +
                                         firm.quadratic->lambda_level
                                   : firm.premium(t_to, q);
            const double e_foot = e + eta * dt;
            const double y_foot =
                spec.y_at(j) +
                (mu_row[j] + market.beta * eta - gamma_row[j] * lam) * dt;
            out.at(i, j) = field.sample(e_foot, y_foot) +
                           effective_running_reward(firm, t_to, q) * dt;
        }
    }
    return out;
}

Solution solve(const SolverConfig& config) {
    config.validate();
    const GridSpec& spec = config.grid;
    const MarketDynamics& market = config.market;
    const FirmModel& firm = config.firm;

    const BoundaryFn bc_up = [&market, &firm](double t, double e) {
        return upper_y_boundary(t, e, market, firm);
    };
    const BoundaryFn bc_lo = [&market, &firm](double t, double) {
        return lower_y_boundary(t, market, firm);
    };

    Field field = build_terminal_field(spec, market);
    Solution solution;
    solution.grid = spec;
    solution.alpha = market.alpha;
    solution.identity_masks =
        firm.quadratic.has_value() &&
        (firm.premium_impact() || firm.quadratic->lambda_slope == 0.0);

    const double dt = spec.dt();
    for (int n = spec.time_steps - 1; n >= 0; --n) {
        const double t_hi = (n + 1) * dt;
        const double t_lo = n * dt;
        const bool store = n % config.store_every == 0;
        Field prev = store ? field : Field(spec, t_hi);

        Field diffused = heat_half_step(field, market, t_hi, t_lo, bc_up,
                                        bc_lo, config.diffusion_theta);
        Field phi = control_field(diffused, market, firm);
        field = transport_half_step(diffused, phi, market, firm, t_hi, t_lo);

        // Walls carry the ABC values at the new level.
        const int ny = spec.y_nodes();
        for (int i = 0; i < spec.e_nodes(); ++i) {
            field.at(i, 0) = bc_lo(t_lo, spec.e_at(i));
            field.at(i, ny - 1) = bc_up(t_lo, spec.e_at(i));
        }

        if (!field.all_finite())
            throw SolveError("non-finite value at time level " +
                             std::to_string(n) + " (t=" + level_tag(t_lo) +
                             ")");

        if (store)
            solution.snapshots.push_back(make_snapshot(
                n, t_lo, field, prev, market, firm, config.mask_epsilon));
    }

    std::reverse(solution.snapshots.begin(), solution.snapshots.end());
    return solution;
}

ComparisonMasks policy_comparison(const Solution& solution, double t_level,
                                  double eps) {
    const Snapshot& snap = solution.at_time(t_level);
    const GridSpec& spec = solution.grid;

    ComparisonMasks out;
    const size_t n = snap.mask.size();
    out.policy_mask.assign(n, 0);
    out.tau_mask.assign(n, 0);

    for (int i = 0; i < spec.e_nodes(); ++i) {
        for (int j = 0; j < spec.y_nodes(); ++j) {
            const size_t idx = static_cast<size_t>(i) * spec.y_nodes() + j;
            const double q3 = snap.policy.at(i, j);
            const double q1 = snap.benchmark.at(i, j);
            const double tau = snap.tau.at(i, j);

            const double diff = q3 - q1;
            std::int8_t pm = 0;
            if (diff > eps) pm = 1;
            else if (diff < -eps) pm = -1;
            std::int8_t tm = 0;
            if (tau > 2.0 * eps) tm = 1;
            else if (tau < -2.0 * eps) tm = -1;
            out.policy_mask[idx] = pm;
            out.tau_mask[idx] = tm;
            if (pm > 0) ++out.plus;
            else if (pm < 0) ++out.minus;
            else ++out.zero;

            // The two masks must agree where the identity q3 = q1 + tau/2 is
            // in force: interior node, both policies interior, price not
            // clamped by the [0, alpha] band.
            const bool interior_node = i > 0 && i < spec.e_nodes() - 1 &&
                                       j > 0 && j < spec.y_nodes() - 1;
            const double p_e = e_forward_difference(snap.value, i, j);
            const bool unclamped = -p_e >= 0.0 && -p_e <= solution.alpha;
            if (solution.identity_masks && interior_node && unclamped &&
                q3 > 0.0 && q1 > 0.0 && pm != tm &&
                std::abs(diff - 0.5 * tau) > 1e-10) {
                char msg[160];
                std::snprintf(msg, sizeof(msg),
                              "mask disagreement at (e=%g, y=%g): q3-q1=%g "
                              "tau=%g",
                              spec.e_at(i), spec.y_at(j), diff, tau);
                throw ConsistencyError(msg);
            }
        }
    }
    return out;
}

void export_solution(const Solution& solution,
                     const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream diag(dir / "diagnostics.txt");
    if (!diag) throw std::runtime_error("cannot write diagnostics.txt");

    for (const Snapshot& snap : solution.snapshots) {
        const std::string tag = level_tag(snap.time);
        const auto write = [&](const std::string& name, const Field& f) {
            std::ofstream out(dir / (name + "_" + tag + ".csv"));
            if (!out)
                throw std::runtime_error("cannot write " + name + "_" + tag +
                                         ".csv");
            write_field_csv(out, f);
        };
        write("V", snap.value);
        write("q_policy", snap.policy);
        write("q_benchmark", snap.benchmark);
        write("tau", snap.tau);

        std::ofstream mask(dir / ("mask_" + tag + ".csv"));
        if (!mask) throw std::runtime_error("cannot write mask CSV");
        mask << "e,y,value\n";
        const GridSpec& spec = solution.grid;
        long plus = 0, minus = 0, zero = 0;
        char line[96];
        for (int i = 0; i < spec.e_nodes(); ++i)
            for (int j = 0; j < spec.y_nodes(); ++j) {
                const int m =
                    snap.mask[static_cast<size_t>(i) * spec.y_nodes() + j];
                std::snprintf(line, sizeof(line), "%.17g,%.17g,%d\n",
                              spec.e_at(i), spec.y_at(j), m);
                mask << line;
                if (m > 0) ++plus;
                else if (m < 0) ++minus;
                else ++zero;
            }

        char info[256];
        std::snprintf(info, sizeof(info),
                      "t=%s max_residual=%.6g price_min=%.6g price_max=%.6g "
                      "mask +%ld/0:%ld/-%ld\n",
                      tag.c_str(), snap.max_residual, snap.price_min,
                      snap.price_max, plus, zero, minus);
        diag << info;
    }
}

}  // namespace carbon
