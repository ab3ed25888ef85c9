#include "carbon/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

namespace carbon {
namespace {

// sup over constant q >= 0 of integral_t^T (pi~(s,q) - penalty*eta(s,q)) ds.
// Closed form for the quadratic family, golden-section search otherwise with
// the time integral by composite Simpson.
double best_constant_control_value(double t, const MarketDynamics& market,
                                   const FirmModel& firm, double penalty) {
    const double T = market.horizon;
    if (t >= T) return 0.0;

    if (firm.quadratic) {
        const double s = firm.quadratic->lambda_slope;
        const double l = firm.quadratic->lambda_level;
        const double a = firm.risk_aversion;
        const bool entropy = firm.premium_impact();
        const double rho_eff = entropy ? 1.0 - s * s / (2.0 * a) : 1.0;
        if (!(rho_eff > 0.0))
            throw ModelError("effective objective is not concave");
        const double lin = 1.0 + (entropy ? s * l / a : 0.0) - penalty;
        const double cst = entropy ? l * l / (2.0 * a) : 0.0;
        const double peak =
            lin > 0.0 ? lin * lin / (4.0 * rho_eff) : 0.0;
        return (cst + peak) * (T - t);
    }

    const auto running = [&](double q) {
        // Simpson over [t, T]; exact for time-invariant curves.
        constexpr int kIntervals = 32;
        const double h = (T - t) / kIntervals;
        double acc = 0.0;
        for (int k = 0; k <= kIntervals; ++k) {
            const double s = t + k * h;
            const double w =
                (k == 0 || k == kIntervals) ? 1.0 : (k % 2 ? 4.0 : 2.0);
            acc += w * (effective_running_reward(firm, s, q) -
                        penalty * firm.emission(s, q));
        }
        return acc * h / 3.0;
    };

    // Bracket the maximizer, then golden-section.
    double hi = 1.0;
    int expand = 0;
    while (running(hi * 2.0) > running(hi)) {
        hi *= 2.0;
        if (++expand > 100)
            throw ModelError("constant-control objective is unbounded");
    }
    hi *= 2.0;
    constexpr double kInvPhi = 0.6180339887498949;
    double lo = 0.0;
    double c = hi - kInvPhi * (hi - lo);
    double d = lo + kInvPhi * (hi - lo);
    double fc = running(c), fd = running(d);
    while (hi - lo > 1e-10) {
        if (fc > fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - kInvPhi * (hi - lo);
            fc = running(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + kInvPhi * (hi - lo);
            fd = running(d);
        }
    }
    return std::max(running(0.5 * (lo + hi)), running(0.0));
}

}  // namespace

void GridSpec::validate() const {
    if (!(e_half_width > 0.0) || !(y_half_width > 0.0))
        throw std::invalid_argument("grid half-widths must be positive");
    if (e_half_nodes < 8 || y_half_nodes < 8)
        throw std::invalid_argument("need at least 8 half nodes per axis");
    if (time_steps < 1)
        throw std::invalid_argument("need at least one time step");
    if (!(horizon > 0.0))
        throw std::invalid_argument("horizon must be positive");
}

int GridSpec::e_index(double e) const {
    const int i = static_cast<int>(std::lround(e / de())) + e_half_nodes;
    return std::clamp(i, 0, e_nodes() - 1);
}

int GridSpec::y_index(double y) const {
    const int j = static_cast<int>(std::lround(y / dy())) + y_half_nodes;
    return std::clamp(j, 0, y_nodes() - 1);
}

bool Field::all_finite() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](double v) { return std::isfinite(v); });
}

double Field::min_value() const {
    return *std::min_element(values_.begin(), values_.end());
}

double Field::max_value() const {
    return *std::max_element(values_.begin(), values_.end());
}

double Field::sample(double e, double y) const {
    const int ne = spec_.e_nodes(), ny = spec_.y_nodes();
    const double de = spec_.de(), dy = spec_.dy();

    const double yc = std::clamp(y, spec_.y_at(0), spec_.y_at(ny - 1));
    int j = static_cast<int>(std::floor((yc - spec_.y_at(0)) / dy));
    j = std::clamp(j, 0, ny - 2);
    const double fy = std::clamp((yc - spec_.y_at(j)) / dy, 0.0, 1.0);

    const double elo = spec_.e_at(0);
    int i = static_cast<int>(std::floor((e - elo) / de));
    i = std::clamp(i, 0, ne - 2);
    // Not clamped above one: beyond +L_e this extrapolates with the last
    // column's backward-difference slope.
    const double fe = std::max((e - spec_.e_at(i)) / de, 0.0);

    const double v0 = (1.0 - fy) * at(i, j) + fy * at(i, j + 1);
    const double v1 = (1.0 - fy) * at(i + 1, j) + fy * at(i + 1, j + 1);
    return (1.0 - fe) * v0 + fe * v1;
}

double Field::sample_clamped(double e, double y) const {
    const double ec =
        std::clamp(e, spec_.e_at(0), spec_.e_at(spec_.e_nodes() - 1));
    return sample(ec, y);
}

Field build_terminal_field(const GridSpec& spec,
                           const MarketDynamics& market) {
    spec.validate();
    Field f(spec, spec.horizon);
    for (int i = 0; i < spec.e_nodes(); ++i)
        for (int j = 0; j < spec.y_nodes(); ++j)
            f.at(i, j) = terminal_payoff(market.alpha, spec.y_at(j),
                                         spec.e_at(i));
    return f;
}

double upper_y_boundary(double t, double e, const MarketDynamics& market,
                        const FirmModel& firm) {
    return -market.alpha * e +
           best_constant_control_value(t, market, firm, market.alpha);
}

double lower_y_boundary(double t, const MarketDynamics& market,
                        const FirmModel& firm) {
    return best_constant_control_value(t, market, firm, 0.0);
}

double e_forward_difference(const Field& field, int i, int j) {
    const int top = field.spec().e_nodes() - 1;
    const double de = field.spec().de();
    if (i < top) return (field.at(i + 1, j) - field.at(i, j)) / de;
    return (field.at(top, j) - field.at(top - 1, j)) / de;
}

double y_central_difference(const Field& field, int i, int j) {
    const int top = field.spec().y_nodes() - 1;
    const double dy = field.spec().dy();
    if (j == 0) return (field.at(i, 1) - field.at(i, 0)) / dy;
    if (j == top) return (field.at(i, top) - field.at(i, top - 1)) / dy;
    return (field.at(i, j + 1) - field.at(i, j - 1)) / (2.0 * dy);
}

void write_field_csv(std::ostream& out, const Field& field) {
    const GridSpec& spec = field.spec();
    out << "e,y,value\n";
    char line[128];
    for (int i = 0; i < spec.e_nodes(); ++i)
        for (int j = 0; j < spec.y_nodes(); ++j) {
            std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g\n",
                          spec.e_at(i), spec.y_at(j), field.at(i, j));
            out << line;
        }
}

Field read_field_csv(std::istream& in, const GridSpec& spec, double time) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("e,y,value", 0) != 0)
        throw std::runtime_error("field CSV: missing e,y,value header");
    Field f(spec, time);
    const size_t expected =
        static_cast<size_t>(spec.e_nodes()) * spec.y_nodes();
    size_t count = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double e, y, v;
        if (std::sscanf(line.c_str(), "%lg,%lg,%lg", &e, &y, &v) != 3)
            throw std::runtime_error("field CSV: malformed row: " + line);
        if (count >= expected)
            throw std::runtime_error("field CSV: too many rows");
        const int i = spec.e_index(e), j = spec.y_index(y);
        if (std::abs(spec.e_at(i) - e) > 1e-9 * std::max(1.0, std::abs(e)) ||
            std::abs(spec.y_at(j) - y) > 1e-9 * std::max(1.0, std::abs(y)))
            throw std::runtime_error("field CSV: off-grid coordinates: " +
                                     line);
        f.at(i, j) = v;
        ++count;
    }
    if (count != expected)
        throw std::runtime_error("field CSV: wrong row count");
    return f;
}

}  // namespace carbon
