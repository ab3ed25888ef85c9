#pragma once

#include <iosfwd>
#include <vector>

#include "carbon/model.hpp"

// Discretization of the (t, e, y) box, terminal data, the artificial
// boundary conditions at y = +-L_y, and the one-sided difference stencils.

namespace carbon {

// Uniform grid on [-L_e, L_e] x [-L_y, L_y] with nodes e_i = i*de
// (i = -N_e..N_e), y_j = j*dy, and N_t time steps over [0, T].  e = 0 and
// y = 0 are always nodes, so the terminal discontinuity sits on the lattice.
struct GridSpec {
    double e_half_width = 3.0;  // L_e > 0
    double y_half_width = 6.0;  // L_y > 0
    int e_half_nodes = 100;     // N_e >= 8
    int y_half_nodes = 120;     // N_y >= 8
    int time_steps = 1000;      // N_t >= 1
    double horizon = 10.0;      // T > 0

    void validate() const;

    double de() const { return e_half_width / e_half_nodes; }
    double dy() const { return y_half_width / y_half_nodes; }
    double dt() const { return horizon / time_steps; }

    int e_nodes() const { return 2 * e_half_nodes + 1; }
    int y_nodes() const { return 2 * y_half_nodes + 1; }

    // Storage index (0-based) <-> coordinate maps.
    double e_at(int i) const { return (i - e_half_nodes) * de(); }
    double y_at(int j) const { return (j - y_half_nodes) * dy(); }
    int e_index(double e) const;  // nearest node
    int y_index(double y) const;

    bool operator==(const GridSpec&) const = default;
};

// Scalar function sampled on the (e, y) lattice at one time level.
// Row-major with e as the slow axis, so y-sweeps are contiguous.
class Field {
  public:
    Field(const GridSpec& spec, double time)
        : spec_(spec), time_(time),
          values_(static_cast<size_t>(spec.e_nodes()) * spec.y_nodes(), 0.0) {}

    const GridSpec& spec() const { return spec_; }
    double time() const { return time_; }
    void set_time(double t) { time_ = t; }

    double& at(int i, int j) {
        return values_[static_cast<size_t>(i) * spec_.y_nodes() + j];
    }
    double at(int i, int j) const {
        return values_[static_cast<size_t>(i) * spec_.y_nodes() + j];
    }

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    bool all_finite() const;
    double min_value() const;
    double max_value() const;

    // Bilinear interpolation; y clamped to the box, e clamped below and
    // extended affinely above +L_e with the last backward-difference slope
    // (the value is asymptotically affine in e).
    double sample(double e, double y) const;

    // Bilinear interpolation with both coordinates clamped to the box.
    double sample_clamped(double e, double y) const;

  private:
    GridSpec spec_;
    double time_;
    std::vector<double> values_;
};

// Terminal data V(T, e_i, y_j) = -alpha 1{y_j >= 0} e_i.
Field build_terminal_field(const GridSpec& spec, const MarketDynamics& market);

// ABC at y = +L_y, where termination above the cap is near certain:
// value of the deterministic constant-production problem,
//   -alpha e + sup_q integral_t^T (pi~(s,q) - alpha eta(s,q)) ds.
// Quadratic example: -alpha e + (1-alpha)^2 (T-t) / (4 rho).
double upper_y_boundary(double t, double e, const MarketDynamics& market,
                        const FirmModel& firm);

// ABC at y = -L_y (cap not reached): sup_q integral_t^T pi~(s,q) ds,
// independent of e.  Quadratic example: (T-t) / (4 rho).
double lower_y_boundary(double t, const MarketDynamics& market,
                        const FirmModel& firm);

// One-sided e-derivative: forward everywhere, backward at the top column.
double e_forward_difference(const Field& field, int i, int j);

// Central y-derivative in the interior, one-sided at the walls.
double y_central_difference(const Field& field, int i, int j);

// CSV: header "e,y,value", rows by increasing e then increasing y, full
// double precision.
void write_field_csv(std::ostream& out, const Field& field);
Field read_field_csv(std::istream& in, const GridSpec& spec, double time);

}  // namespace carbon
