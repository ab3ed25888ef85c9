#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "carbon/model.hpp"
#include "carbon/solver.hpp"

// Flat "key = value" run configuration with '#' comments.  Missing keys fall
// back to the documented defaults; unknown keys are rejected with the
// offending line.  Every key can be overridden through the environment as
// CARBON_<KEY> (upper case).

namespace carbon {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    // market / firm
    double mu = 0.1;
    double gamma_vol = 0.65;
    double beta = 1.0;
    double alpha = 0.1;
    double risk_aversion = 5.0;
    double horizon = 10.0;
    std::string mode = "large_premium_impact";  // or large_no_premium_impact
    double lambda_const = 0.65;  // premium level in no-premium-impact mode

    // grid / solver
    double l_e = 3.0;
    double l_y = 6.0;
    int n_e = 100;
    int n_y = 120;
    int n_t = 1000;
    int store_every = 100;
    double diffusion_theta = 1.0;
    double mask_epsilon = 1e-6;

    // oracle
    long mc_paths = 100000;
    int mc_steps = 1000;
    double mc_wealth = 0.0;

    // run control
    int threads = 0;  // 0 = hardware concurrency
    std::uint64_t seed = 42;
    std::string out_dir = "out";

    // sweeps
    std::vector<double> gamma_vol_sweep;
    std::vector<double> alpha_sweep;

    static RunConfig from_file(const std::string& path);
    static RunConfig from_stream(std::istream& in, const std::string& name);
    void apply_env_overrides();

    MarketDynamics market() const;
    FirmModel firm() const;
    GridSpec grid() const;
    SolverConfig solver() const;
};

}  // namespace carbon
