#include "carbon/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace carbon {
namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    return s;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing junk");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': not a number: '" + v + "'");
    }
}

long parse_long(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const long n = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing junk");
        return n;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': not an integer: '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const unsigned long long n = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing junk");
        return n;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': not an unsigned integer: '" +
                          v + "'");
    }
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty())
            throw ConfigError("key '" + key + "': empty list element");
        out.push_back(parse_double(key, item));
    }
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& key_table() {
    static const std::map<std::string, Setter> table = {
        {"mu", [](RunConfig& c, const std::string& v) { c.mu = parse_double("mu", v); }},
        {"gamma_vol", [](RunConfig& c, const std::string& v) { c.gamma_vol = parse_double("gamma_vol", v); }},
        {"beta", [](RunConfig& c, const std::string& v) { c.beta = parse_double("beta", v); }},
        {"alpha", [](RunConfig& c, const std::string& v) { c.alpha = parse_double("alpha", v); }},
        {"risk_aversion", [](RunConfig& c, const std::string& v) { c.risk_aversion = parse_double("risk_aversion", v); }},
        {"horizon", [](RunConfig& c, const std::string& v) { c.horizon = parse_double("horizon", v); }},
        {"mode", [](RunConfig& c, const std::string& v) { c.mode = v; }},
        {"lambda_const", [](RunConfig& c, const std::string& v) { c.lambda_const = parse_double("lambda_const", v); }},
        {"l_e", [](RunConfig& c, const std::string& v) { c.l_e = parse_double("l_e", v); }},
        {"l_y", [](RunConfig& c, const std::string& v) { c.l_y = parse_double("l_y", v); }},
        {"n_e", [](RunConfig& c, const std::string& v) { c.n_e = static_cast<int>(parse_long("n_e", v)); }},
        {"n_y", [](RunConfig& c, const std::string& v) { c.n_y = static_cast<int>(parse_long("n_y", v)); }},
        {"n_t", [](RunConfig& c, const std::string& v) { c.n_t = static_cast<int>(parse_long("n_t", v)); }},
        {"store_every", [](RunConfig& c, const std::string& v) { c.store_every = static_cast<int>(parse_long("store_every", v)); }},
        {"diffusion_theta", [](RunConfig& c, const std::string& v) { c.diffusion_theta = parse_double("diffusion_theta", v); }},
        {"mask_epsilon", [](RunConfig& c, const std::string& v) { c.mask_epsilon = parse_double("mask_epsilon", v); }},
        {"mc_paths", [](RunConfig& c, const std::string& v) { c.mc_paths = parse_long("mc_paths", v); }},
        {"mc_steps", [](RunConfig& c, const std::string& v) { c.mc_steps = static_cast<int>(parse_long("mc_steps", v)); }},
        {"mc_wealth", [](RunConfig& c, const std::string& v) { c.mc_wealth = parse_double("mc_wealth", v); }},
        {"threads", [](RunConfig& c, const std::string& v) { c.threads = static_cast<int>(parse_long("threads", v)); }},
        {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); }},
        {"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
        {"gamma_vol_sweep", [](RunConfig& c, const std::string& v) { c.gamma_vol_sweep = parse_list("gamma_vol_sweep", v); }},
        {"alpha_sweep", [](RunConfig& c, const std::string& v) { c.alpha_sweep = parse_list("alpha_sweep", v); }},
    };
    return table;
}

}  // namespace

RunConfig RunConfig::from_stream(std::istream& in, const std::string& name) {
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(name + ":" + std::to_string(lineno) +
                              ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = key_table().find(key);
        if (it == key_table().end())
            throw ConfigError(name + ":" + std::to_string(lineno) +
                              ": unknown key '" + key + "'");
        try {
            it->second(cfg, value);
        } catch (const ConfigError& err) {
            throw ConfigError(name + ":" + std::to_string(lineno) + ": " +
                              err.what());
        }
    }
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    RunConfig cfg = from_stream(in, path);
    cfg.apply_env_overrides();
    return cfg;
}

void RunConfig::apply_env_overrides() {
    for (const auto& [key, setter] : key_table()) {
        const std::string var = "CARBON_" + upper(key);
        if (const char* v = std::getenv(var.c_str())) {
            try {
                setter(*this, trim(v));
            } catch (const ConfigError& err) {
                throw ConfigError("environment " + var + ": " + err.what());
            }
        }
    }
}

MarketDynamics RunConfig::market() const {
    return MarketDynamics::constant_coefficients(mu, gamma_vol, beta, alpha,
                                                 horizon);
}

FirmModel RunConfig::firm() const {
    if (mode == "large_premium_impact")
        return FirmModel::quadratic_firm(risk_aversion,
                                         FirmMode::LargePremiumImpact);
    if (mode == "large_no_premium_impact")
        return FirmModel::quadratic_constant_premium(
            risk_aversion, lambda_const, FirmMode::LargeNoPremiumImpact);
    throw ConfigError("key 'mode': expected large_premium_impact or "
                      "large_no_premium_impact, got '" +
                      mode + "'");
}

GridSpec RunConfig::grid() const {
    GridSpec g;
    g.e_half_width = l_e;
    g.y_half_width = l_y;
    g.e_half_nodes = n_e;
    g.y_half_nodes = n_y;
    g.time_steps = n_t;
    g.horizon = horizon;
    g.validate();
    return g;
}

SolverConfig RunConfig::solver() const {
    SolverConfig s{grid(), market(), firm(), store_every, diffusion_theta,
                   mask_epsilon};
    s.validate();
    return s;
}

}  // namespace carbon
