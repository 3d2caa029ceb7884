#pragma once

#include "ferrolayer/errors.hpp"
#include "ferrolayer/expansion.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace ferrolayer {

/// Line-based configuration: `[section]` headers, `key = value` lines, `#` comments. Keys are
/// addressed as `section.key`.
class Config {
public:
    static Config parse(std::istream& in)
    {
        Config c;
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') throw ValidationError("config line " + std::to_string(lineno) + ": bad section header");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            if (key.empty()) throw ValidationError("config line " + std::to_string(lineno) + ": empty key");
            c.set(section.empty() ? key : section + "." + key, trim(line.substr(eq + 1)));
        }
        return c;
    }

    static Config load(const std::string& path)
    {
        std::ifstream in(path);
        if (!in) throw ValidationError("config not found: " + path);
        return parse(in);
    }

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    bool has(const std::string& key) const { return kv_.count(key) > 0; }
    const std::map<std::string, std::string>& entries() const { return kv_; }

    /// `key=value` override, as given on the command line.
    void apply_override(const std::string& kv)
    {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw ValidationError("override must be KEY=VALUE: " + kv);
        set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }

    std::string str(const std::string& key, const std::string& def) const
    {
        used_.insert(key);
        const auto it = kv_.find(key);
        return it == kv_.end() ? def : it->second;
    }

    double real(const std::string& key, double def) const
    {
        used_.insert(key);
        const auto it = kv_.find(key);
        return it == kv_.end() ? def : to_real(key, it->second);
    }

    int integer(const std::string& key, int def) const
    {
        const double v = real(key, def);
        if (v != std::floor(v)) throw ValidationError("config key " + key + " must be an integer");
        return static_cast<int>(v);
    }

    std::vector<double> reals(const std::string& key, std::vector<double> def) const
    {
        used_.insert(key);
        const auto it = kv_.find(key);
        if (it == kv_.end()) return def;
        std::vector<double> out;
        std::stringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(to_real(key, trim(item)));
        return out;
    }

    /// Throws on keys that no reader asked for (typos would otherwise be silently ignored).
    void reject_unknown(const std::set<std::string>& also_known = {}) const
    {
        for (const auto& [k, v] : kv_)
            if (!used_.count(k) && !also_known.count(k)) throw ValidationError("unknown config key: " + k);
    }

    /// FNV-1a over the canonical `key=value` listing; independent of ordering and comments.
    std::uint64_t hash() const
    {
        std::uint64_t h = 1469598103934665603ull;
        for (const auto& [k, v] : kv_) {
            for (char ch : k + "=" + v + "\n") {
                h ^= static_cast<unsigned char>(ch);
                h *= 1099511628211ull;
            }
        }
        return h;
    }

    std::string hash_hex() const
    {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
        return buf;
    }

    static std::string trim(const std::string& s)
    {
        const auto a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return {};
        const auto b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }

private:
    static double to_real(const std::string& key, const std::string& s)
    {
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ValidationError("config key " + key + ": not a number: " + s);
        }
    }

    std::map<std::string, std::string> kv_;
    mutable std::set<std::string> used_;
};

/// Named analytic initial fields. Both sides of "tilted" agree at x = 0 (zero jump).
inline InitialData named_field(const std::string& name)
{
    if (name == "tilted") {
        auto f = [](double x) { return Vec3{0.6 + 0.3 * x, 0.8, 0.2 * x}; };
        return {f, f};
    }
    throw ValidationError("unknown named field: " + name);
}

/// Settings shared by every subcommand, read from a Config.
struct RunConfig {
    ScenarioConfig scenario;
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    double limit_dt = 1e-3;
    int limit_cells = 64;
    int limit_save_every = 100;
    double full_epsilon = 0.1;
    int full_save_every = 100;
    int profile_time_slices = 5;
    int stray_n = 64;
    double stray_tol = 1e-12;
    std::vector<std::string> warnings;
};

inline Vec3 read_vec3(const Config& c, const std::string& key, Vec3 def, std::vector<std::string>& warnings)
{
    const auto v = c.reals(key, {def[0], def[1], def[2]});
    if (v.size() != 3) throw ValidationError("config key " + key + " needs three components");
    const Vec3 r{v[0], v[1], v[2]};
    const double n = norm(r);
    if (!(n > 0.0)) throw ValidationError("config key " + key + " is the zero vector");
    if (std::fabs(n - 1.0) > 1e-8) warnings.push_back(key + " renormalized (|v| = " + std::to_string(n) + ")");
    return r / n;
}

inline CrossTerm parse_cross_term(const std::string& s)
{
    if (s == "lagged_implicit") return CrossTerm::lagged_implicit;
    if (s == "explicit") return CrossTerm::explicit_term;
    throw ValidationError("full.cross_term must be lagged_implicit or explicit");
}

inline RunConfig read_run_config(const Config& c)
{
    RunConfig r;
    auto& sc = r.scenario;
    sc.name = c.str("scenario.name", "scenario");
    const std::string init = c.str("scenario.initial", "constant");
    if (init == "constant") {
        const Vec3 m = read_vec3(c, "scenario.minus", {0.6, 0.8, 0.0}, r.warnings);
        const Vec3 p = read_vec3(c, "scenario.plus", {-0.6, 0.8, 0.0}, r.warnings);
        sc.data = InitialData::constant(m, p);
    } else {
        sc.data = named_field(init);
    }
    sc.T = c.real("scenario.T", sc.T);
    sc.epsilons = c.reals("scenario.epsilons", sc.epsilons);

    sc.levels.v_sigma_halfwidth = c.real("levels.v_sigma_halfwidth", sc.levels.v_sigma_halfwidth);
    sc.levels.v_gamma_width = c.real("levels.v_gamma_width", sc.levels.v_gamma_width);
    sc.levels.blend_start = c.real("levels.blend_start", sc.levels.blend_start);

    sc.dt_full = c.real("full.dt", sc.dt_full);
    sc.cells_per_eps = c.integer("full.cells_per_eps", sc.cells_per_eps);
    sc.max_cells_per_side = c.integer("full.max_cells_per_side", sc.max_cells_per_side);
    sc.theta_scheme = c.real("full.theta", sc.theta_scheme);
    sc.cross_term = parse_cross_term(c.str("full.cross_term", "lagged_implicit"));
    r.full_epsilon = c.real("full.epsilon", r.full_epsilon);
    r.full_save_every = c.integer("full.save_every", r.full_save_every);

    sc.dt_limit = c.real("limit.dt", sc.dt_limit);
    r.limit_dt = sc.dt_limit;
    r.limit_cells = c.integer("limit.cells_per_side", r.limit_cells);
    r.limit_save_every = c.integer("limit.save_every", r.limit_save_every);

    auto& p = sc.profile;
    p.y_max = c.real("profile.y_max", p.y_max);
    p.h_min = c.real("profile.h_min", p.h_min);
    p.stretch = c.real("profile.stretch", p.stretch);
    p.h_max = c.real("profile.h_max", p.h_max);
    p.dt = c.real("profile.dt", p.dt);
    p.first_div = c.real("profile.first_div", p.first_div);
    p.growth = c.real("profile.growth", p.growth);
    sc.profile_x_nodes = c.integer("profile.x_nodes", sc.profile_x_nodes);
    sc.boundary_x_nodes = c.integer("profile.boundary_x_nodes", sc.boundary_x_nodes);
    sc.z_max = c.real("profile.z_max", sc.z_max);
    r.profile_time_slices = c.integer("profile.csv_time_slices", r.profile_time_slices);

    sc.picard.tol = c.real("picard.tol", sc.picard.tol);
    sc.picard.max_iter = c.integer("picard.max_iter", sc.picard.max_iter);
    sc.picard.stall_limit = c.integer("picard.stall_limit", sc.picard.stall_limit);
    sc.max_T_halvings = c.integer("picard.max_T_halvings", sc.max_T_halvings);

    r.stray_n = c.integer("stray.n", r.stray_n);
    r.stray_tol = c.real("stray.tolerance", r.stray_tol);

    r.out_dir = c.str("run.out", r.out_dir);
    const int seed = c.integer("run.seed", 1);
    if (seed < 0) throw ValidationError("run.seed must be non-negative");
    r.seed = static_cast<std::uint64_t>(seed);
    sc.jobs = c.integer("run.jobs", 1);

    c.reject_unknown();
    for (double e : sc.epsilons)
        if (!(e > 0.0)) throw ValidationError("epsilon values must be positive");
    if (!(r.full_epsilon > 0.0)) throw ValidationError("full.epsilon must be positive");
    if (r.limit_save_every < 1 || r.full_save_every < 1) throw ValidationError("save_every must be positive");
    if (r.profile_time_slices < 2) throw ValidationError("profile.csv_time_slices must be at least 2");
    sc.levels.validate();
    return r;
}

} // namespace ferrolayer
