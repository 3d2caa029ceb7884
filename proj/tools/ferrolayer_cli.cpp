// ferrolayer command-line driver: one subcommand per pipeline stage.

#include "ferrolayer/config.hpp"
#include "ferrolayer/expansion.hpp"
#include "ferrolayer/io.hpp"
#include "ferrolayer/strayfield.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace ferrolayer;

namespace {

struct Options {
    std::string config;
    std::string out;
    int jobs = 0;
    bool plot = false;
    std::vector<std::string> overrides;
    std::string layer = "both";
};

struct Context {
    Config cfg;
    RunConfig run;
    fs::path out;
    std::string command;

    CsvMeta meta(std::vector<std::pair<std::string, std::string>> extra = {}) const
    {
        CsvMeta m;
        m.fields = {{"version", FERROLAYER_VERSION}, {"command", command}, {"config_hash", cfg.hash_hex()}};
        for (auto& e : extra) m.fields.push_back(std::move(e));
        return m;
    }
};

Context load_context(const Options& o, const std::string& command)
{
    if (o.config.empty()) throw ValidationError("config not found: --config is required");
    if (!fs::exists(o.config)) throw ValidationError("config not found: " + o.config);
    Context c;
    c.command = command;
    c.cfg = Config::load(o.config);
    for (const auto& kv : o.overrides) c.cfg.apply_override(kv);
    c.run = read_run_config(c.cfg);
    if (o.jobs > 0) c.run.scenario.jobs = o.jobs;
    if (c.run.scenario.jobs < 1) throw ValidationError("jobs must be at least 1");
    std::string out = c.run.out_dir;
    if (const char* env = std::getenv("FERROLAYER_OUT"); env && *env) out = env;
    if (!o.out.empty()) out = o.out;
    c.out = out;
    std::error_code ec;
    fs::create_directories(c.out, ec);
    if (ec) throw ValidationError("cannot create output directory " + out + ": " + ec.message());
    for (const auto& w : c.run.warnings) std::cerr << "warning: " << w << "\n";
    return c;
}

std::string grid_tag(int cells, double dt)
{
    return "cells_per_side:" + std::to_string(cells) + ";dt:" + format_real(dt);
}

int cells_for(const ScenarioConfig& sc, double eps)
{
    return static_cast<int>(std::ceil(sc.cells_per_eps / eps - 1e-9));
}

// ---------------------------------------------------------------------------------------------

void cmd_limit(const Context& c)
{
    const auto& sc = c.run.scenario;
    SlabConfig scfg;
    scfg.cells_per_side = c.run.limit_cells;
    const SlabDomain dom(scfg);
    const auto traj = integrate_limit(sc.data.sample(dom), sc.T, c.run.limit_dt, stray_field_1d, c.run.limit_save_every);

    CsvTable t({"t", "x", "side", "u1", "u2", "u3"});
    for (std::size_t n = 0; n < traj.times.size(); ++n) {
        const auto& f = traj.states[n];
        for (int s = 0; s < 2; ++s) {
            const auto& x = s == 0 ? f.x_minus : f.x_plus;
            const auto& v = s == 0 ? f.minus : f.plus;
            for (std::size_t i = 0; i < x.size(); ++i)
                t.add({traj.times[n], x[i], std::string(s == 0 ? "minus" : "plus"), v[i][0], v[i][1], v[i][2]});
        }
    }
    t.write(c.out / "limit.csv", c.meta({{"grids", grid_tag(c.run.limit_cells, c.run.limit_dt)}}));
    std::cout << "limit: T=" << format_real(sc.T) << " norm_drift=" << format_real(traj.norm_drift)
              << " file=" << (c.out / "limit.csv").string() << "\n";
}

void cmd_full(const Context& c)
{
    const auto& sc = c.run.scenario;
    const double eps = c.run.full_epsilon;
    const int cells = cells_for(sc, eps);
    if (cells > sc.max_cells_per_side) throw ValidationError("unresolved layer: epsilon needs more than max_cells_per_side cells");
    SlabConfig scfg;
    scfg.cells_per_side = cells;
    const SlabDomain dom(scfg);
    FullModelConfig fc;
    fc.epsilon = eps;
    fc.dt = sc.dt_full;
    fc.T = sc.T;
    fc.theta_scheme = sc.theta_scheme;
    fc.cross_term = sc.cross_term;
    const auto traj = simulate_full(dom, sc.data.sample(dom), fc, c.run.full_save_every);
    const auto x = dom.merged_nodes();

    CsvTable t({"t", "x", "u1", "u2", "u3"});
    for (std::size_t n = 0; n < traj.times.size(); ++n)
        for (std::size_t i = 0; i < x.size(); ++i) {
            const Vec3& v = traj.states[n][i];
            t.add({traj.times[n], x[i], v[0], v[1], v[2]});
        }
    t.write(c.out / "full.csv", c.meta({{"epsilon", format_real(eps)}, {"grids", grid_tag(cells, sc.dt_full)}}));
    std::cout << "full: epsilon=" << format_real(eps) << " cells_per_side=" << cells
              << " residual_l2=" << format_real(traj.residual.l2_residual)
              << " neumann_defect=" << format_real(traj.residual.ghost_neumann_defect)
              << " max_drift=" << format_real(traj.stats.max_drift) << " rejections=" << traj.stats.rejections << "\n";
}

std::vector<std::size_t> time_slices(std::size_t nt, int count)
{
    std::vector<std::size_t> idx;
    for (int k = 0; k < count; ++k) {
        const std::size_t i = (nt - 1) * static_cast<std::size_t>(k) / static_cast<std::size_t>(count - 1);
        if (idx.empty() || idx.back() != i) idx.push_back(i);
    }
    return idx;
}

void write_internal(const Context& c, const Layers& L)
{
    const auto& U = L.internal.U;
    CsvTable t({"t", "x", "side", "y", "U1", "U2", "U3"});
    for (std::size_t it : time_slices(U.nt(), c.run.profile_time_slices))
        for (std::size_t ix = 0; ix < U.nx(); ++ix)
            for (int s = 0; s < 2; ++s)
                for (std::size_t j = 0; j < U.ny(); ++j) {
                    const double y = s == 0 ? -U.eta[j] : U.eta[j];
                    const Vec3& v = U.at(ix, it, s, j);
                    t.add({U.t[it], U.x[ix], std::string(s == 0 ? "minus" : "plus"), y, v[0], v[1], v[2]});
                }
    const auto meta = c.meta({{"T_used", format_real(L.T_used)}, {"T_halvings", std::to_string(L.T_halvings)}});
    t.write(c.out / "internal_profile.csv", meta);

    CsvTable tr({"iteration", "distance", "ratio"});
    const auto& d = L.internal.trace.distances;
    for (std::size_t i = 0; i < d.size(); ++i)
        tr.add({static_cast<long long>(i + 1), d[i], i == 0 ? std::nan("") : (d[i - 1] > 0.0 ? d[i] / d[i - 1] : 0.0)});
    tr.write(c.out / "picard_trace.csv", meta);

    const auto rep = transmission_residuals(L.internal, L.u0pm);
    std::cout << "internal: T_used=" << format_real(L.T_used) << " T_halvings=" << L.T_halvings
              << " iterations=" << L.internal.trace.iterations << " tail=" << format_real(L.internal.tail())
              << " decay_rate=" << format_real(L.internal.decay_rate) << " value_residual=" << format_real(rep.value)
              << " derivative_residual=" << format_real(rep.derivative) << "\n";
}

void write_boundary(const Context& c, const BoundaryProfile& B, double T)
{
    CsvTable t({"t", "x", "z", "V1", "V2", "V3"});
    for (std::size_t it : time_slices(B.t.size(), c.run.profile_time_slices))
        for (std::size_t ix = 0; ix < B.x.size(); ++ix)
            for (std::size_t j = 0; j < B.z.size(); ++j) {
                const Vec3& v = B.at(ix, it, j);
                t.add({B.t[it], B.x[ix], B.z[j], v[0], v[1], v[2]});
            }
    t.write(c.out / "boundary_profile.csv", c.meta({{"T_used", format_real(T)}}));
    std::cout << "boundary: T_used=" << format_real(T) << " tail=" << format_real(B.tail())
              << " max=" << format_real(B.max_abs()) << "\n";
}

void cmd_profiles(const Context& c, const std::string& layer)
{
    const auto& sc = c.run.scenario;
    if (layer == "boundary") {
        write_boundary(c, build_boundary_layer(sc, sc.T), sc.T);
        return;
    }
    const Layers L = build_layers(sc);
    write_internal(c, L);
    if (layer == "both") write_boundary(c, L.boundary, L.T_used);
}

void cmd_ansatz(const Context& c)
{
    const auto& sc = c.run.scenario;
    const double eps = c.run.full_epsilon;
    const Layers L = build_layers(sc);
    const int cells = cells_for(sc, eps);
    SlabConfig scfg;
    scfg.cells_per_side = cells;
    const SlabDomain dom(scfg);
    const auto x = dom.merged_nodes();
    const LimitOnGrid u0(sc.data, x, L.T_used, sc.dt_limit);
    const auto ans = assemble_ansatz(L.internal, L.boundary, u0, eps, sc.levels.v_sigma_halfwidth);

    const int steps = std::max(1, static_cast<int>(std::ceil(L.T_used / sc.dt_full - 1e-9)));
    CsvTable t({"t", "x", "a1", "a2", "a3"});
    std::vector<int> saved;
    for (int s = 0; s <= steps; s += c.run.full_save_every) saved.push_back(s);
    if (saved.back() != steps) saved.push_back(steps);
    for (int s : saved) {
        const double tt = L.T_used * s / steps;
        const auto a = ans.evaluate(tt);
        for (std::size_t i = 0; i < x.size(); ++i) t.add({tt, x[i], a[i][0], a[i][1], a[i][2]});
    }
    t.write(c.out / "ansatz.csv", c.meta({{"epsilon", format_real(eps)}, {"T_used", format_real(L.T_used)},
                                          {"grids", grid_tag(cells, sc.dt_full)}}));
    std::cout << "ansatz: epsilon=" << format_real(eps) << " T_used=" << format_real(L.T_used)
              << " file=" << (c.out / "ansatz.csv").string() << "\n";
}

const std::vector<std::string> report_columns = {
    "epsilon",      "cells_per_side", "T_used",      "err_l2",       "residual_l2", "residual_over_eps",
    "slope_running", "eclass_m0",     "eclass_m1",   "eclass_m2",    "e_conormal",  "e_normal",
    "e_sup",        "e_sup_z",        "e_sup_normal", "ansatz_neumann_defect", "max_drift", "rejections"};

std::vector<CsvCell> report_row(const EpsilonResult& r, double slope_running)
{
    const auto& e = r.eclass[2];
    return {r.epsilon,
            static_cast<long long>(r.cells_per_side),
            r.T_used,
            r.err_l2,
            r.residual_l2,
            r.residual_l2 / r.epsilon,
            slope_running,
            r.eclass[0].total(),
            r.eclass[1].total(),
            r.eclass[2].total(),
            e.conormal,
            e.normal,
            e.sup,
            e.sup_z,
            e.sup_normal,
            r.ansatz_neumann_defect,
            r.max_drift,
            static_cast<long long>(r.rejections)};
}

void cmd_converge(const Context& c, bool plot)
{
    auto sc = c.run.scenario;
    sc.validate();
    const fs::path report = c.out / "report.csv";
    if (fs::exists(report) && csv_meta_value(report, "config_hash") == c.cfg.hash_hex())
        std::cerr << "note: rerun of config_hash=" << c.cfg.hash_hex() << ", overwriting " << report.string() << "\n";

    const Layers L = build_layers(sc);
    std::vector<EpsilonResult> rows(sc.epsilons.size());
    ScenarioConfig inner = sc;
    inner.jobs = 1;
    parallel_for(rows.size(), sc.jobs, [&](std::size_t i) {
        rows[i] = run_epsilon(inner, L, sc.epsilons[i]);
        CsvTable t(report_columns);
        t.add(report_row(rows[i], std::nan("")));
        t.write(c.out / ("converge_eps_" + std::to_string(i) + ".csv"),
                c.meta({{"epsilon", format_real(rows[i].epsilon)}, {"grids", grid_tag(rows[i].cells_per_side, sc.dt_full)}}));
    });

    const auto rep = assemble_report(std::move(rows), L);
    CsvTable t(report_columns);
    for (std::size_t i = 0; i < rep.rows.size(); ++i) t.add(report_row(rep.rows[i], rep.slope_running[i]));
    t.write(report, c.meta({{"scenario", sc.name}, {"slope", format_real(rep.slope)}, {"T_used", format_real(rep.T_used)},
                            {"T_halvings", std::to_string(rep.T_halvings)}}));
    if (plot) {
        std::vector<double> e, v;
        for (const auto& r : rep.rows) {
            e.push_back(r.epsilon);
            v.push_back(r.err_l2);
        }
        std::ofstream svg(c.out / "plot.svg", std::ios::binary);
        svg << loglog_svg(e, v, rep.slope, sc.name + ": L2 error against epsilon");
        if (!svg) throw ValidationError("cannot write plot.svg");
    }
    std::cout << "converge: scenario=" << sc.name << " slope=" << format_real(rep.slope)
              << " T_used=" << format_real(rep.T_used) << " rows=" << rep.rows.size()
              << " file=" << report.string() << "\n";
}

/// Band-limited random periodic field (modes |k| ≤ 3, no constant term).
PeriodicField random_field(int n, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    PeriodicField f(n, 2.0 * std::numbers::pi);
    struct Mode {
        int k[3];
        Vec3 a, b;
    };
    std::vector<Mode> modes;
    for (int m = 0; m < 6; ++m) {
        Mode md;
        do {
            for (int& k : md.k) k = static_cast<int>(std::floor(U(rng) * 3.999));
        } while (md.k[0] == 0 && md.k[1] == 0 && md.k[2] == 0);
        md.a = {U(rng), U(rng), U(rng)};
        md.b = {U(rng), U(rng), U(rng)};
        modes.push_back(md);
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const double x[3] = {f.h() * i, f.h() * j, f.h() * k};
                Vec3 v{};
                for (const auto& md : modes) {
                    const double ph = md.k[0] * x[0] + md.k[1] * x[1] + md.k[2] * x[2];
                    v += std::cos(ph) * md.a + std::sin(ph) * md.b;
                }
                f(i, j, k) = v;
            }
    return f;
}

int cmd_check_stray(const Context& c)
{
    std::mt19937_64 rng(c.run.seed);
    const int n = c.run.stray_n;
    const auto u = random_field(n, rng);
    const auto back = div_curl_inverse(spectral_div(u), spectral_curl(u));
    const double roundtrip = max_abs_diff(u, back);

    const auto m = random_field(n, rng);
    const auto H = stray_field_spectral(m);
    const double curl = max_abs(spectral_curl(H));
    PeriodicField Hm = H;
    for (std::size_t i = 0; i < Hm.v.size(); ++i) Hm.v[i] += m.v[i];
    double div = 0.0;
    for (double d : spectral_div(Hm)) div = std::max(div, std::fabs(d));

    std::uniform_real_distribution<double> Ud(-1.0, 1.0);
    double layer = 0.0;
    for (int s = 0; s < 1000; ++s) {
        const Vec3 u0 = normalized(Vec3{Ud(rng), Ud(rng), Ud(rng)});
        const Vec3 Uv{Ud(rng), Ud(rng), Ud(rng)};
        const Vec3 lhs = stray_1d(u0 + Uv) - stray_1d(u0);
        layer = std::max(layer, max_abs(lhs - layer_strayfield_correction(Uv, e1)));
    }

    CsvTable t({"quantity", "value", "tolerance"});
    t.add({std::string("roundtrip"), roundtrip, c.run.stray_tol});
    t.add({std::string("curl_of_stray"), curl, c.run.stray_tol});
    t.add({std::string("div_of_induction"), div, c.run.stray_tol});
    t.add({std::string("layer_identity"), layer, 1e-14});
    t.write(c.out / "stray.csv", c.meta({{"grids", "n:" + std::to_string(n)}, {"seed", std::to_string(c.run.seed)}}));

    std::cout << "check-stray: max_roundtrip_error=" << format_real(roundtrip) << " max_curl=" << format_real(curl)
              << " max_div=" << format_real(div) << " layer_identity=" << format_real(layer) << "\n";
    const bool ok = roundtrip <= c.run.stray_tol && curl <= c.run.stray_tol && div <= c.run.stray_tol && layer <= 1e-14;
    if (!ok) throw SolverAbort("stray-field identity above tolerance");
    return 0;
}

const char* csv_help = R"(Output files (first line: "# ferrolayer key=value ..." metadata, then a CSV header):
  limit     limit.csv             t,x,side,u1,u2,u3
  full      full.csv              t,x,u1,u2,u3
  profiles  internal_profile.csv  t,x,side,y,U1,U2,U3
            picard_trace.csv      iteration,distance,ratio
            boundary_profile.csv  t,x,z,V1,V2,V3
  ansatz    ansatz.csv            t,x,a1,a2,a3
  converge  converge_eps_<i>.csv  one row per epsilon, columns as report.csv
            report.csv            epsilon,cells_per_side,T_used,err_l2,residual_l2,residual_over_eps,
                                  slope_running,eclass_m0,eclass_m1,eclass_m2,e_conormal,e_normal,
                                  e_sup,e_sup_z,e_sup_normal,ansatz_neumann_defect,max_drift,rejections
            plot.svg              with --plot
  check-stray stray.csv           quantity,value,tolerance
Exit status: 0 success, 2 validation error, 3 solver abort. Errors print one line "error: exit=N reason=...".
Output directory: --out, else $FERROLAYER_OUT, else run.out from the config.)";

int fail(int code, const std::string& reason)
{
    std::string r = reason;
    for (char& ch : r)
        if (ch == '\n') ch = ' ';
    std::cerr << "error: exit=" << code << " reason=" << r << "\n";
    return code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Thin-film micromagnetics: interface and boundary layer experiments"};
    app.footer(csv_help);
    app.require_subcommand(1);
    Options o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "Configuration file")->required();
        sub->add_option("--out", o.out, "Output directory");
        sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--plot", o.plot, "Write plot.svg (converge)");
        sub->add_option("--tol-override", o.overrides, "Override a config key, KEY=VALUE (repeatable)");
    };
    std::vector<CLI::App*> subs;
    for (const char* name : {"limit", "full", "profiles", "ansatz", "converge", "check-stray"}) {
        auto* s = app.add_subcommand(name);
        add_common(s);
        subs.push_back(s);
    }
    subs[0]->description("Integrate the limit model on the slab");
    subs[1]->description("Integrate the full model at full.epsilon from the raw initial data");
    subs[2]->description("Compute internal and/or boundary layer profiles");
    subs[2]->add_option("--layer", o.layer, "internal, boundary or both")->check(CLI::IsMember({"internal", "boundary", "both"}));
    subs[3]->description("Evaluate the layer ansatz at full.epsilon on the solver grid");
    subs[4]->description("Epsilon convergence study against the limit model");
    subs[5]->description("Verify the stray-field identities");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(2, std::string("usage: ") + e.what());
    }

    try {
        for (auto* s : subs) {
            if (!s->parsed()) continue;
            const std::string name = s->get_name();
            const Context c = load_context(o, name);
            if (name == "limit") cmd_limit(c);
            else if (name == "full") cmd_full(c);
            else if (name == "profiles") cmd_profiles(c, o.layer);
            else if (name == "ansatz") cmd_ansatz(c);
            else if (name == "converge") cmd_converge(c, o.plot);
            else if (name == "check-stray") return cmd_check_stray(c);
        }
    } catch (const ValidationError& e) {
        return fail(2, e.what());
    } catch (const SolverAbort& e) {
        return fail(3, e.what());
    } catch (const std::exception& e) {
        return fail(3, e.what());
    }
    return 0;
}
