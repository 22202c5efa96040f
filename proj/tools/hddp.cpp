// hddp: solve, replay and inspect whole-body gait trajectories.
//
// Exit codes: 0 ok, 1 input error, 2 non-convergence or search cap,
// 3 replay fell or left the deviation band.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "hddp/gaitplan.hpp"
#include "hddp/hash.hpp"
#include "hddp/limits.hpp"
#include "hddp/replay.hpp"
#include "hddp/trajio.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace hddp;

namespace
{

enum Exit
{
    kOk = 0,
    kInputError = 1,
    kNotConverged = 2,
    kReplayFailed = 3
};

struct Manifest
{
    json doc;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    explicit Manifest(const std::string& command) { doc["command"] = command; }

    void input(const std::string& role, const std::string& path)
    {
        doc[role] = path;
        doc["hashes"][path] = file_blob_hash(path);
    }

    void write(const fs::path& dir)
    {
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        doc["output_dir"] = dir.string();
        doc["wall_time_s"] = wall;
        std::ofstream(dir / "manifest.json") << doc.dump(2) << "\n";
    }
};

void write_text(const fs::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

std::string format_solver_log(const Solution& sol)
{
    using detail::fmt17;
    std::string out = "iter,cost,gap,delta1,delta2,alpha,reg,expected,actual,accepted\n";
    for (const auto& L : sol.log)
        out += std::to_string(L.iter) + ',' + fmt17(L.cost) + ',' + fmt17(L.gap) + ',' + fmt17(L.delta1) + ',' + fmt17(L.delta2) + ',' +
               fmt17(L.alpha) + ',' + fmt17(L.reg) + ',' + fmt17(L.expected) + ',' + fmt17(L.actual) + ',' + (L.accepted ? "1" : "0") +
               '\n';
    return out;
}

std::string format_limits(const LimitReport& r)
{
    using detail::fmt17;
    std::string out = "joint,max_position,position_ratio,max_velocity,velocity_ratio,max_torque,torque_ratio\n";
    for (const auto& w : r.rows)
        out += w.joint + ',' + fmt17(w.max_position) + ',' + fmt17(w.position_ratio) + ',' + fmt17(w.max_velocity) + ',' +
               fmt17(w.velocity_ratio) + ',' + fmt17(w.max_torque) + ',' + fmt17(w.torque_ratio) + '\n';
    return out;
}

std::string format_cop(const CopReport& r)
{
    using detail::fmt17;
    std::string out = "t,frame,cop_x,cop_y,bound_x,bound_y,excursion\n";
    for (const auto& s : r.samples)
        out += fmt17(s.time) + ',' + s.frame + ',' + fmt17(s.cop.x()) + ',' + fmt17(s.cop.y()) + ',' + fmt17(s.bound.x()) + ',' +
               fmt17(s.bound.y()) + ',' + fmt17(s.excursion) + '\n';
    return out;
}

// Pos/Torque/Vel table with worst ratios; a mark flags ratios above 1.
void print_limit_table(std::ostream& os, const LimitReport& r)
{
    auto cell = [](double ratio)
    {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s %6.3f", ratio <= 1.0 ? "ok" : " x", ratio);
        return std::string(buf);
    };
    char line[160];
    std::snprintf(line, sizeof line, "%-18s %10s %10s %10s\n", "joint", "Pos.", "Torque", "Vel.");
    os << line;
    for (const auto& w : r.rows)
    {
        std::snprintf(line, sizeof line, "%-18s %10s %10s %10s\n", w.joint.c_str(), cell(w.position_ratio).c_str(),
                      cell(w.torque_ratio).c_str(), cell(w.velocity_ratio).c_str());
        os << line;
    }
    std::snprintf(line, sizeof line, "%-18s %10s %10s %10s\n", "overall", r.position_ok() ? "ok" : "x", r.torque_ok() ? "ok" : "x",
                  r.velocity_ok() ? "ok" : "x");
    os << line;
    for (LimitKind k : {LimitKind::Position, LimitKind::Torque, LimitKind::Velocity})
    {
        const auto v = r.violators(k);
        if (v.empty()) continue;
        os << to_string(k) << " violators:";
        for (const auto& j : v) os << ' ' << j;
        os << '\n';
    }
}

void write_gnuplot_solve(const fs::path& dir)
{
    std::string s = "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't [s]'\n";
    s += "set multiplot layout 2,1\nset ylabel 'base [m]'\nplot 'trajectory.csv' using 1:2 with lines, '' using 1:3 with lines, '' using 1:4 with lines\n";
    s += "set ylabel 'CoP [m]'\nplot 'cop.csv' using 1:3 with points, '' using 1:4 with points\nunset multiplot\n";
    write_text(dir / "plot.gp", s);
}

void write_gnuplot_replay(const fs::path& dir)
{
    write_text(dir / "plot.gp",
               "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't [s]'\nset ylabel 'deviation [m]'\n"
               "plot 'replay.csv' using 1:8 with lines, '' using 1:9 with lines, '' using 1:10 with lines\n");
}

std::string default_model() { return fixtures_dir() + "/rh5.model"; }

RobotModel apply_scales(RobotModel m, const std::vector<LimitScale>& scales)
{
    for (const auto& s : scales) m = scale_limit(std::move(m), s.joint, s.kind, s.factor);
    return m;
}

// ---------------------------------------------------------------------------

struct SolveArgs
{
    std::string experiment, model = default_model(), out = "run";
    std::optional<int> max_iters, threads;
    std::optional<double> tol, payload;
    std::optional<std::string> warm;
    std::vector<std::string> limits;
    bool gnuplot = false;
};

int cmd_solve(const SolveArgs& a)
{
    Manifest man("solve");
    const std::string exp_path = experiment_path(a.experiment);
    ExperimentSpec spec = load_experiment(exp_path);
    const RobotModel base = load_model(a.model);
    man.input("experiment", exp_path);
    man.input("model", a.model);

    json opts = json::object();
    if (a.max_iters) spec.solver.max_iters = *a.max_iters, opts["max_iters"] = *a.max_iters;
    if (a.tol) spec.solver.tol = *a.tol, opts["tol"] = *a.tol;
    if (a.threads) spec.solver.threads = *a.threads, opts["threads"] = *a.threads;
    if (a.payload) spec.payload_kg = *a.payload, opts["payload"] = *a.payload;
    if (a.warm) spec.warm_start = warm_start_from_string(*a.warm), opts["warm_start"] = *a.warm;
    for (const auto& l : a.limits) spec.limit_scales.push_back(parse_limit_scale(l));
    if (!a.limits.empty()) opts["limit"] = a.limits;
    spec.validate();
    man.doc["options"] = opts;

    const GaitProblem g = build_problem(base, spec);
    std::cout << to_string(spec.motion) << ": " << g.problem.horizon() << " knots, dt " << spec.knot_dt << " s, warm start "
              << to_string(spec.warm_start) << "\n";
    const Solution sol = solve_gait(g);

    const fs::path dir(a.out);
    fs::create_directories(dir);
    const TrajectoryFile f = make_trajectory(g, sol, payload_model(base, spec.payload_kg));
    write_trajectory(f, (dir / "trajectory.csv").string());
    write_text(dir / "solver.csv", format_solver_log(sol));
    const LimitReport lim = check_limits(*g.model, sol.xs, sol.us);
    write_text(dir / "limits.csv", format_limits(lim));
    const CopReport cop = cop_report(g, sol);
    write_text(dir / "cop.csv", format_cop(cop));
    if (a.gnuplot) write_gnuplot_solve(dir);

    std::cout << "status " << to_string(sol.status) << " after " << sol.iterations << " iterations, cost " << sol.cost << ", gap " << sol.gap
              << "\n";
    if (cop.samples.empty())
        std::cout << "CoP: no loaded stance foot\n";
    else
        std::cout << "CoP: worst excursion " << cop.worst_excursion * 1e3 << " mm (" << (cop.within() ? "inside" : "outside")
                  << " the region)\n";
    print_limit_table(std::cout, lim);
    if (sol.converged() && !lim.ok()) std::cout << "converged with limit violations\n";

    man.doc["status"] = to_string(sol.status);
    man.doc["iterations"] = sol.iterations;
    man.doc["limits_ok"] = lim.ok();
    man.write(dir);
    return sol.converged() ? kOk : kNotConverged;
}

// ---------------------------------------------------------------------------

struct ReplayArgs
{
    std::string trajectory, model = default_model(), out = "replay";
    double kp = 300.0, rate = 1000.0, xy = 0.03, z = 0.02;
    int substeps = 4;
    bool no_ff = false, hold = false, gnuplot = false;
};

int cmd_replay(const ReplayArgs& a)
{
    Manifest man("replay");
    const TrajectoryFile f = read_trajectory(a.trajectory);
    const RobotModel m = payload_model(load_model(a.model), f.payload_kg);
    check_model_hash(f, m);
    man.input("trajectory", a.trajectory);
    man.input("model", a.model);
    const ControlInterpolation ci = a.hold ? ControlInterpolation::ZeroOrderHold : ControlInterpolation::Linear;
    man.doc["options"] = {{"kp", a.kp}, {"feedforward", !a.no_ff}, {"rate", a.rate}, {"controls", to_string(ci)},
                          {"substeps", a.substeps}, {"xy", a.xy}, {"z", a.z}};

    const InterpolatedTrajectory plan = interpolate(f, a.rate, ci);
    const PdGains gains = default_gains(m, plan.q.front(), a.kp, !a.no_ff);
    ReplayOptions opt;
    opt.substeps = a.substeps;
    const ReplayReport r = replay(m, plan, f.contact_frames, gains, opt);
    const ReplayThresholds th{a.xy, a.z};

    const fs::path dir(a.out);
    fs::create_directories(dir);
    write_text(dir / "replay.csv", format_replay_csv(r));
    if (a.gnuplot) write_gnuplot_replay(dir);

    const Vec3& d = r.base_deviation;
    std::cout << (r.fell ? "fell at step " + std::to_string(r.fell_step) : "completed " + std::to_string(r.steps) + " steps") << "\n";
    std::cout << "base deviation x " << d.x() << " y " << d.y() << " z " << d.z() << " m, joint rms " << r.joint_tracking_rms << " rad\n";
    const bool pass = th.passes(r);
    std::cout << (pass ? "PASS" : "FAIL") << " (thresholds xy " << th.xy << " z " << th.z << ")\n";

    man.doc["fell"] = r.fell;
    man.doc["base_deviation"] = {d.x(), d.y(), d.z()};
    man.doc["pass"] = pass;
    man.write(dir);
    return pass ? kOk : kReplayFailed;
}

// ---------------------------------------------------------------------------

struct LimitsArgs
{
    std::string trajectory, model = default_model();
    std::optional<std::string> out;
    std::vector<std::string> limits;
};

int cmd_check_limits(const LimitsArgs& a)
{
    const TrajectoryFile f = read_trajectory(a.trajectory);
    RobotModel m = payload_model(load_model(a.model), f.payload_kg);
    check_model_hash(f, m);
    std::vector<LimitScale> scales;
    for (const auto& l : a.limits) scales.push_back(parse_limit_scale(l));
    m = apply_scales(std::move(m), scales);
    const LimitReport r = f.horizon() == 0 ? LimitReport{} : check_limits(m, f.stacked_states(), f.u);
    print_limit_table(std::cout, r);
    if (a.out)
    {
        Manifest man("check-limits");
        man.input("trajectory", a.trajectory);
        man.input("model", a.model);
        man.doc["options"] = {{"limit", a.limits}};
        const fs::path dir(*a.out);
        fs::create_directories(dir);
        write_text(dir / "limits.csv", format_limits(r));
        man.doc["limits_ok"] = r.ok();
        man.write(dir);
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct ScaleArgs
{
    std::string experiment, model = default_model(), limit;
    std::optional<std::string> out;
    double step = 0.5, cap = 10.0;
    bool cold = false;
};

int cmd_design_scale(const ScaleArgs& a)
{
    Manifest man("design-scale");
    const std::string exp_path = experiment_path(a.experiment);
    const ExperimentSpec spec = load_experiment(exp_path);
    const RobotModel base = load_model(a.model);
    const auto colon = a.limit.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("--limit expects joint:kind");
    const std::string joint = a.limit.substr(0, colon);
    const LimitKind kind = limit_kind_from_string(a.limit.substr(colon + 1));
    ScalingOptions opt{a.step, a.cap, !a.cold};

    std::cout << "factor  converged  feasible  worst_ratio  iterations  violators\n";
    const ScalingResult r = design_scaling_search(base, spec, joint, kind, opt,
                                                  [](const ScalingStep& s)
                                                  {
                                                      char buf[96];
                                                      std::snprintf(buf, sizeof buf, "%6.2f  %9s  %8s  %11.4f  %10d ", s.factor,
                                                                    s.converged ? "yes" : "no", s.feasible ? "yes" : "no",
                                                                    s.worst_ratio, s.iterations);
                                                      std::cout << buf;
                                                      for (const auto& j : s.violators) std::cout << ' ' << j;
                                                      std::cout << std::endl;
                                                  });
    if (r.found)
        std::cout << "minimal factor " << r.factor << " on " << joint << " " << to_string(kind) << "\n";
    else
        std::cout << "no factor up to " << a.cap << " suffices\n";

    if (a.out)
    {
        man.input("experiment", exp_path);
        man.input("model", a.model);
        man.doc["options"] = {{"limit", a.limit}, {"step", a.step}, {"cap", a.cap}, {"continuation", !a.cold}};
        json log = json::array();
        for (const auto& s : r.log)
            log.push_back({{"factor", s.factor}, {"converged", s.converged}, {"feasible", s.feasible}, {"worst_ratio", s.worst_ratio},
                           {"iterations", s.iterations}, {"violators", s.violators}});
        man.doc["log"] = log;
        man.doc["factor"] = r.found ? json(r.factor) : json(nullptr);
        const fs::path dir(*a.out);
        fs::create_directories(dir);
        man.write(dir);
    }
    return r.found ? kOk : kNotConverged;
}

// ---------------------------------------------------------------------------

struct InterpArgs
{
    std::string trajectory, output;
    double rate = 1000.0;
    bool hold = false;
};

int cmd_interp(const InterpArgs& a)
{
    const TrajectoryFile f = read_trajectory(a.trajectory);
    const InterpolatedTrajectory s =
        interpolate(f, a.rate, a.hold ? ControlInterpolation::ZeroOrderHold : ControlInterpolation::Linear);
    const std::string text = format_samples(s);
    if (a.output.empty() || a.output == "-")
        std::cout << text;
    else
        write_text(a.output, text);
    std::cerr << s.size() << " samples at " << a.rate << " Hz\n";
    return kOk;
}

template <class F>
int guarded(F&& f)
{
    try
    {
        return f();
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
    }
    return kInputError;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Whole-body gait optimization and replay"};
    app.require_subcommand(1);

    SolveArgs sa;
    auto* solve = app.add_subcommand("solve", "Solve an experiment file");
    solve->add_option("experiment", sa.experiment, "Experiment file or fixture name")->required();
    solve->add_option("--model", sa.model, "Robot model file");
    solve->add_option("--out", sa.out, "Output directory");
    solve->add_option("--max-iters", sa.max_iters);
    solve->add_option("--tol", sa.tol);
    solve->add_option("--threads", sa.threads);
    solve->add_option("--payload", sa.payload, "Payload per hand, kg");
    solve->add_option("--warm-start", sa.warm, "quasi-static or com-interpolated");
    solve->add_option("--limit", sa.limits, "Limit scale joint:kind:factor (repeatable)");
    solve->add_flag("--gnuplot", sa.gnuplot, "Also write plot.gp");

    ReplayArgs ra;
    auto* rep = app.add_subcommand("replay", "Replay a trajectory under PD control");
    rep->add_option("trajectory", ra.trajectory)->required();
    rep->add_option("--model", ra.model);
    rep->add_option("--out", ra.out);
    rep->add_option("--kp", ra.kp, "Proportional gain")->capture_default_str();
    rep->add_flag("--no-ff", ra.no_ff, "Drop the feedforward torque");
    rep->add_option("--rate", ra.rate, "Control rate, Hz")->capture_default_str();
    rep->add_option("--substeps", ra.substeps)->capture_default_str();
    rep->add_flag("--hold-controls", ra.hold, "Hold each knot control over its interval");
    rep->add_option("--xy", ra.xy, "Horizontal deviation bound, m")->capture_default_str();
    rep->add_option("--z", ra.z, "Vertical deviation bound, m")->capture_default_str();
    rep->add_flag("--gnuplot", ra.gnuplot);

    LimitsArgs la;
    auto* lim = app.add_subcommand("check-limits", "Per-joint limit usage of a trajectory");
    lim->add_option("trajectory", la.trajectory)->required();
    lim->add_option("--model", la.model);
    lim->add_option("--out", la.out);
    lim->add_option("--limit", la.limits, "Limit scale joint:kind:factor (repeatable)");

    ScaleArgs da;
    auto* ds = app.add_subcommand("design-scale", "Smallest limit scaling that makes an experiment feasible");
    ds->add_option("experiment", da.experiment)->required();
    ds->add_option("--model", da.model);
    ds->add_option("--limit", da.limit, "joint:kind")->required();
    ds->add_option("--step", da.step)->capture_default_str();
    ds->add_option("--cap", da.cap)->capture_default_str();
    ds->add_flag("--cold-start", da.cold, "Solve every factor from the warm start");
    ds->add_option("--out", da.out);

    InterpArgs ia;
    auto* in = app.add_subcommand("interp", "Resample a trajectory");
    in->add_option("trajectory", ia.trajectory)->required();
    in->add_option("--rate", ia.rate)->capture_default_str();
    in->add_flag("--hold-controls", ia.hold);
    in->add_option("-o,--output", ia.output);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? kOk : kInputError;
    }

    if (*solve) return guarded([&] { return cmd_solve(sa); });
    if (*rep) return guarded([&] { return cmd_replay(ra); });
    if (*lim) return guarded([&] { return cmd_check_limits(la); });
    if (*ds) return guarded([&] { return cmd_design_scale(da); });
    return guarded([&] { return cmd_interp(ia); });
}
