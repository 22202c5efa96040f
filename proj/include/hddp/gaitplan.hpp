#pragma once

// Gait builder: experiment files, contact phase schedules, swing references
// and the shooting problems of the six RH5 motion families.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hddp/limits.hpp"
#include "hddp/problem.hpp"
#include "hddp/rh5.hpp"
#include "hddp/solver.hpp"

namespace hddp
{

inline constexpr int kMaxKnots = 10000;

enum class Motion
{
    WalkWeights,
    WalkFast,
    SquatWeights,
    Jump1cm,
    Jump10cm,
    JumpObstacles
};

enum class MotionFamily
{
    Walk,
    Squat,
    Jump,
    ObstacleJump
};

inline const std::vector<std::pair<Motion, std::string>>& motion_names()
{
    static const std::vector<std::pair<Motion, std::string>> names = {
        {Motion::WalkWeights, "walk_weights"}, {Motion::WalkFast, "walk_fast"}, {Motion::SquatWeights, "squat_weights"},
        {Motion::Jump1cm, "jump_1cm"},         {Motion::Jump10cm, "jump_10cm"}, {Motion::JumpObstacles, "jump_obstacles"}};
    return names;
}

inline std::string to_string(Motion m)
{
    for (const auto& [k, v] : motion_names())
        if (k == m) return v;
    return "?";
}

inline Motion motion_from_string(const std::string& s)
{
    for (const auto& [k, v] : motion_names())
        if (v == s) return k;
    throw std::invalid_argument("unknown motion '" + s + "'");
}

inline MotionFamily family(Motion m)
{
    switch (m)
    {
        case Motion::WalkWeights:
        case Motion::WalkFast: return MotionFamily::Walk;
        case Motion::SquatWeights: return MotionFamily::Squat;
        case Motion::Jump1cm:
        case Motion::Jump10cm: return MotionFamily::Jump;
        case Motion::JumpObstacles: return MotionFamily::ObstacleJump;
    }
    return MotionFamily::Walk;
}

enum class WarmStart
{
    QuasiStatic,
    ComInterpolated
};

inline std::string to_string(WarmStart w) { return w == WarmStart::QuasiStatic ? "quasi-static" : "com-interpolated"; }

inline WarmStart warm_start_from_string(const std::string& s)
{
    if (s == "quasi-static") return WarmStart::QuasiStatic;
    if (s == "com-interpolated") return WarmStart::ComInterpolated;
    throw std::invalid_argument("unknown warm start '" + s + "' (quasi-static, com-interpolated)");
}

/// Which cost families a problem carries.
struct ConstraintFlags
{
    bool foot = false, com = false, friction = false, cop = false, joint = false, posture = false, torque = false;

    bool operator==(const ConstraintFlags&) const = default;
};

/// Default cost families of each motion.
inline ConstraintFlags default_flags(Motion m)
{
    switch (m)
    {
        case Motion::WalkWeights: return {true, false, true, true, true, true, true};
        case Motion::WalkFast: return {true, true, false, false, true, true, true};
        case Motion::SquatWeights: return {true, true, true, true, true, true, true};
        case Motion::Jump1cm:
        case Motion::Jump10cm: return {true, false, true, true, true, true, true};
        case Motion::JumpObstacles: return {true, false, true, true, true, false, true};
    }
    return {};
}

struct CostWeights
{
    double foot = 1e6;
    double com = 1e6;
    double friction = 1e1;
    double cop = 1e7;
    double joint = 1e6;
    double posture = 1e1;
    double torque = 1e-3;
    double terminal = 1.0;  // multiplier on terminal terms

    // posture weights per tangent block
    double base_position = 0.0;
    double base_orientation = 500.0;
    double joint_position = 0.01;
    double velocity = 10.0;
};

struct LimitScale
{
    std::string joint;
    LimitKind kind = LimitKind::Velocity;
    double factor = 1.0;
};

/// "knee:velocity[:3]"
inline LimitScale parse_limit_scale(const std::string& s)
{
    std::vector<std::string> parts;
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() < 2 || parts.size() > 3 || parts[0].empty())
        throw std::invalid_argument("limit '" + s + "': expected joint:kind or joint:kind:factor");
    LimitScale l{parts[0], limit_kind_from_string(parts[1]), 1.0};
    if (parts.size() == 3)
    {
        std::size_t used = 0;
        l.factor = std::stod(parts[2], &used);
        if (used != parts[2].size() || !(l.factor > 0.0)) throw std::invalid_argument("limit '" + s + "': bad factor");
    }
    return l;
}

struct ExperimentSpec
{
    Motion motion = Motion::WalkWeights;
    double length = 0.0;      // m, forward displacement
    double height = 0.0;      // m, swing apex or jump height (squat: CoM depth)
    double total_time = 1.0;  // s
    double knot_dt = 0.03;    // s
    double payload_kg = 0.0;  // per hand
    ConstraintFlags flags;
    CostWeights weights;
    WrenchConeSpec cone;
    WarmStart warm_start = WarmStart::QuasiStatic;

    int steps = 2;                      // walking steps
    int jumps = 3;                      // obstacle jumps
    double double_support_ratio = 0.3;  // share of each step period in double support
    double stance_angle = rh5::deg(20.0);
    bool impacts = true;
    double joint_margin = 0.95;      // barrier bounds as a share of the hardware ranges
    double torque_box_scale = 1.0;   // solver control box as a multiple of the effort limits
    std::vector<LimitScale> limit_scales;
    SolverOptions solver;

    int knots() const { return static_cast<int>(std::llround(total_time / knot_dt)); }

    void validate() const
    {
        auto positive = [](double v, const char* what)
        {
            if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string("experiment: ") + what + " must be > 0");
        };
        positive(total_time, "total_time");
        positive(knot_dt, "knot_dt");
        const double n = total_time / knot_dt;
        if (std::abs(n - std::round(n)) > 1e-9)
            throw std::invalid_argument("experiment: total_time / knot_dt = " + detail::fmt17(n) + " is not an integer");
        if (knots() > kMaxKnots) throw std::invalid_argument("experiment: more than 10000 knots");
        if (payload_kg < 0.0) throw std::invalid_argument("experiment: payload must be >= 0");
        if (length < 0.0 || height < 0.0) throw std::invalid_argument("experiment: length and height must be >= 0");
        const CostWeights& w = weights;
        for (double v : {w.foot, w.com, w.friction, w.cop, w.joint, w.posture, w.torque, w.terminal, w.base_position, w.base_orientation,
                         w.joint_position, w.velocity})
            if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("experiment: weights must be finite and >= 0");
        cone.validate();
        if (steps < 1) throw std::invalid_argument("experiment: steps must be >= 1");
        if (jumps < 1) throw std::invalid_argument("experiment: jumps must be >= 1");
        if (!(double_support_ratio > 0.0 && double_support_ratio < 1.0))
            throw std::invalid_argument("experiment: double_support_ratio must be in (0, 1)");
        if (!(joint_margin > 0.0 && joint_margin <= 1.0)) throw std::invalid_argument("experiment: joint_margin must be in (0, 1]");
        positive(torque_box_scale, "torque_box_scale");
        if (family(motion) == MotionFamily::Jump || family(motion) == MotionFamily::ObstacleJump) positive(height, "jump height");
        if (solver.max_iters < 0 || !(solver.tol > 0.0) || !(solver.alpha_min > 0.0 && solver.alpha_min <= 1.0))
            throw std::invalid_argument("experiment: bad solver options");
    }
};

/// Motion defaults before a file overrides them.
inline ExperimentSpec default_spec(Motion m)
{
    ExperimentSpec s;
    s.motion = m;
    s.flags = default_flags(m);
    s.solver.reg_increase_alpha = 0.01;
    s.solver.reg_decrease_alpha = 0.5;
    switch (m)
    {
        case Motion::WalkWeights:
            s.length = 0.5, s.height = 0.05, s.total_time = 1.5, s.knot_dt = 0.03, s.payload_kg = 5.0;
            break;
        case Motion::WalkFast:
            s.length = 0.7, s.height = 0.1, s.total_time = 0.72, s.knot_dt = 0.03;
            s.steps = 3;
            s.weights.com = 1e5;
            s.warm_start = WarmStart::ComInterpolated;
            break;
        case Motion::SquatWeights: s.height = 0.2, s.total_time = 1.98, s.knot_dt = 0.03, s.payload_kg = 5.0; break;
        case Motion::Jump1cm: s.height = 0.01, s.total_time = 0.9, s.knot_dt = 0.01; break;
        case Motion::Jump10cm:
            s.height = 0.1, s.total_time = 0.9, s.knot_dt = 0.01;
            s.solver.max_iters = 800;
            break;
        case Motion::JumpObstacles:
            s.length = 0.6, s.height = 0.25, s.total_time = 2.7, s.knot_dt = 0.01;
            s.torque_box_scale = 3.0;
            break;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Experiment files

namespace detail
{

/// Line of `key` in `[section]`, or of the section header when key is empty; 0 if absent.
inline int find_key_line(const std::string& text, const std::string& section, const std::string& key)
{
    std::istringstream in(text);
    std::string line, current;
    for (int n = 1; std::getline(in, line); ++n)
    {
        const auto b = line.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        line = line.substr(b);
        if (line[0] == '[')
        {
            current = line.substr(1, line.find(']') - 1);
            if (key.empty() && current == section) return n;
        }
        else if (current == section && line.compare(0, key.size(), key) == 0)
        {
            const auto rest = line.find_first_not_of(" \t", key.size());
            if (rest != std::string::npos && line[rest] == '=') return n;
        }
    }
    return 0;
}

inline bool parse_bool(const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

inline double parse_double(const std::string& v)
{
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("expected a number, got '" + v + "'");
    return d;
}

inline int parse_int(const std::string& v)
{
    std::size_t used = 0;
    const int i = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument("expected an integer, got '" + v + "'");
    return i;
}

}  // namespace detail

/// Parse an experiment file. Errors are ParseError with the file and line.
inline ExperimentSpec parse_experiment(std::istream& in, const std::string& file = "<experiment>")
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    try
    {
        std::istringstream body(text);
        pt::read_ini(body, tree);
    }
    catch (const pt::ini_parser_error& e)
    {
        throw ParseError(file, static_cast<int>(e.line()), e.message());
    }

    static const std::map<std::string, std::vector<std::string>> known = {
        {"motion", {"type", "length", "height", "steps", "jumps", "stance_angle_deg"}},
        {"timing", {"total_time", "knot_dt", "double_support_ratio", "impacts"}},
        {"constraints", {"foot", "com", "friction", "cop", "joint", "posture", "torque"}},
        {"weights",
         {"foot", "com", "friction", "cop", "joint", "posture", "torque", "terminal", "base_position", "base_orientation", "joint_position",
          "velocity", "mu", "cop_coverage", "joint_margin", "torque_box_scale"}},
        {"warm_start", {"type"}},
        {"payload", {"mass_per_hand"}},
        {"solver", {"max_iters", "tol", "reg_init", "reg_increase_alpha", "reg_decrease_alpha", "alpha_min", "acceptance_ratio", "threads"}},
        {"limits", {"scale"}},
    };
    auto line_of = [&](const std::string& sec, const std::string& key) { return detail::find_key_line(text, sec, key); };
    for (const auto& [sec, body] : tree)
    {
        const auto it = known.find(sec);
        if (it == known.end()) throw ParseError(file, line_of(sec, ""), "unknown section [" + sec + "]");
        for (const auto& [key, val] : body)
            if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
                throw ParseError(file, line_of(sec, key), "unknown key '" + key + "' in [" + sec + "]");
    }

    const auto type = tree.get_optional<std::string>("motion.type");
    if (!type) throw ParseError(file, 0, "missing [motion] type");
    ExperimentSpec s;
    try
    {
        s = default_spec(motion_from_string(*type));
    }
    catch (const std::exception& e)
    {
        throw ParseError(file, line_of("motion", "type"), e.what());
    }

    auto with = [&](const std::string& sec, const std::string& key, auto&& apply)
    {
        const auto v = tree.get_optional<std::string>(sec + "." + key);
        if (!v) return;
        try
        {
            apply(*v);
        }
        catch (const std::exception& e)
        {
            throw ParseError(file, line_of(sec, key), "[" + sec + "] " + key + ": " + e.what());
        }
    };
    auto num = [&](const std::string& sec, const std::string& key, double& out)
    { with(sec, key, [&](const std::string& v) { out = detail::parse_double(v); }); };
    auto flag = [&](const std::string& sec, const std::string& key, bool& out)
    { with(sec, key, [&](const std::string& v) { out = detail::parse_bool(v); }); };
    auto integer = [&](const std::string& sec, const std::string& key, int& out)
    { with(sec, key, [&](const std::string& v) { out = detail::parse_int(v); }); };

    num("motion", "length", s.length);
    num("motion", "height", s.height);
    integer("motion", "steps", s.steps);
    integer("motion", "jumps", s.jumps);
    with("motion", "stance_angle_deg", [&](const std::string& v) { s.stance_angle = rh5::deg(detail::parse_double(v)); });
    num("timing", "total_time", s.total_time);
    num("timing", "knot_dt", s.knot_dt);
    num("timing", "double_support_ratio", s.double_support_ratio);
    flag("timing", "impacts", s.impacts);
    flag("constraints", "foot", s.flags.foot);
    flag("constraints", "com", s.flags.com);
    flag("constraints", "friction", s.flags.friction);
    flag("constraints", "cop", s.flags.cop);
    flag("constraints", "joint", s.flags.joint);
    flag("constraints", "posture", s.flags.posture);
    flag("constraints", "torque", s.flags.torque);
    CostWeights& w = s.weights;
    num("weights", "foot", w.foot);
    num("weights", "com", w.com);
    num("weights", "friction", w.friction);
    num("weights", "cop", w.cop);
    num("weights", "joint", w.joint);
    num("weights", "posture", w.posture);
    num("weights", "torque", w.torque);
    num("weights", "terminal", w.terminal);
    num("weights", "base_position", w.base_position);
    num("weights", "base_orientation", w.base_orientation);
    num("weights", "joint_position", w.joint_position);
    num("weights", "velocity", w.velocity);
    num("weights", "mu", s.cone.mu);
    num("weights", "cop_coverage", s.cone.coverage);
    num("weights", "joint_margin", s.joint_margin);
    num("weights", "torque_box_scale", s.torque_box_scale);
    with("warm_start", "type", [&](const std::string& v) { s.warm_start = warm_start_from_string(v); });
    num("payload", "mass_per_hand", s.payload_kg);
    integer("solver", "max_iters", s.solver.max_iters);
    num("solver", "tol", s.solver.tol);
    num("solver", "reg_init", s.solver.reg_init);
    num("solver", "reg_increase_alpha", s.solver.reg_increase_alpha);
    num("solver", "reg_decrease_alpha", s.solver.reg_decrease_alpha);
    num("solver", "alpha_min", s.solver.alpha_min);
    num("solver", "acceptance_ratio", s.solver.acceptance_ratio);
    integer("solver", "threads", s.solver.threads);
    with("limits", "scale",
         [&](const std::string& v)
         {
             std::stringstream ss(v);
             for (std::string item; std::getline(ss, item, ',');)
             {
                 item.erase(0, item.find_first_not_of(" \t"));
                 item.erase(item.find_last_not_of(" \t") + 1);
                 if (!item.empty()) s.limit_scales.push_back(parse_limit_scale(item));
             }
         });
    s.solver.reg_min = std::min(s.solver.reg_min, s.solver.reg_init);

    try
    {
        s.validate();
    }
    catch (const std::exception& e)
    {
        throw ParseError(file, 0, e.what());
    }
    return s;
}

inline ExperimentSpec load_experiment(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open experiment file");
    return parse_experiment(in, path);
}

/// Fixture directory: $HDDP_FIXTURES, else the source tree's fixtures/.
inline std::string fixtures_dir()
{
    if (const char* env = std::getenv("HDDP_FIXTURES"); env && *env) return env;
#ifdef HDDP_SOURCE_DIR
    return std::string(HDDP_SOURCE_DIR) + "/fixtures";
#else
    return "fixtures";
#endif
}

/// Resolve a fixture name ("walk_weights") or a path to an experiment file.
inline std::string experiment_path(const std::string& name_or_path)
{
    if (std::ifstream(name_or_path).good()) return name_or_path;
    for (const std::string& cand : {fixtures_dir() + "/" + name_or_path, fixtures_dir() + "/" + name_or_path + ".ini"})
        if (std::ifstream(cand).good()) return cand;
    return name_or_path;
}

// ---------------------------------------------------------------------------
// Schedules and references

/// Linear ground-plane motion with a half-sine height profile peaking at
/// max(start z, goal z) + apex halfway; orientation by geodesic interpolation.
inline SE3 swing_reference(const SE3& start, const SE3& goal, double apex, double t)
{
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("swing_reference: phase fraction outside [0, 1]");
    if (t == 0.0) return start;
    if (t == 1.0) return goal;
    SE3 out;
    out.p = start.p + t * (goal.p - start.p);
    const double zs = start.p.z(), zg = goal.p.z();
    const double bump = std::max(zs, zg) + apex - 0.5 * (zs + zg);
    out.p.z() = zs + t * (zg - zs) + bump * std::sin(M_PI * t);
    out.R = start.R * so3_exp(t * so3_log(start.R.transpose() * goal.R));
    return out;
}

struct SwingTarget
{
    std::string frame;
    SE3 start, goal;
    double apex = 0.0;
};

struct Phase
{
    double duration = 0.0;
    std::vector<std::string> contacts;
    std::vector<SwingTarget> swings;
};

struct PhaseSchedule
{
    std::vector<Phase> phases;
    double knot_dt = 0.0;

    int phase_knots(std::size_t i) const { return static_cast<int>(std::llround(phases[i].duration / knot_dt)); }
    int knots() const
    {
        int n = 0;
        for (std::size_t i = 0; i < phases.size(); ++i) n += phase_knots(i);
        return n;
    }
    double total_time() const
    {
        double t = 0.0;
        for (const auto& p : phases) t += p.duration;
        return t;
    }

    void validate() const
    {
        if (!(knot_dt > 0.0)) throw std::invalid_argument("schedule: knot_dt must be > 0");
        if (phases.empty()) throw std::invalid_argument("schedule: no phases");
        for (const auto& p : phases)
        {
            if (!(p.duration > 0.0)) throw std::invalid_argument("schedule: phase durations must be > 0");
            const double n = p.duration / knot_dt;
            if (std::abs(n - std::round(n)) > 1e-9)
                throw std::invalid_argument("schedule: phase duration " + detail::fmt17(p.duration) + " is not a whole number of knots");
            for (const auto& s : p.swings)
                if (std::find(p.contacts.begin(), p.contacts.end(), s.frame) != p.contacts.end())
                    throw std::invalid_argument("schedule: frame " + s.frame + " both swings and stands");
        }
    }
};

/// Contact schedule of a motion from the initial foot placements.
inline PhaseSchedule make_schedule(const ExperimentSpec& spec, const SE3& left0, const SE3& right0)
{
    spec.validate();
    const double dt = spec.knot_dt;
    const int N = spec.knots();
    const std::string L = rh5::kLeftFoot, R = rh5::kRightFoot;
    PhaseSchedule s;
    s.knot_dt = dt;
    auto shifted = [](SE3 p, double dx)
    {
        p.p.x() += dx;
        return p;
    };

    switch (family(spec.motion))
    {
        case MotionFamily::Walk:
        {
            // steps alternate right, left, ...; step i lands the swing foot at
            // length * min(i, n - 1) / (n - 1) so the last two steps close the stance
            const int n = spec.steps;
            // double-support knots are rounded per phase; single support takes the rest
            const int ds = static_cast<int>(std::floor(N * spec.double_support_ratio / n + 0.5));
            const int ss_total = N - n * ds;
            if (ds < 1 || ss_total < n) throw std::invalid_argument("schedule: horizon too short for the step pattern");
            SE3 pos[2] = {right0, left0};
            const std::string name[2] = {R, L};
            for (int i = 1; i <= n; ++i)
            {
                const int ss = i < n ? ss_total / n : ss_total - (n - 1) * (ss_total / n);
                s.phases.push_back({ds * dt, {L, R}, {}});
                const int f = (i - 1) % 2;
                const double frac = n == 1 ? 1.0 : std::min(i, n - 1) / static_cast<double>(n - 1);
                const SE3 goal = shifted(f == 0 ? right0 : left0, spec.length * frac);
                s.phases.push_back({ss * dt, {name[1 - f]}, {{name[f], pos[f], goal, spec.height}}});
                pos[f] = goal;
            }
            break;
        }
        case MotionFamily::Squat: s.phases.push_back({N * dt, {L, R}, {}}); break;
        case MotionFamily::Jump:
        case MotionFamily::ObstacleJump:
        {
            const int jumps = family(spec.motion) == MotionFamily::Jump ? 1 : spec.jumps;
            const double t_flight = 2.0 * std::sqrt(2.0 * spec.height / kGravity);
            const int nf = std::max(1, static_cast<int>(std::llround(t_flight / dt)));
            const int stance_total = N - jumps * nf;
            if (stance_total < jumps + 1) throw std::invalid_argument("schedule: horizon too short for the flight phases");
            SE3 l = left0, r = right0;
            for (int j = 0; j <= jumps; ++j)
            {
                const int ns = j < jumps ? stance_total / (jumps + 1) : stance_total - jumps * (stance_total / (jumps + 1));
                s.phases.push_back({ns * dt, {L, R}, {}});
                if (j == jumps) break;
                const double dx = spec.length / jumps;
                const SE3 lg = shifted(l, dx), rg = shifted(r, dx);
                s.phases.push_back({nf * dt, {}, {{L, l, lg, spec.height}, {R, r, rg, spec.height}}});
                l = lg, r = rg;
            }
            break;
        }
    }
    s.validate();
    if (s.knots() != N) throw InvariantError("schedule", "knot count differs from total_time / knot_dt");
    return s;
}

// ---------------------------------------------------------------------------
// Problems

/// Model with payload point masses and limit scales applied.
/// Base model carrying `kg` in each hand.
inline RobotModel payload_model(const RobotModel& base, double kg)
{
    return kg > 0.0 ? with_point_masses(base, rh5::kHands, kg) : base;
}

inline RobotModel effective_model(const RobotModel& base, const ExperimentSpec& spec)
{
    RobotModel m = payload_model(base, spec.payload_kg);
    for (const auto& l : spec.limit_scales) m = scale_limit(std::move(m), l.joint, l.kind, l.factor);
    return m;
}

/// Per-knot bookkeeping kept next to the shooting problem.
struct KnotInfo
{
    double time = 0.0;
    bool impulse = false;
    std::vector<std::string> contacts;
};

struct GaitProblem
{
    ExperimentSpec spec;
    std::shared_ptr<const RobotModel> model;
    PhaseSchedule schedule;
    ShootingProblem problem;
    std::vector<KnotInfo> knots;  // one per running knot
    std::vector<std::string> contact_frames;  // every frame that is ever in contact
    State x0;
    Vec3 com0 = Vec3::Zero();
    int running_knots = 0;  // time-advancing knots (impulse knots excluded)

    std::function<Vec3(double)> com_reference;
    std::function<State(double)> posture_reference;

    const RobotKnot& knot(int k) const { return static_cast<const RobotKnot&>(*problem.running[k]); }
};

/// Barrier bounds: ranges shrunk about their centre, rates scaled.
inline CostTerm joint_barrier(const RobotModel& m, double margin, double w)
{
    const JointLimits lim = joint_limits(m);
    VecX lo(2 * m.nu), hi(2 * m.nu);
    const VecX c = 0.5 * (lim.lower + lim.upper), h = 0.5 * margin * (lim.upper - lim.lower);
    lo << c - h, -margin * lim.velocity;
    hi << c + h, margin * lim.velocity;
    return CostTerm::joint_limits(lo, hi, w);
}

inline VecX posture_weights(const RobotModel& m, const CostWeights& w)
{
    VecX s(2 * m.nv);
    s.head<3>().setConstant(w.base_position);
    s.segment<3>(3).setConstant(w.base_orientation);
    s.segment(6, m.nv - 6).setConstant(w.joint_position);
    s.tail(m.nv).setConstant(w.velocity);
    return s;
}

inline GaitProblem build_problem(const RobotModel& base, const ExperimentSpec& spec)
{
    spec.validate();
    for (const auto& f : {rh5::kLeftFoot, rh5::kRightFoot})
        if (!base.has_frame(f)) throw std::invalid_argument("model has no frame '" + f + "'");
    if (spec.payload_kg > 0.0)
        for (const auto& f : rh5::kHands)
            if (!base.has_frame(f)) throw std::invalid_argument("model has no frame '" + f + "'");

    GaitProblem g;
    g.spec = spec;
    auto model = std::make_shared<const RobotModel>(effective_model(base, spec));
    g.model = model;
    const RobotModel& m = *model;
    g.x0 = rh5::standing_state(m, spec.stance_angle);
    const Placements pl0 = forward_kinematics(m, g.x0.q);
    const SE3 left0 = pl0.frames[m.frame_id(rh5::kLeftFoot)], right0 = pl0.frames[m.frame_id(rh5::kRightFoot)];
    g.schedule = make_schedule(spec, left0, right0);
    g.com0 = center_of_mass(m, g.x0.q);
    g.contact_frames = {rh5::kLeftFoot, rh5::kRightFoot};
    g.running_knots = g.schedule.knots();

    const double T = spec.total_time, L = spec.length, H = spec.height;
    const MotionFamily fam = family(spec.motion);
    const Vec3 com0 = g.com0;
    g.com_reference = [=](double t)
    {
        Vec3 c = com0;
        const double s = std::clamp(t / T, 0.0, 1.0);
        if (fam == MotionFamily::Squat)
            c.z() -= 0.5 * H * (1.0 - std::cos(2.0 * M_PI * s));
        else
            c.x() += L * s;
        return c;
    };
    const State x0 = g.x0;
    g.posture_reference = [=, cr = g.com_reference](double t)
    {
        State s = x0;
        const Vec3 d = cr(t) - com0;
        s.q[0] += d.x();
        s.q[2] += d.z();
        return s;
    };

    const CostWeights& w = spec.weights;
    const ConstraintFlags& fl = spec.flags;
    const VecX pw = posture_weights(m, w);
    const VecX u_lim = spec.torque_box_scale * m.effort_limits();
    const CostTerm barrier = joint_barrier(m, spec.joint_margin, w.joint);

    auto contact_set = [&](const std::vector<std::string>& frames, const std::map<std::string, SE3>& where)
    {
        ContactSet c;
        for (const auto& f : frames) c.push_back({m.frame_id(f), where.at(f)});
        return c;
    };
    // Current placement of every foot: stance feet stay put, swing feet follow references.
    std::map<std::string, SE3> feet = {{rh5::kLeftFoot, left0}, {rh5::kRightFoot, right0}};

    auto state_terms = [&](std::vector<CostTerm>& c, double t, const std::map<std::string, SE3>& foot_refs, double scale)
    {
        if (fl.foot)
            for (const auto& [f, ref] : foot_refs) c.push_back(CostTerm::frame_placement(m, f, ref, scale * w.foot));
        if (fl.com) c.push_back(CostTerm::com(g.com_reference(t), scale * w.com));
        if (fl.posture) c.push_back(CostTerm::posture(g.posture_reference(t), pw, scale * w.posture));
        if (fl.joint)
        {
            CostTerm b = barrier;
            b.weight *= scale;
            c.push_back(b);
        }
    };

    int ticks = 0;  // time-advancing knots so far
    std::vector<std::string> prev_contacts = {rh5::kLeftFoot, rh5::kRightFoot};
    for (std::size_t pi = 0; pi < g.schedule.phases.size(); ++pi)
    {
        const Phase& ph = g.schedule.phases[pi];
        const int n = g.schedule.phase_knots(pi);
        const double t0 = ticks * spec.knot_dt;
        const bool touchdown = std::any_of(ph.contacts.begin(), ph.contacts.end(), [&](const std::string& f)
                                           { return std::find(prev_contacts.begin(), prev_contacts.end(), f) == prev_contacts.end(); });
        if (touchdown && spec.impacts)
        {
            auto k = std::make_shared<RobotKnot>(model);
            k->is_impulse = true;
            k->contacts = contact_set(ph.contacts, feet);
            state_terms(k->costs, t0, feet, 1.0);
            k->validate();
            g.problem.running.push_back(k);
            g.knots.push_back({t0, true, ph.contacts});
        }
        for (int j = 0; j < n; ++j, ++ticks)
        {
            const double t = ticks * spec.knot_dt;
            auto k = std::make_shared<RobotKnot>(model);
            k->dt = spec.knot_dt;
            k->contacts = contact_set(ph.contacts, feet);
            k->u_lower = -u_lim;
            k->u_upper = u_lim;
            std::map<std::string, SE3> refs;
            for (const auto& f : ph.contacts) refs[f] = feet.at(f);
            for (const auto& s : ph.swings) refs[s.frame] = swing_reference(s.start, s.goal, s.apex, j / static_cast<double>(n));
            state_terms(k->costs, t, refs, 1.0);
            for (const auto& f : ph.contacts)
            {
                if (fl.friction) k->costs.push_back(CostTerm::friction_cone(m, f, spec.cone, w.friction));
                if (fl.cop) k->costs.push_back(CostTerm::cop(m, f, spec.cone, w.cop));
            }
            if (fl.torque) k->costs.push_back(CostTerm::control(VecX::Zero(m.nu), w.torque));
            k->validate();
            g.problem.running.push_back(k);
            g.knots.push_back({t, false, ph.contacts});
        }
        for (const auto& s : ph.swings) feet[s.frame] = s.goal;
        prev_contacts = ph.contacts;
    }

    auto term = std::make_shared<RobotKnot>(model);
    term->is_terminal = true;
    state_terms(term->costs, T, feet, w.terminal);
    term->validate();
    g.problem.terminal = term;
    g.problem.x0 = g.x0.stacked();
    g.problem.validate();
    return g;
}

// ---------------------------------------------------------------------------
// Warm starts

struct WarmStartGuess
{
    std::vector<VecX> xs, us;
};

/// Stance replicated (quasi-static) or translated along the CoM reference
/// (com-interpolated); controls hold each state statically where the
/// contacts allow it and are zero otherwise.
inline WarmStartGuess warm_start(const GaitProblem& g, WarmStart kind)
{
    const RobotModel& m = *g.model;
    WarmStartGuess w;
    const int N = g.problem.horizon();
    for (int k = 0; k <= N; ++k)
    {
        State s = g.x0;
        if (kind == WarmStart::ComInterpolated)
        {
            const double t = k < N ? g.knots[k].time : g.spec.total_time;
            const Vec3 d = g.com_reference(t) - g.com0;
            s.q.head<3>() += d;
        }
        w.xs.push_back(s.stacked());
    }
    for (int k = 0; k < N; ++k)
    {
        const RobotKnot& knot = g.knot(k);
        if (!knot.has_controls() || knot.contacts.empty())
        {
            w.us.push_back(VecX::Zero(m.nu));
            continue;
        }
        const StaticEquilibrium eq = static_equilibrium(m, w.xs[k].head(m.nq), knot.contacts);
        w.us.push_back(eq.feasible ? clamp_box(eq.tau, knot.u_lower, knot.u_upper) : VecX(VecX::Zero(m.nu)));
    }
    return w;
}

inline WarmStartGuess warm_start(const GaitProblem& g) { return warm_start(g, g.spec.warm_start); }

inline Solution solve_gait(const GaitProblem& g, const SolverOptions* override_opt = nullptr)
{
    const WarmStartGuess w = warm_start(g);
    BoxFddp solver(g.problem, override_opt ? *override_opt : g.spec.solver);
    return solver.solve(w.xs, w.us);
}

// ---------------------------------------------------------------------------
// Solution reports

struct CopSample
{
    double time = 0.0;
    std::string frame;
    Eigen::Vector2d cop = Eigen::Vector2d::Zero();    // sole frame, m
    Eigen::Vector2d bound = Eigen::Vector2d::Zero();  // half-widths of the allowed region
    double excursion = 0.0;                           // m outside the region, <= 0 inside
};

/// CoP of every loaded stance foot at every running knot.
struct CopReport
{
    std::vector<CopSample> samples;
    double worst_excursion = -INFINITY;  // -inf when no foot is loaded

    bool within(double tol = 0.0) const { return worst_excursion <= tol; }
};

inline CopReport cop_report(const GaitProblem& g, const Solution& sol)
{
    CopReport r;
    const Eigen::Vector2d b = cop_bound(g.spec.cone);
    for (int k = 0; k < g.problem.horizon(); ++k)
    {
        if (g.knots[k].impulse || k >= static_cast<int>(sol.wrenches.size())) continue;
        const auto& contacts = g.knots[k].contacts;
        for (std::size_t c = 0; c < contacts.size(); ++c)
        {
            const Vec6& w = sol.wrenches[k][c];
            if (!(w[2] > kCopMinNormalForce)) continue;
            CopSample s;
            s.time = g.knots[k].time;
            s.frame = contacts[c];
            s.cop = cop_from_wrench(w);
            s.bound = b;
            s.excursion = std::max(std::abs(s.cop.x()) - b.x(), std::abs(s.cop.y()) - b.y());
            r.worst_excursion = std::max(r.worst_excursion, s.excursion);
            r.samples.push_back(std::move(s));
        }
    }
    return r;
}

/// Vertical span of the centre of mass over the state trajectory.
inline double com_height_range(const RobotModel& m, const std::vector<VecX>& xs)
{
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& x : xs)
    {
        const double z = center_of_mass(m, VecX(x.head(m.nq))).z();
        lo = std::min(lo, z), hi = std::max(hi, z);
    }
    return xs.empty() ? 0.0 : hi - lo;
}

// ---------------------------------------------------------------------------
// Design scaling

struct ScalingStep
{
    double factor = 1.0;
    bool converged = false;
    bool feasible = false;     // converged and every limit respected
    double worst_ratio = 0.0;  // worst usage of the scaled limit kind
    std::vector<std::string> violators;  // joints over the scaled limit kind
    int iterations = 0;
};

struct ScalingResult
{
    double factor = 0.0;  // 0 when no factor up to the cap suffices
    bool found = false;
    std::vector<ScalingStep> log;
};

struct ScalingOptions
{
    double step = 0.5;
    double cap = 10.0;
    bool continuation = true;  // start each factor from the previous factor's solution
};

/// Smallest factor in {1, 1 + step, 1 + 2 step, ...} up to cap whose solve
/// converges and respects every limit of the scaled model. Scaling a limit
/// only reshapes the cost, so with `continuation` every solve after the
/// first starts from the previous optimum.
inline ScalingResult design_scaling_search(const RobotModel& base, ExperimentSpec spec, const std::string& joint, LimitKind kind,
                                           const ScalingOptions& opt = {},
                                           const std::function<void(const ScalingStep&)>& progress = {})
{
    if (!(opt.step > 0.0) || !(opt.cap >= 1.0)) throw std::invalid_argument("design scaling: step must be > 0 and cap >= 1");
    joints_matching(base, joint);
    ScalingResult r;
    const auto base_scales = spec.limit_scales;
    Solution prev;
    for (int i = 0;; ++i)
    {
        const double f = 1.0 + i * opt.step;
        if (f > opt.cap + 1e-12) break;
        spec.limit_scales = base_scales;
        spec.limit_scales.push_back({joint, kind, f});
        const GaitProblem g = build_problem(base, spec);
        Solution sol;
        if (opt.continuation && i > 0)
            sol = BoxFddp(g.problem, g.spec.solver).solve(prev.xs, prev.us);
        else
            sol = solve_gait(g);
        const LimitReport rep = check_limits(*g.model, sol.xs, sol.us);
        ScalingStep s{f, sol.converged(), sol.converged() && rep.ok(), rep.worst(kind), rep.violators(kind), sol.iterations};
        r.log.push_back(s);
        if (progress) progress(s);
        if (s.feasible)
        {
            r.factor = f;
            r.found = true;
            break;
        }
        prev = std::move(sol);
    }
    return r;
}

}  // namespace hddp
