#pragma once

// Robot model: kinematic tree with inertial parameters, joint limits and
// named frames, plus the line-oriented model file format.
//
//   body <name> mass=<kg> com=<x,y,z> inertia=<ixx,iyy,izz,ixy,ixz,iyz>
//   joint <name> type=<revolute|free> parent=<body|world> child=<body> axis=<x,y,z>
//         xyz=<x,y,z> rpy=<r,p,y> limits=<lo,hi> vmax=<v> taumax=<t> [actuated=<0|1>]
//   frame <name> body=<body> xyz=<x,y,z> rpy=<r,p,y>
//
// Units are m, kg, rad, N m. '#' starts a comment.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "hddp/errors.hpp"
#include "hddp/spatial.hpp"

namespace hddp
{

enum class JointType
{
    Revolute,
    Free
};

struct JointSpec
{
    std::string name;
    JointType type = JointType::Revolute;
    Vec3 axis = Vec3::UnitZ();
    SE3 placement;  // child joint frame in the parent body frame
    Vec3 rpy = Vec3::Zero();  // placement rotation as written in the file
    double lower = 0.0, upper = 0.0;
    double velocity_limit = 0.0;
    double effort_limit = 0.0;
    bool actuated = true;
    int parent_body = -1;  // -1: world
    int child_body = -1;

    // filled in by finalize()
    int parent_joint = -1;
    int q_index = 0;
    int v_index = 0;
    int u_index = -1;
    int nv() const { return type == JointType::Free ? 6 : 1; }
};

struct BodySpec
{
    std::string name;
    double mass = 0.0;
    Vec3 com = Vec3::Zero();
    Mat3 inertia = Mat3::Zero();  // about the CoM

    Inertia spatial() const { return {mass, com, inertia}; }
};

struct FrameSpec
{
    std::string name;
    int body = -1;
    SE3 placement;
    Vec3 rpy = Vec3::Zero();
};

struct RobotModel
{
    std::vector<BodySpec> bodies;
    std::vector<JointSpec> joints;  // topological order, root first
    std::vector<FrameSpec> frames;
    int nq = 0, nv = 0, nu = 0;

    // body index -> index of the joint whose child it is
    std::vector<int> body_joint;

    int frame_id(const std::string& name) const
    {
        for (std::size_t i = 0; i < frames.size(); ++i)
            if (frames[i].name == name) return static_cast<int>(i);
        throw std::out_of_range("unknown frame '" + name + "'");
    }
    bool has_frame(const std::string& name) const
    {
        return std::any_of(frames.begin(), frames.end(), [&](const FrameSpec& f) { return f.name == name; });
    }
    int joint_id(const std::string& name) const
    {
        for (std::size_t i = 0; i < joints.size(); ++i)
            if (joints[i].name == name) return static_cast<int>(i);
        throw std::out_of_range("unknown joint '" + name + "'");
    }
    double total_mass() const
    {
        double m = 0.0;
        for (const auto& b : bodies) m += b.mass;
        return m;
    }

    /// Actuated joints in control order.
    std::vector<int> actuated_joints() const
    {
        std::vector<int> out(nu);
        for (std::size_t j = 0; j < joints.size(); ++j)
            if (joints[j].u_index >= 0) out[joints[j].u_index] = static_cast<int>(j);
        return out;
    }

    /// Actuator selection matrix S (nv x nu).
    MatX selection() const
    {
        MatX S = MatX::Zero(nv, nu);
        for (const auto& j : joints)
            if (j.u_index >= 0) S(j.v_index, j.u_index) = 1.0;
        return S;
    }

    VecX effort_limits() const
    {
        VecX t(nu);
        for (const auto& j : joints)
            if (j.u_index >= 0) t[j.u_index] = j.effort_limit;
        return t;
    }
};

namespace detail
{

inline std::vector<double> parse_numbers(const std::string& s, std::size_t expected, const std::string& file, int line,
                                         const std::string& key)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        try
        {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        }
        catch (const std::exception&)
        {
            throw ParseError(file, line, "bad number '" + item + "' in " + key);
        }
    }
    if (out.size() != expected)
        throw ParseError(file, line, key + " expects " + std::to_string(expected) + " values, got " + std::to_string(out.size()));
    return out;
}

inline Vec3 vec3_of(const std::vector<double>& v) { return {v[0], v[1], v[2]}; }

struct RawJoint
{
    JointSpec spec;
    std::string parent, child;
    int line = 0;
};

struct RawFrame
{
    FrameSpec spec;
    std::string body;
    int line = 0;
};

}  // namespace detail

/// Validate invariants, order joints topologically and assign indices.
inline void finalize_model(RobotModel& model)
{
    const int nb = static_cast<int>(model.bodies.size());
    for (const auto& b : model.bodies)
    {
        if (!(b.mass >= 0.0)) throw InvariantError("body " + b.name + " mass", "must be >= 0");
        if ((b.inertia - b.inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw InvariantError("body " + b.name + " inertia", "not symmetric");
        const Eigen::SelfAdjointEigenSolver<Mat3> es(b.inertia);
        const Vec3 ev = es.eigenvalues();
        if (ev.minCoeff() < -1e-12) throw InvariantError("body " + b.name + " inertia", "not positive semidefinite");
        const double tol = 1e-12;
        if (ev[0] + ev[1] < ev[2] - tol || ev[0] + ev[2] < ev[1] - tol || ev[1] + ev[2] < ev[0] - tol)
            throw InvariantError("body " + b.name + " inertia", "violates the triangle inequality");
    }

    std::vector<int> parent_joint_of_body(nb, -1);
    int roots = 0, frees = 0;
    for (std::size_t j = 0; j < model.joints.size(); ++j)
    {
        auto& js = model.joints[j];
        if (js.child_body < 0) throw TopologyError("joint " + js.name + " has no child body");
        if (parent_joint_of_body[js.child_body] >= 0)
            throw TopologyError("body " + model.bodies[js.child_body].name + " has more than one parent joint");
        parent_joint_of_body[js.child_body] = static_cast<int>(j);
        if (js.parent_body < 0) ++roots;
        if (js.type == JointType::Free)
        {
            ++frees;
            if (js.parent_body >= 0) throw TopologyError("free joint " + js.name + " must attach to world");
        }
        if (js.type == JointType::Revolute)
        {
            const double n = js.axis.norm();
            if (n < 1e-9) throw InvariantError("joint " + js.name + " axis", "zero axis");
            js.axis /= n;
            if (!(js.lower < js.upper)) throw InvariantError("joint " + js.name + " limits", "lower must be < upper");
            if (!(js.velocity_limit > 0.0)) throw InvariantError("joint " + js.name + " vmax", "must be > 0");
            if (js.actuated && !(js.effort_limit > 0.0)) throw InvariantError("joint " + js.name + " taumax", "must be > 0");
        }
    }
    if (roots != 1) throw TopologyError("model must have exactly one root joint, found " + std::to_string(roots));
    if (frees != 1) throw TopologyError("model must have exactly one free-floating joint, found " + std::to_string(frees));
    for (int b = 0; b < nb; ++b)
        if (parent_joint_of_body[b] < 0)
            throw TopologyError("body " + model.bodies[b].name + " is not attached by any joint (multiple roots)");

    // Stable topological order; keeps file order whenever parents precede children.
    std::vector<JointSpec> ordered;
    std::vector<bool> placed(model.joints.size(), false), body_ready(nb, false);
    while (ordered.size() < model.joints.size())
    {
        bool progress = false;
        for (std::size_t j = 0; j < model.joints.size(); ++j)
        {
            if (placed[j]) continue;
            const auto& js = model.joints[j];
            if (js.parent_body < 0 || body_ready[js.parent_body])
            {
                ordered.push_back(js);
                placed[j] = true;
                body_ready[js.child_body] = true;
                progress = true;
                break;
            }
        }
        if (!progress) throw TopologyError("kinematic cycle detected");
    }
    if (ordered.front().type != JointType::Free) throw TopologyError("the root joint must be free-floating");
    model.joints = std::move(ordered);

    model.body_joint.assign(nb, -1);
    for (std::size_t j = 0; j < model.joints.size(); ++j) model.body_joint[model.joints[j].child_body] = static_cast<int>(j);
    int q = 0, v = 0, u = 0;
    for (auto& js : model.joints)
    {
        js.parent_joint = js.parent_body < 0 ? -1 : model.body_joint[js.parent_body];
        js.q_index = q;
        js.v_index = v;
        if (js.type == JointType::Free)
        {
            q += 7;
            v += 6;
            js.u_index = -1;
        }
        else
        {
            q += 1;
            v += 1;
            js.u_index = js.actuated ? u++ : -1;
        }
    }
    model.nq = q;
    model.nv = v;
    model.nu = u;

    for (const auto& f : model.frames)
        if (f.body < 0 || f.body >= nb) throw InvariantError("frame " + f.name, "unknown body");
    for (std::size_t i = 0; i < model.frames.size(); ++i)
        for (std::size_t k = i + 1; k < model.frames.size(); ++k)
            if (model.frames[i].name == model.frames[k].name) throw InvariantError("frame " + model.frames[i].name, "duplicate");
}

inline RobotModel parse_model(std::istream& in, const std::string& file = "<model>")
{
    RobotModel model;
    std::map<std::string, int> body_index;
    std::vector<detail::RawJoint> raw_joints;
    std::vector<detail::RawFrame> raw_frames;

    std::string line;
    int lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::stringstream ss(line);
        std::string kind, name;
        if (!(ss >> kind)) continue;
        if (!(ss >> name)) throw ParseError(file, lineno, kind + " without a name");
        std::map<std::string, std::string> kv;
        std::string tok;
        while (ss >> tok)
        {
            const auto eq = tok.find('=');
            if (eq == std::string::npos || eq == 0) throw ParseError(file, lineno, "expected key=value, got '" + tok + "'");
            const std::string key = tok.substr(0, eq);
            if (kv.count(key)) throw ParseError(file, lineno, "duplicate key '" + key + "'");
            kv[key] = tok.substr(eq + 1);
        }
        auto take = [&](const std::string& key) -> std::optional<std::string> {
            auto it = kv.find(key);
            if (it == kv.end()) return std::nullopt;
            std::string v = it->second;
            kv.erase(it);
            return v;
        };
        auto require = [&](const std::string& key) {
            auto v = take(key);
            if (!v) throw ParseError(file, lineno, kind + " " + name + " is missing '" + key + "'");
            return *v;
        };
        auto number = [&](const std::string& s, const std::string& key) {
            return detail::parse_numbers(s, 1, file, lineno, key)[0];
        };
        auto vec3 = [&](const std::optional<std::string>& s, const std::string& key) {
            return s ? detail::vec3_of(detail::parse_numbers(*s, 3, file, lineno, key)) : Vec3(Vec3::Zero());
        };

        if (kind == "body")
        {
            BodySpec b;
            b.name = name;
            b.mass = number(require("mass"), "mass");
            b.com = vec3(take("com"), "com");
            const auto in6 = take("inertia");
            if (in6)
            {
                const auto v = detail::parse_numbers(*in6, 6, file, lineno, "inertia");
                b.inertia << v[0], v[3], v[4], v[3], v[1], v[5], v[4], v[5], v[2];
            }
            if (body_index.count(name)) throw ParseError(file, lineno, "duplicate body '" + name + "'");
            body_index[name] = static_cast<int>(model.bodies.size());
            model.bodies.push_back(b);
        }
        else if (kind == "joint")
        {
            detail::RawJoint rj;
            rj.line = lineno;
            rj.spec.name = name;
            const std::string type = require("type");
            if (type == "revolute")
                rj.spec.type = JointType::Revolute;
            else if (type == "free")
                rj.spec.type = JointType::Free;
            else
                throw ParseError(file, lineno, "unknown joint type '" + type + "'");
            rj.parent = require("parent");
            rj.child = require("child");
            rj.spec.placement.p = vec3(take("xyz"), "xyz");
            rj.spec.rpy = vec3(take("rpy"), "rpy");
            rj.spec.placement.R = rpy_matrix(rj.spec.rpy);
            if (rj.spec.type == JointType::Revolute)
            {
                rj.spec.axis = vec3(require("axis"), "axis");
                const auto lim = detail::parse_numbers(require("limits"), 2, file, lineno, "limits");
                rj.spec.lower = lim[0];
                rj.spec.upper = lim[1];
                rj.spec.velocity_limit = number(require("vmax"), "vmax");
                rj.spec.effort_limit = number(require("taumax"), "taumax");
                if (auto a = take("actuated")) rj.spec.actuated = number(*a, "actuated") != 0.0;
            }
            raw_joints.push_back(rj);
        }
        else if (kind == "frame")
        {
            detail::RawFrame rf;
            rf.line = lineno;
            rf.spec.name = name;
            rf.body = require("body");
            rf.spec.placement.p = vec3(take("xyz"), "xyz");
            rf.spec.rpy = vec3(take("rpy"), "rpy");
            rf.spec.placement.R = rpy_matrix(rf.spec.rpy);
            raw_frames.push_back(rf);
        }
        else
        {
            throw ParseError(file, lineno, "unknown entry '" + kind + "'");
        }
        if (!kv.empty()) throw ParseError(file, lineno, "unknown key '" + kv.begin()->first + "'");
    }

    for (auto& rj : raw_joints)
    {
        if (rj.parent == "world")
            rj.spec.parent_body = -1;
        else if (auto it = body_index.find(rj.parent); it != body_index.end())
            rj.spec.parent_body = it->second;
        else
            throw ParseError(file, rj.line, "unknown parent body '" + rj.parent + "'");
        auto it = body_index.find(rj.child);
        if (it == body_index.end()) throw ParseError(file, rj.line, "unknown child body '" + rj.child + "'");
        rj.spec.child_body = it->second;
        if (rj.spec.child_body == rj.spec.parent_body) throw TopologyError("joint " + rj.spec.name + " connects a body to itself");
        model.joints.push_back(rj.spec);
    }
    for (auto& rf : raw_frames)
    {
        auto it = body_index.find(rf.body);
        if (it == body_index.end()) throw ParseError(file, rf.line, "unknown body '" + rf.body + "'");
        rf.spec.body = it->second;
        model.frames.push_back(rf.spec);
    }
    finalize_model(model);
    return model;
}

inline RobotModel parse_model_string(const std::string& text, const std::string& file = "<string>")
{
    std::istringstream in(text);
    return parse_model(in, file);
}

inline RobotModel load_model(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open model file");
    return parse_model(in, path);
}

namespace detail
{
inline std::string fmt17(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}
inline std::string fmt_list(std::initializer_list<double> xs)
{
    std::string s;
    for (double x : xs)
    {
        if (!s.empty()) s += ',';
        s += fmt17(x);
    }
    return s;
}
}  // namespace detail

/// Canonical text serialization (17 significant digits). Parsing the output
/// reproduces the model exactly; the text is used for hashing.
inline std::string write_model(const RobotModel& m)
{
    using detail::fmt17;
    using detail::fmt_list;
    std::string out;
    for (const auto& b : m.bodies)
    {
        const Mat3& I = b.inertia;
        out += "body " + b.name + " mass=" + fmt17(b.mass) + " com=" + fmt_list({b.com.x(), b.com.y(), b.com.z()}) +
               " inertia=" + fmt_list({I(0, 0), I(1, 1), I(2, 2), I(0, 1), I(0, 2), I(1, 2)}) + "\n";
    }
    for (const auto& j : m.joints)
    {
        const Vec3& rpy = j.rpy;
        out += "joint " + j.name + " type=" + (j.type == JointType::Free ? "free" : "revolute") +
               " parent=" + (j.parent_body < 0 ? std::string("world") : m.bodies[j.parent_body].name) +
               " child=" + m.bodies[j.child_body].name + " xyz=" + fmt_list({j.placement.p.x(), j.placement.p.y(), j.placement.p.z()}) +
               " rpy=" + fmt_list({rpy.x(), rpy.y(), rpy.z()});
        if (j.type == JointType::Revolute)
        {
            out += " axis=" + fmt_list({j.axis.x(), j.axis.y(), j.axis.z()}) + " limits=" + fmt_list({j.lower, j.upper}) +
                   " vmax=" + fmt17(j.velocity_limit) + " taumax=" + fmt17(j.effort_limit);
            if (!j.actuated) out += " actuated=0";
        }
        out += "\n";
    }
    for (const auto& f : m.frames)
    {
        const Vec3& rpy = f.rpy;
        out += "frame " + f.name + " body=" + m.bodies[f.body].name +
               " xyz=" + fmt_list({f.placement.p.x(), f.placement.p.y(), f.placement.p.z()}) +
               " rpy=" + fmt_list({rpy.x(), rpy.y(), rpy.z()}) + "\n";
    }
    return out;
}

/// Attach a point mass of `kg` at each named frame (payload in the hands).
inline RobotModel with_point_masses(RobotModel m, const std::vector<std::string>& frames, double kg)
{
    if (kg == 0.0) return m;
    if (kg < 0.0) throw InvariantError("payload", "mass must be >= 0");
    for (const auto& name : frames)
    {
        const auto& f = m.frames[m.frame_id(name)];
        auto& b = m.bodies[f.body];
        const Inertia merged = add_point_mass(b.spatial(), kg, f.placement.p);
        b.mass = merged.mass;
        b.com = merged.com;
        b.inertia = 0.5 * (merged.rot + merged.rot.transpose());
    }
    return m;
}

/// Joint-space position/velocity limit vectors over the actuated joints (nu).
struct JointLimits
{
    VecX lower, upper, velocity, effort;
};

inline JointLimits joint_limits(const RobotModel& m)
{
    JointLimits L{VecX(m.nu), VecX(m.nu), VecX(m.nu), VecX(m.nu)};
    for (const auto& j : m.joints)
    {
        if (j.u_index < 0) continue;
        L.lower[j.u_index] = j.lower;
        L.upper[j.u_index] = j.upper;
        L.velocity[j.u_index] = j.velocity_limit;
        L.effort[j.u_index] = j.effort_limit;
    }
    return L;
}

}  // namespace hddp
