#pragma once

// Hardware-limit checks over a trajectory: joint position, velocity and
// torque against the model table, one row per actuated joint.

#include <string>
#include <vector>

#include "hddp/model.hpp"

namespace hddp
{

enum class LimitKind
{
    Position,
    Velocity,
    Torque
};

inline const char* to_string(LimitKind k)
{
    switch (k)
    {
        case LimitKind::Position: return "position";
        case LimitKind::Velocity: return "velocity";
        case LimitKind::Torque: return "torque";
    }
    return "?";
}

inline LimitKind limit_kind_from_string(const std::string& s)
{
    if (s == "position" || s == "pos") return LimitKind::Position;
    if (s == "velocity" || s == "vel") return LimitKind::Velocity;
    if (s == "torque" || s == "effort") return LimitKind::Torque;
    throw std::invalid_argument("unknown limit kind '" + s + "' (position, velocity, torque)");
}

/// Worst usage of one joint. Ratios are <= 1 inside the limit; the position
/// ratio is measured from the centre of the range in half-ranges.
struct JointLimitRow
{
    std::string joint;
    double max_position = 0.0, max_velocity = 0.0, max_torque = 0.0;  // worst |.| seen
    double position_ratio = 0.0, velocity_ratio = 0.0, torque_ratio = 0.0;

    bool position_ok() const { return position_ratio <= 1.0; }
    bool velocity_ok() const { return velocity_ratio <= 1.0; }
    bool torque_ok() const { return torque_ratio <= 1.0; }
};

struct LimitReport
{
    std::vector<JointLimitRow> rows;

    bool position_ok() const
    {
        return std::all_of(rows.begin(), rows.end(), [](const JointLimitRow& r) { return r.position_ok(); });
    }
    bool velocity_ok() const
    {
        return std::all_of(rows.begin(), rows.end(), [](const JointLimitRow& r) { return r.velocity_ok(); });
    }
    bool torque_ok() const
    {
        return std::all_of(rows.begin(), rows.end(), [](const JointLimitRow& r) { return r.torque_ok(); });
    }
    bool ok() const { return position_ok() && velocity_ok() && torque_ok(); }

    std::vector<std::string> violators(LimitKind kind) const
    {
        std::vector<std::string> out;
        for (const auto& r : rows)
        {
            const bool bad = kind == LimitKind::Position ? !r.position_ok() : kind == LimitKind::Velocity ? !r.velocity_ok() : !r.torque_ok();
            if (bad) out.push_back(r.joint);
        }
        return out;
    }
    double worst(LimitKind kind) const
    {
        double w = 0.0;
        for (const auto& r : rows)
            w = std::max(w, kind == LimitKind::Position ? r.position_ratio
                            : kind == LimitKind::Velocity ? r.velocity_ratio
                                                          : r.torque_ratio);
        return w;
    }
};

/// States are stacked (q, v); controls have nu entries. Either list may be
/// empty; with both empty the report has no rows.
inline LimitReport check_limits(const RobotModel& m, const std::vector<VecX>& xs, const std::vector<VecX>& us)
{
    LimitReport rep;
    if (xs.empty() && us.empty()) return rep;
    for (const int jid : m.actuated_joints())
    {
        const JointSpec& j = m.joints[jid];
        JointLimitRow row;
        row.joint = j.name;
        const double centre = 0.5 * (j.lower + j.upper), half = 0.5 * (j.upper - j.lower);
        for (const auto& x : xs)
        {
            if (x.size() != m.nq + m.nv) throw DimensionError("check_limits: state has wrong dimension");
            const double q = x[j.q_index], v = x[m.nq + j.v_index];
            row.max_position = std::max(row.max_position, std::abs(q));
            row.max_velocity = std::max(row.max_velocity, std::abs(v));
            row.position_ratio = std::max(row.position_ratio, half > 0.0 ? std::abs(q - centre) / half : (q == centre ? 0.0 : INFINITY));
            row.velocity_ratio = std::max(row.velocity_ratio, std::abs(v) / j.velocity_limit);
        }
        for (const auto& u : us)
        {
            if (u.size() != m.nu) throw DimensionError("check_limits: control has wrong dimension");
            const double t = u[j.u_index];
            row.max_torque = std::max(row.max_torque, std::abs(t));
            row.torque_ratio = std::max(row.torque_ratio, std::abs(t) / j.effort_limit);
        }
        rep.rows.push_back(row);
    }
    return rep;
}

/// Joints addressed by a limit name: an exact joint name, or a name shared by
/// the left_/right_ pair ("knee" selects left_knee and right_knee).
inline std::vector<int> joints_matching(const RobotModel& m, const std::string& name)
{
    std::vector<int> out;
    for (std::size_t i = 0; i < m.joints.size(); ++i)
    {
        const std::string& n = m.joints[i].name;
        if (m.joints[i].type == JointType::Free) continue;
        if (n == name || n == "left_" + name || n == "right_" + name) out.push_back(static_cast<int>(i));
    }
    if (out.empty()) throw std::invalid_argument("no joint matches '" + name + "'");
    return out;
}

/// Copy of the model with one limit of the named joints scaled. Position
/// ranges are scaled about their centre.
inline RobotModel scale_limit(RobotModel m, const std::string& joint, LimitKind kind, double factor)
{
    if (!(factor > 0.0)) throw std::invalid_argument("scale_limit: factor must be > 0");
    for (const int id : joints_matching(m, joint))
    {
        JointSpec& j = m.joints[id];
        switch (kind)
        {
            case LimitKind::Position:
            {
                const double c = 0.5 * (j.lower + j.upper), h = 0.5 * (j.upper - j.lower);
                j.lower = c - factor * h;
                j.upper = c + factor * h;
                break;
            }
            case LimitKind::Velocity: j.velocity_limit *= factor; break;
            case LimitKind::Torque: j.effort_limit *= factor; break;
        }
    }
    return m;
}

}  // namespace hddp
