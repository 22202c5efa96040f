#pragma once

// Forward kinematics, frame Jacobians and centre of mass.
//
// Body quantities are indexed by joint (body j is the child of joint j).
// Spatial velocities/accelerations are expressed in the body frame.

#include <vector>

#include "hddp/state.hpp"

namespace hddp
{

enum class ReferenceFrame
{
    Local,             // frame axes, frame origin
    LocalWorldAligned  // world axes, frame origin
};

template <typename S>
struct KinematicsT
{
    std::vector<SE3T<S>> liMi;  // parent body -> body
    std::vector<SE3T<S>> oMi;   // world -> body
    std::vector<Vec6T<S>> v;    // body velocity
    std::vector<Vec6T<S>> a;    // body acceleration (gravity not included)

    void resize(std::size_t n)
    {
        liMi.resize(n);
        oMi.resize(n);
        v.assign(n, Vec6T<S>::Zero());
        a.assign(n, Vec6T<S>::Zero());
    }
};

using Kinematics = KinematicsT<double>;

/// Joint-generalized configuration with a base pose kept as a matrix, so the
/// same recursions run on perturbed (dual) inputs.
template <typename S>
struct ConfigT
{
    SE3T<S> base;
    VecXT<S> q;  // full nq vector; base slots are ignored
};

inline ConfigT<double> config_of(const VecX& q)
{
    ConfigT<double> c;
    c.base.R = Eigen::Quaterniond(q[3], q[4], q[5], q[6]).normalized().toRotationMatrix();
    c.base.p = q.head<3>();
    c.q = q;
    return c;
}

/// Motion subspace column of joint j (revolute) as a 6-vector.
inline Vec6 revolute_subspace(const JointSpec& j)
{
    Vec6 s = Vec6::Zero();
    s.tail<3>() = j.axis;
    return s;
}

/// Placements, velocities and (gravity-free) accelerations of all bodies.
/// `v`/`a` may be empty to skip the corresponding level.
template <typename S>
void forward_pass(const RobotModel& m, const ConfigT<S>& c, const VecXT<S>& v, const VecXT<S>& a, KinematicsT<S>& k)
{
    const std::size_t n = m.joints.size();
    if (k.oMi.size() != n) k.resize(n);
    const bool with_v = v.size() > 0, with_a = a.size() > 0;
    for (std::size_t j = 0; j < n; ++j)
    {
        const JointSpec& js = m.joints[j];
        if (js.type == JointType::Free)
        {
            k.liMi[j] = c.base;
            k.oMi[j] = c.base;
            if (with_v) k.v[j] = v.template segment<6>(js.v_index);
            if (with_a) k.a[j] = a.template segment<6>(js.v_index);
            continue;
        }
        SE3T<S> jointM;
        jointM.R = axis_angle<S>(js.axis, c.q[js.q_index]);
        k.liMi[j] = js.placement.template cast<S>() * jointM;
        const int p = js.parent_joint;
        k.oMi[j] = k.oMi[p] * k.liMi[j];
        if (!with_v) continue;
        Vec6T<S> sdot = Vec6T<S>::Zero();
        sdot.template tail<3>() = js.axis.template cast<S>() * v[js.v_index];
        k.v[j] = k.liMi[j].act_inv_motion(k.v[p]) + sdot;
        if (!with_a) continue;
        Vec6T<S> sdd = Vec6T<S>::Zero();
        sdd.template tail<3>() = js.axis.template cast<S>() * a[js.v_index];
        k.a[j] = k.liMi[j].act_inv_motion(k.a[p]) + sdd + motion_cross_motion<S>(k.v[j], sdot);
    }
}

inline Kinematics forward_kinematics_data(const RobotModel& m, const VecX& q, const VecX& v = VecX(), const VecX& a = VecX())
{
    Kinematics k;
    forward_pass<double>(m, config_of(q), v, a, k);
    return k;
}

template <typename S>
SE3T<S> frame_placement(const RobotModel& m, const KinematicsT<S>& k, int frame)
{
    const FrameSpec& f = m.frames[frame];
    return k.oMi[m.body_joint[f.body]] * f.placement.template cast<S>();
}

/// Spatial velocity of a frame, expressed in the frame.
template <typename S>
Vec6T<S> frame_velocity(const RobotModel& m, const KinematicsT<S>& k, int frame)
{
    const FrameSpec& f = m.frames[frame];
    return f.placement.template cast<S>().act_inv_motion(k.v[m.body_joint[f.body]]);
}

/// Spatial acceleration of a frame, expressed in the frame (gravity excluded).
template <typename S>
Vec6T<S> frame_acceleration(const RobotModel& m, const KinematicsT<S>& k, int frame)
{
    const FrameSpec& f = m.frames[frame];
    return f.placement.template cast<S>().act_inv_motion(k.a[m.body_joint[f.body]]);
}

/// World placements of all named frames.
struct Placements
{
    std::vector<SE3> bodies;  // indexed by body
    std::vector<SE3> frames;  // indexed by frame
};

inline Placements forward_kinematics(const RobotModel& m, const VecX& q)
{
    const Kinematics k = forward_kinematics_data(m, q);
    Placements out;
    out.bodies.resize(m.bodies.size());
    for (std::size_t b = 0; b < m.bodies.size(); ++b) out.bodies[b] = k.oMi[m.body_joint[b]];
    out.frames.reserve(m.frames.size());
    for (std::size_t f = 0; f < m.frames.size(); ++f) out.frames.push_back(frame_placement<double>(m, k, static_cast<int>(f)));
    return out;
}

/// Joint motion subspace columns expressed in the world frame at the world
/// origin (6 x nv). Column blocks of non-ancestors are selected per body.
inline MatX world_subspaces(const RobotModel& m, const Kinematics& k)
{
    MatX Sw(6, m.nv);
    for (std::size_t j = 0; j < m.joints.size(); ++j)
    {
        const JointSpec& js = m.joints[j];
        if (js.type == JointType::Free)
        {
            for (int i = 0; i < 6; ++i) Sw.col(js.v_index + i) = k.oMi[j].act_motion(Vec6::Unit(i));
        }
        else
        {
            Sw.col(js.v_index) = k.oMi[j].act_motion(revolute_subspace(js));
        }
    }
    return Sw;
}

/// Jacobian (6 x nv) of a point rigidly attached to body `joint` at world position `point`,
/// world aligned, given precomputed world subspaces.
inline MatX body_point_jacobian(const RobotModel& m, const MatX& Sw, int joint, const Vec3& point)
{
    MatX J = MatX::Zero(6, m.nv);
    for (int j = joint; j >= 0; j = m.joints[j].parent_joint)
    {
        const JointSpec& js = m.joints[j];
        for (int i = 0; i < js.nv(); ++i)
        {
            const Vec6 s = Sw.col(js.v_index + i);
            J.col(js.v_index + i).head<3>() = s.head<3>() + s.tail<3>().cross(point);
            J.col(js.v_index + i).tail<3>() = s.tail<3>();
        }
    }
    return J;
}

inline MatX frame_jacobian(const RobotModel& m, const Kinematics& k, const MatX& Sw, int frame, ReferenceFrame ref)
{
    const SE3 oMf = frame_placement<double>(m, k, frame);
    MatX J = body_point_jacobian(m, Sw, m.body_joint[m.frames[frame].body], oMf.p);
    if (ref == ReferenceFrame::Local)
    {
        J.topRows<3>() = oMf.R.transpose() * J.topRows<3>();
        J.bottomRows<3>() = oMf.R.transpose() * J.bottomRows<3>();
    }
    return J;
}

/// Frame Jacobian: J v is the spatial velocity (linear at the frame origin, angular).
inline MatX frame_jacobian(const RobotModel& m, const VecX& q, int frame, ReferenceFrame ref = ReferenceFrame::LocalWorldAligned)
{
    if (frame < 0 || frame >= static_cast<int>(m.frames.size())) throw std::out_of_range("frame_jacobian: unknown frame");
    const Kinematics k = forward_kinematics_data(m, q);
    return frame_jacobian(m, k, world_subspaces(m, k), frame, ref);
}

inline MatX frame_jacobian(const RobotModel& m, const VecX& q, const std::string& frame,
                           ReferenceFrame ref = ReferenceFrame::LocalWorldAligned)
{
    return frame_jacobian(m, q, m.frame_id(frame), ref);
}

inline Vec3 center_of_mass(const RobotModel& m, const Kinematics& k)
{
    Vec3 c = Vec3::Zero();
    double mt = 0.0;
    for (std::size_t b = 0; b < m.bodies.size(); ++b)
    {
        c += m.bodies[b].mass * k.oMi[m.body_joint[b]].act_point(m.bodies[b].com);
        mt += m.bodies[b].mass;
    }
    return c / mt;
}

inline Vec3 center_of_mass(const RobotModel& m, const VecX& q) { return center_of_mass(m, forward_kinematics_data(m, q)); }

/// CoM Jacobian (3 x nv).
inline MatX center_of_mass_jacobian(const RobotModel& m, const Kinematics& k, const MatX& Sw)
{
    MatX J = MatX::Zero(3, m.nv);
    double mt = 0.0;
    for (std::size_t b = 0; b < m.bodies.size(); ++b)
    {
        const auto& body = m.bodies[b];
        if (body.mass == 0.0) continue;
        const int j = m.body_joint[b];
        J += body.mass * body_point_jacobian(m, Sw, j, k.oMi[j].act_point(body.com)).topRows<3>();
        mt += body.mass;
    }
    return J / mt;
}

}  // namespace hddp
