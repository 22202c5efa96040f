#pragma once

// Floating-base state on SE(3) x R^n and its tangent-space calculus.
//
// q = (base position, base quaternion w x y z, joint angles), dim nq
// v = (base linear velocity, base angular velocity, joint rates), dim nv
// Base velocities are expressed in the base frame. The base configuration
// is retracted as p' = p + R dp, R' = R exp(dtheta).

#include "hddp/model.hpp"

namespace hddp
{

struct State
{
    VecX q;
    VecX v;

    State() = default;
    State(VecX q_, VecX v_) : q(std::move(q_)), v(std::move(v_)) { normalize(); }

    void normalize()
    {
        if (q.size() >= 7)
        {
            const double n = q.segment<4>(3).norm();
            if (n > 0.0) q.segment<4>(3) /= n;
        }
    }

    Vec3 base_position() const { return q.head<3>(); }
    Eigen::Quaterniond base_quaternion() const { return {q[3], q[4], q[5], q[6]}; }
    Mat3 base_rotation() const { return base_quaternion().toRotationMatrix(); }
    SE3 base_pose() const { return {base_rotation(), base_position()}; }
    auto joints() const { return q.tail(q.size() - 7); }

    /// Stacked (q, v).
    VecX stacked() const
    {
        VecX x(q.size() + v.size());
        x << q, v;
        return x;
    }
};

inline State neutral_state(const RobotModel& m)
{
    VecX q = VecX::Zero(m.nq), v = VecX::Zero(m.nv);
    q[3] = 1.0;
    for (const auto& j : m.joints)
        if (j.type == JointType::Revolute) q[j.q_index] = 0.5 * (j.lower + j.upper);
    return {q, v};
}

/// q (+) dq for a configuration tangent dq (nv).
inline VecX integrate_configuration(const VecX& q, const VecX& dq)
{
    VecX out = q;
    const Eigen::Quaterniond quat(q[3], q[4], q[5], q[6]);
    const Mat3 R = quat.normalized().toRotationMatrix();
    out.head<3>() = q.head<3>() + R * dq.head<3>();
    Eigen::Quaterniond qn(R * so3_exp(dq.segment<3>(3)));
    qn.normalize();
    // keep a consistent hemisphere so that nearby states have nearby coordinates
    if (qn.coeffs().dot(quat.coeffs()) < 0.0) qn.coeffs() *= -1.0;
    out[3] = qn.w();
    out[4] = qn.x();
    out[5] = qn.y();
    out[6] = qn.z();
    out.tail(q.size() - 7) += dq.tail(dq.size() - 6);
    return out;
}

/// Tangent dq with q1 (+) dq = q2.
inline VecX difference_configuration(const VecX& q1, const VecX& q2)
{
    VecX dq(q2.size() - 1);
    const Mat3 R1 = Eigen::Quaterniond(q1[3], q1[4], q1[5], q1[6]).normalized().toRotationMatrix();
    const Mat3 R2 = Eigen::Quaterniond(q2[3], q2[4], q2[5], q2[6]).normalized().toRotationMatrix();
    dq.head<3>() = R1.transpose() * (q2.head<3>() - q1.head<3>());
    dq.segment<3>(3) = so3_log(R1.transpose() * R2);
    dq.tail(dq.size() - 6) = q2.tail(q2.size() - 7) - q1.tail(q1.size() - 7);
    return dq;
}

/// State (+) dx, dx = (dq, dv) of dimension 2 nv.
inline State integrate(const State& s, const VecX& dx)
{
    const Eigen::Index nv = s.v.size();
    return {integrate_configuration(s.q, dx.head(nv)), s.v + dx.tail(nv)};
}

/// Tangent from s1 to s2 (dimension 2 nv): (q2 (-) q1, v2 - v1).
inline VecX state_difference(const State& s1, const State& s2)
{
    const Eigen::Index nv = s1.v.size();
    VecX d(2 * nv);
    d.head(nv) = difference_configuration(s1.q, s2.q);
    d.tail(nv) = s2.v - s1.v;
    return d;
}

/// Jacobians of q' = q (+) w with respect to q (tangent) and w.
struct IntegrateJacobians
{
    MatX dq;
    MatX dw;
};

inline IntegrateJacobians integrate_jacobians(const VecX& w)
{
    const Eigen::Index nv = w.size();
    IntegrateJacobians J{MatX::Identity(nv, nv), MatX::Identity(nv, nv)};
    const Vec3 wp = w.head<3>(), wr = w.segment<3>(3);
    const Mat3 Et = so3_exp(wr).transpose();
    J.dq.topLeftCorner<3, 3>() = Et;
    J.dq.block<3, 3>(0, 3) = -Et * skew<double>(wp);
    J.dq.block<3, 3>(3, 3) = Et;
    J.dw.topLeftCorner<3, 3>() = Et;
    J.dw.block<3, 3>(3, 3) = so3_right_jacobian(wr);
    return J;
}

/// Jacobian of state_difference(s_ref, s) with respect to the tangent of s.
inline MatX difference_jacobian_second(const State& s_ref, const State& s)
{
    const Eigen::Index nv = s.v.size();
    MatX J = MatX::Identity(2 * nv, 2 * nv);
    const Mat3 Rr = s_ref.base_rotation(), R = s.base_rotation();
    J.topLeftCorner<3, 3>() = Rr.transpose() * R;
    J.block<3, 3>(3, 3) = so3_right_jacobian_inv(so3_log(Rr.transpose() * R));
    return J;
}

/// Semi-implicit Euler step: v' = v + a dt, q' = q (+) v' dt.
inline State integrate_state(const State& s, const VecX& vdot, double dt)
{
    if (!(dt > 0.0)) throw std::invalid_argument("integrate_state: dt must be > 0");
    const VecX v1 = s.v + vdot * dt;
    return {integrate_configuration(s.q, v1 * dt), v1};
}

}  // namespace hddp
