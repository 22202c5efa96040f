#pragma once

// Joint-space dynamics on the kinematic tree:
//   M(q) vdot + h(q, v) = S tau + sum_i J_i^T lambda_i
// with rigid 6D contacts (J_i local frame Jacobians, lambda_i contact-frame
// wrenches) solved through the KKT system, impulse dynamics at contact
// switches, and exact derivatives of both via the implicit-function theorem.

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "hddp/kinematics.hpp"

namespace hddp
{

/// One rigid 6D contact: a model frame held at a reference placement.
struct Contact
{
    int frame = -1;
    SE3 reference;
};

using ContactSet = std::vector<Contact>;

inline void validate_contacts(const RobotModel& m, const ContactSet& c)
{
    for (std::size_t i = 0; i < c.size(); ++i)
    {
        if (c[i].frame < 0 || c[i].frame >= static_cast<int>(m.frames.size()))
            throw std::invalid_argument("contact set references an unknown frame");
        for (std::size_t k = i + 1; k < c.size(); ++k)
            if (c[i].frame == c[k].frame) throw std::invalid_argument("duplicate contact frame " + m.frames[c[i].frame].name);
    }
}

/// Baumgarte gains: J vdot + Jdot v = -2 alpha J v - beta phi. Zero by default.
struct ContactOptions
{
    double alpha = 0.0;
    double beta = 0.0;
};

/// Recursive Newton-Euler with external contact-frame wrenches (gravity 9.81 along -z).
/// Returns M a + h - sum J_i^T w_i.
template <typename S>
VecXT<S> rnea(const RobotModel& m, const ConfigT<S>& c, const VecXT<S>& v, const VecXT<S>& a, bool gravity,
              const ContactSet& contacts, const std::vector<Vec6T<S>>& wrenches, KinematicsT<S>& k)
{
    forward_pass<S>(m, c, v, a, k);
    const std::size_t n = m.joints.size();
    std::vector<Vec6T<S>> f(n);
    Vec6T<S> ag = Vec6T<S>::Zero();
    ag[2] = S(kGravity);
    for (std::size_t j = 0; j < n; ++j)
    {
        const Inertia I = m.bodies[m.joints[j].child_body].spatial();
        Vec6T<S> acc = k.a[j];
        if (gravity) acc += k.oMi[j].act_inv_motion(ag);
        f[j] = I.apply<S>(acc) + motion_cross_force<S>(k.v[j], I.apply<S>(k.v[j]));
    }
    for (std::size_t i = 0; i < contacts.size(); ++i)
    {
        const FrameSpec& fr = m.frames[contacts[i].frame];
        f[m.body_joint[fr.body]] -= fr.placement.template cast<S>().act_force(wrenches[i]);
    }
    VecXT<S> tau(m.nv);
    for (std::size_t jj = n; jj-- > 0;)
    {
        const JointSpec& js = m.joints[jj];
        if (js.type == JointType::Free)
            tau.template segment<6>(js.v_index) = f[jj];
        else
            tau[js.v_index] = js.axis.template cast<S>().dot(f[jj].template tail<3>());
        if (js.parent_joint >= 0) f[js.parent_joint] += k.liMi[jj].act_force(f[jj]);
    }
    return tau;
}

/// Inverse dynamics M(q) a + h(q, v).
inline VecX inverse_dynamics(const RobotModel& m, const VecX& q, const VecX& v, const VecX& a)
{
    Kinematics k;
    return rnea<double>(m, config_of(q), v, a, true, {}, {}, k);
}

/// Nonlinear effects h(q, v): Coriolis, centrifugal and gravity.
inline VecX bias_forces(const RobotModel& m, const VecX& q, const VecX& v)
{
    return inverse_dynamics(m, q, v, VecX::Zero(m.nv));
}

inline VecX gravity_forces(const RobotModel& m, const VecX& q) { return bias_forces(m, q, VecX::Zero(m.nv)); }

/// Joint-space inertia matrix by the composite-rigid-body recursion.
inline MatX mass_matrix(const RobotModel& m, const Kinematics& k)
{
    const std::size_t n = m.joints.size();
    std::vector<Mat6> Ic(n);
    for (std::size_t j = 0; j < n; ++j) Ic[j] = m.bodies[m.joints[j].child_body].spatial().matrix();
    for (std::size_t j = n; j-- > 0;)
        if (m.joints[j].parent_joint >= 0) Ic[m.joints[j].parent_joint] += Inertia::transform(k.liMi[j], Ic[j]);

    MatX M = MatX::Zero(m.nv, m.nv);
    for (std::size_t j = 0; j < n; ++j)
    {
        const JointSpec& js = m.joints[j];
        const int nj = js.nv();
        Eigen::Matrix<double, 6, Eigen::Dynamic> F(6, nj);
        Eigen::Matrix<double, 6, Eigen::Dynamic> Sj(6, nj);
        if (js.type == JointType::Free)
            Sj = Mat6::Identity();
        else
            Sj = revolute_subspace(js);
        F = Ic[j] * Sj;
        M.block(js.v_index, js.v_index, nj, nj) = Sj.transpose() * F;
        int c = static_cast<int>(j);
        while (m.joints[c].parent_joint >= 0)
        {
            for (int col = 0; col < nj; ++col) F.col(col) = k.liMi[c].act_force(Vec6(F.col(col)));
            c = m.joints[c].parent_joint;
            const JointSpec& pc = m.joints[c];
            MatX block;
            if (pc.type == JointType::Free)
                block = F;
            else
                block = revolute_subspace(pc).transpose() * F;
            M.block(pc.v_index, js.v_index, pc.nv(), nj) = block;
            M.block(js.v_index, pc.v_index, nj, pc.nv()) = block.transpose();
        }
    }
    return M;
}

inline MatX mass_matrix(const RobotModel& m, const VecX& q) { return mass_matrix(m, forward_kinematics_data(m, q)); }

/// Result of the contact-constrained forward dynamics.
struct ContactDynamicsResult
{
    VecX vdot;
    std::vector<Vec6> wrenches;  // per active contact, contact frame
};

/// Factorized quantities reused by the derivative computation.
struct ContactDynamicsData
{
    ContactDynamicsResult result;
    MatX M;
    Eigen::LLT<MatX> Mchol;
    MatX J;       // stacked local contact Jacobians (6k x nv)
    MatX MinvJt;  // M^-1 J^T
    Eigen::LLT<MatX> Gchol;  // J M^-1 J^T
    VecX gamma;   // drift Jdot v (+ stabilization)
};

namespace detail
{

inline void factor_contact_operator(const MatX& J, const MatX& MinvJt, Eigen::LLT<MatX>& Gchol)
{
    const MatX G = J * MinvJt;
    Gchol.compute(G);
    const double scale = G.diagonal().cwiseAbs().maxCoeff();
    bool deficient = Gchol.info() != Eigen::Success;
    if (!deficient)
    {
        const VecX d = MatX(Gchol.matrixL()).diagonal();
        deficient = d.minCoeff() * d.minCoeff() < 1e-12 * std::max(scale, 1e-300);
    }
    if (deficient)
    {
        const Eigen::SelfAdjointEigenSolver<MatX> es(G);
        const VecX ev = es.eigenvalues();
        int rank = 0;
        for (Eigen::Index i = 0; i < ev.size(); ++i)
            if (ev[i] > 1e-10 * std::max(scale, 1e-300)) ++rank;
        throw SingularityError(rank, static_cast<int>(G.rows()));
    }
}

/// Stacked constraint drift J vdot + Jdot v evaluated with vdot = 0, plus Baumgarte terms.
template <typename S>
VecXT<S> contact_drift(const RobotModel& m, const KinematicsT<S>& k, const ContactSet& contacts, const ContactOptions& opt)
{
    VecXT<S> g(6 * contacts.size());
    for (std::size_t i = 0; i < contacts.size(); ++i)
    {
        Vec6T<S> gi = frame_acceleration<S>(m, k, contacts[i].frame);
        if (opt.alpha != 0.0) gi += S(2.0 * opt.alpha) * frame_velocity<S>(m, k, contacts[i].frame);
        if (opt.beta != 0.0)
        {
            const SE3T<S> oMf = frame_placement<S>(m, k, contacts[i].frame);
            const SE3T<S> ref = contacts[i].reference.template cast<S>();
            Vec6T<S> phi;
            phi.template head<3>() = oMf.R.transpose() * (oMf.p - ref.p);
            const Mat3T<S> E = ref.R.transpose() * oMf.R;
            phi.template tail<3>() = Vec3T<S>(E(2, 1) - E(1, 2), E(0, 2) - E(2, 0), E(1, 0) - E(0, 1)) * S(0.5);
            gi += S(opt.beta) * phi;
        }
        g.template segment<6>(6 * i) = gi;
    }
    return g;
}

}  // namespace detail

/// Unconstrained forward dynamics M vdot = S tau - h.
inline VecX forward_dynamics(const RobotModel& m, const State& s, const VecX& tau)
{
    const Kinematics k = forward_kinematics_data(m, s.q);
    const MatX M = mass_matrix(m, k);
    const VecX rhs = m.selection() * tau - bias_forces(m, s.q, s.v);
    return M.llt().solve(rhs);
}

/// Contact-constrained forward dynamics through the KKT system
///   [M J^T; J 0] [vdot; -lambda] = [S tau - h; -Jdot v].
inline void contact_forward_dynamics(const RobotModel& m, const State& s, const ContactSet& contacts, const VecX& tau,
                                     ContactDynamicsData& d, const ContactOptions& opt = {})
{
    if (tau.size() != m.nu) throw DimensionError("contact_forward_dynamics: tau has wrong dimension");
    const ConfigT<double> c = config_of(s.q);
    Kinematics k;
    const VecX zero = VecX::Zero(m.nv);
    const VecX h = rnea<double>(m, c, s.v, zero, true, {}, {}, k);
    d.M = mass_matrix(m, k);
    d.Mchol.compute(d.M);
    VecX rhs = -h;
    for (const auto& j : m.joints)
        if (j.u_index >= 0) rhs[j.v_index] += tau[j.u_index];
    const VecX afree = d.Mchol.solve(rhs);
    d.result.wrenches.clear();
    if (contacts.empty())
    {
        d.result.vdot = afree;
        d.J.resize(0, m.nv);
        return;
    }
    const MatX Sw = world_subspaces(m, k);
    d.J.resize(6 * contacts.size(), m.nv);
    for (std::size_t i = 0; i < contacts.size(); ++i)
        d.J.middleRows<6>(6 * i) = frame_jacobian(m, k, Sw, contacts[i].frame, ReferenceFrame::Local);
    d.gamma = detail::contact_drift<double>(m, k, contacts, opt);
    d.MinvJt = d.Mchol.solve(d.J.transpose());
    detail::factor_contact_operator(d.J, d.MinvJt, d.Gchol);
    const VecX lambda = d.Gchol.solve(-d.gamma - d.J * afree);
    d.result.vdot = afree + d.MinvJt * lambda;
    for (std::size_t i = 0; i < contacts.size(); ++i) d.result.wrenches.push_back(lambda.segment<6>(6 * i));
}

inline ContactDynamicsResult contact_forward_dynamics(const RobotModel& m, const State& s, const ContactSet& contacts,
                                                      const VecX& tau, const ContactOptions& opt = {})
{
    ContactDynamicsData d;
    contact_forward_dynamics(m, s, contacts, tau, d, opt);
    return d.result;
}

namespace detail
{

/// Dual-number configuration perturbed along tangent direction i (< nv).
inline ConfigT<Dual> perturbed_config(const RobotModel& m, const ConfigT<double>& c, int i)
{
    ConfigT<Dual> out;
    out.base = c.base.cast<Dual>();
    out.q = c.q.cast<Dual>();
    if (i < 3)
    {
        for (int r = 0; r < 3; ++r) out.base.p[r].d = c.base.R(r, i);
    }
    else if (i < 6)
    {
        const Mat3 dR = c.base.R * skew<double>(Vec3::Unit(i - 3));
        for (int r = 0; r < 3; ++r)
            for (int s = 0; s < 3; ++s) out.base.R(r, s).d = dR(r, s);
    }
    else
    {
        for (const auto& j : m.joints)
            if (j.type == JointType::Revolute && j.v_index == i) out.q[j.q_index].d = 1.0;
    }
    return out;
}

inline VecX derivs(const VecXT<Dual>& x)
{
    VecX d(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) d[i] = x[i].d;
    return d;
}

}  // namespace detail

/// Partial derivatives of the contact dynamics with respect to the state
/// tangent (2 nv) and the control (nu).
struct ContactDynamicsDerivatives
{
    MatX da_dx, da_du;          // nv x 2nv, nv x nu
    MatX dlambda_dx, dlambda_du;  // 6k x 2nv, 6k x nu
};

/// Implicit-function derivatives of the KKT solution. Partials of the
/// inverse dynamics and the constraint drift are evaluated exactly with
/// forward-mode dual numbers (one pass per tangent direction).
inline ContactDynamicsDerivatives contact_dynamics_derivatives(const RobotModel& m, const State& s, const ContactSet& contacts,
                                                                const ContactDynamicsData& d, const ContactOptions& opt = {})
{
    const int nv = m.nv, nc = static_cast<int>(6 * contacts.size());
    const ConfigT<double> c = config_of(s.q);
    const VecXT<Dual> a = d.result.vdot.cast<Dual>();
    std::vector<Vec6T<Dual>> w;
    for (const auto& wr : d.result.wrenches) w.push_back(wr.cast<Dual>());

    MatX dg1(nv, 2 * nv), dg2(nc, 2 * nv);
    KinematicsT<Dual> k;
    const ConfigT<Dual> c0{c.base.cast<Dual>(), c.q.cast<Dual>()};
    for (int i = 0; i < 2 * nv; ++i)
    {
        VecXT<Dual> v = s.v.cast<Dual>();
        ConfigT<Dual> ci;
        if (i < nv)
            ci = detail::perturbed_config(m, c, i);
        else
        {
            ci = c0;
            v[i - nv].d = 1.0;
        }
        dg1.col(i) = detail::derivs(rnea<Dual>(m, ci, v, a, true, contacts, w, k));
        if (nc > 0) dg2.col(i) = detail::derivs(detail::contact_drift<Dual>(m, k, contacts, opt));
    }

    ContactDynamicsDerivatives out;
    const MatX S = m.selection();
    if (nc == 0)
    {
        out.da_dx = -d.Mchol.solve(dg1);
        out.da_du = d.Mchol.solve(S);
        out.dlambda_dx.resize(0, 2 * nv);
        out.dlambda_du.resize(0, m.nu);
        return out;
    }
    // contact_drift above already includes J vdot through the body accelerations.
    const MatX MinvDg1 = d.Mchol.solve(dg1);
    out.dlambda_dx = d.Gchol.solve(-dg2 + d.J * MinvDg1);
    out.da_dx = -MinvDg1 + d.MinvJt * out.dlambda_dx;
    const MatX MinvS = d.Mchol.solve(S);
    out.dlambda_du = -d.Gchol.solve(d.J * MinvS);
    out.da_du = MinvS + d.MinvJt * out.dlambda_du;
    return out;
}

/// Impact with zero restitution: M (v+ - v-) = J^T Lambda, J v+ = 0.
struct ImpulseResult
{
    VecX v_plus;
    std::vector<Vec6> impulses;
};

struct ImpulseData
{
    ImpulseResult result;
    MatX M;
    Eigen::LLT<MatX> Mchol;
    MatX J, MinvJt;
    Eigen::LLT<MatX> Gchol;
};

inline void impulse_dynamics(const RobotModel& m, const State& s, const ContactSet& contacts, ImpulseData& d)
{
    const Kinematics k = forward_kinematics_data(m, s.q);
    d.M = mass_matrix(m, k);
    d.Mchol.compute(d.M);
    d.result.impulses.clear();
    if (contacts.empty())
    {
        d.result.v_plus = s.v;
        d.J.resize(0, m.nv);
        return;
    }
    const MatX Sw = world_subspaces(m, k);
    d.J.resize(6 * contacts.size(), m.nv);
    for (std::size_t i = 0; i < contacts.size(); ++i)
        d.J.middleRows<6>(6 * i) = frame_jacobian(m, k, Sw, contacts[i].frame, ReferenceFrame::Local);
    d.MinvJt = d.Mchol.solve(d.J.transpose());
    detail::factor_contact_operator(d.J, d.MinvJt, d.Gchol);
    const VecX Lambda = d.Gchol.solve(-(d.J * s.v));
    d.result.v_plus = s.v + d.MinvJt * Lambda;
    for (std::size_t i = 0; i < contacts.size(); ++i) d.result.impulses.push_back(Lambda.segment<6>(6 * i));
}

inline ImpulseResult impulse_dynamics(const RobotModel& m, const State& s, const ContactSet& contacts)
{
    ImpulseData d;
    impulse_dynamics(m, s, contacts, d);
    return d.result;
}

struct ImpulseDerivatives
{
    MatX dvplus_dx;    // nv x 2nv
    MatX dimpulse_dx;  // 6k x 2nv
};

inline ImpulseDerivatives impulse_dynamics_derivatives(const RobotModel& m, const State& s, const ContactSet& contacts,
                                                      const ImpulseData& d)
{
    const int nv = m.nv, nc = static_cast<int>(6 * contacts.size());
    ImpulseDerivatives out;
    if (nc == 0)
    {
        out.dvplus_dx = MatX::Zero(nv, 2 * nv);
        out.dvplus_dx.rightCols(nv).setIdentity();
        out.dimpulse_dx.resize(0, 2 * nv);
        return out;
    }
    const ConfigT<double> c = config_of(s.q);
    const VecXT<Dual> dv = (d.result.v_plus - s.v).cast<Dual>();
    const VecXT<Dual> vp = d.result.v_plus.cast<Dual>();
    const VecXT<Dual> zero = VecXT<Dual>::Zero(nv);
    std::vector<Vec6T<Dual>> w;
    for (const auto& l : d.result.impulses) w.push_back(l.cast<Dual>());
    MatX dg1 = MatX::Zero(nv, 2 * nv), dg2 = MatX::Zero(nc, 2 * nv);
    KinematicsT<Dual> k;
    for (int i = 0; i < nv; ++i)
    {
        const ConfigT<Dual> ci = detail::perturbed_config(m, c, i);
        dg1.col(i) = detail::derivs(rnea<Dual>(m, ci, zero, dv, false, contacts, w, k));
        forward_pass<Dual>(m, ci, vp, VecXT<Dual>(), k);
        for (std::size_t ic = 0; ic < contacts.size(); ++ic)
            for (int r = 0; r < 6; ++r) dg2(6 * ic + r, i) = frame_velocity<Dual>(m, k, contacts[ic].frame)[r].d;
    }
    MatX rhs1 = -dg1;
    rhs1.rightCols(nv) = d.M;
    const MatX MinvRhs1 = d.Mchol.solve(rhs1);
    out.dimpulse_dx = d.Gchol.solve(-dg2 - d.J * MinvRhs1);
    out.dvplus_dx = MinvRhs1 + d.MinvJt * out.dimpulse_dx;
    return out;
}

/// Torques and contact wrenches holding configuration q at rest:
/// S tau + J^T lambda = g(q), minimizing |tau|^2 + reg |lambda|^2.
struct StaticEquilibrium
{
    VecX tau;
    std::vector<Vec6> wrenches;
    bool feasible = false;  // false when the contacts cannot carry the base wrench
};

inline StaticEquilibrium static_equilibrium(const RobotModel& m, const VecX& q, const ContactSet& contacts, double reg = 1e-8)
{
    StaticEquilibrium out;
    const VecX g = gravity_forces(m, q);
    const int nc = static_cast<int>(6 * contacts.size());
    VecX gj(m.nu);
    for (const auto& j : m.joints)
        if (j.u_index >= 0) gj[j.u_index] = g[j.v_index];
    if (nc == 0)
    {
        out.tau = VecX::Zero(m.nu);
        return out;
    }
    const Kinematics k = forward_kinematics_data(m, q);
    const MatX Sw = world_subspaces(m, k);
    MatX J(nc, m.nv);
    for (std::size_t i = 0; i < contacts.size(); ++i)
        J.middleRows<6>(6 * i) = frame_jacobian(m, k, Sw, contacts[i].frame, ReferenceFrame::Local);
    const MatX Jb = J.leftCols<6>();
    MatX Jj(nc, m.nu);
    for (const auto& j : m.joints)
        if (j.u_index >= 0) Jj.col(j.u_index) = J.col(j.v_index);

    MatX K = MatX::Zero(nc + 6, nc + 6);
    K.topLeftCorner(nc, nc) = Jj * Jj.transpose() + reg * MatX::Identity(nc, nc);
    K.topRightCorner(nc, 6) = Jb;
    K.bottomLeftCorner(6, nc) = Jb.transpose();
    VecX rhs(nc + 6);
    rhs << Jj * gj, g.head<6>();
    const Eigen::FullPivLU<MatX> lu(K);
    if (Eigen::FullPivLU<MatX>(Jb).rank() < 6)
    {
        out.tau = VecX::Zero(m.nu);
        return out;
    }
    const VecX sol = lu.solve(rhs);
    const VecX lambda = sol.head(nc);
    out.tau = gj - Jj.transpose() * lambda;
    for (std::size_t i = 0; i < contacts.size(); ++i) out.wrenches.push_back(lambda.segment<6>(6 * i));
    out.feasible = true;
    return out;
}

inline double kinetic_energy(const RobotModel& m, const State& s) { return 0.5 * s.v.dot(mass_matrix(m, s.q) * s.v); }

}  // namespace hddp
