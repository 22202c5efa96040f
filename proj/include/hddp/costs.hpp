#pragma once

// Cost terms: weighted residual costs in Gauss-Newton form.
//
//   equality tasks   Phi = sum_i w_i r_i^2
//   inequality terms Phi = 1/2 sum_i max(0, lo_i - r_i, r_i - hi_i)^2
//
// Residuals depend on the state (through kinematics) and on the control
// (through the contact wrenches of the node's contact dynamics).

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hddp/dynamics.hpp"

namespace hddp
{

enum class CostKind
{
    ComTracking,
    FramePlacement,
    PostureReg,
    ControlReg,
    JointLimitBarrier,
    FrictionConeBarrier,
    CopBarrier
};

inline const char* to_string(CostKind k)
{
    switch (k)
    {
        case CostKind::ComTracking: return "com_tracking";
        case CostKind::FramePlacement: return "frame_placement";
        case CostKind::PostureReg: return "posture_reg";
        case CostKind::ControlReg: return "control_reg";
        case CostKind::JointLimitBarrier: return "joint_limit_barrier";
        case CostKind::FrictionConeBarrier: return "friction_cone_barrier";
        case CostKind::CopBarrier: return "cop_barrier";
    }
    return "?";
}

struct WrenchConeSpec
{
    double mu = 0.7;
    double half_x = 0.10;
    double half_y = 0.04;
    double coverage = 0.5;

    void validate() const
    {
        if (!(mu > 0.0)) throw std::invalid_argument("wrench cone: mu must be > 0");
        if (!(half_x > 0.0) || !(half_y > 0.0)) throw std::invalid_argument("wrench cone: foot half-dimensions must be > 0");
        if (!(coverage > 0.0 && coverage <= 1.0)) throw std::invalid_argument("wrench cone: coverage must lie in (0, 1]");
    }
};

/// Value, gradient and Hessian of an activation with respect to its residual
/// (the Hessian is diagonal for every activation used here).
struct ActivationEval
{
    double value = 0.0;
    VecX gradient;
    VecX hessian_diag;
};

/// Value and Gauss-Newton derivatives over (state tangent, control).
struct CostEvaluation
{
    double value = 0.0;
    VecX Lx, Lu;
    MatX Lxx, Lxu, Luu;

    CostEvaluation() = default;
    CostEvaluation(int ndx, int nu)
        : Lx(VecX::Zero(ndx)), Lu(VecX::Zero(nu)), Lxx(MatX::Zero(ndx, ndx)), Lxu(MatX::Zero(ndx, nu)), Luu(MatX::Zero(nu, nu))
    {
    }

    CostEvaluation& operator+=(const CostEvaluation& o)
    {
        value += o.value;
        Lx += o.Lx;
        Lu += o.Lu;
        Lxx += o.Lxx;
        Lxu += o.Lxu;
        Luu += o.Luu;
        return *this;
    }
    CostEvaluation& operator*=(double s)
    {
        value *= s;
        Lx *= s;
        Lu *= s;
        Lxx *= s;
        Lxu *= s;
        Luu *= s;
        return *this;
    }
};

/// ||actual - reference||^2 with derivatives with respect to `actual`.
inline ActivationEval quadratic_residual_cost(const VecX& actual, const VecX& reference)
{
    if (actual.size() != reference.size()) throw DimensionError("quadratic_residual_cost: feature dimensions differ");
    const VecX r = actual - reference;
    return {r.squaredNorm(), 2.0 * r, VecX::Constant(r.size(), 2.0)};
}

/// Placement feature compared through (world position difference, rotation log).
inline ActivationEval quadratic_residual_cost(const SE3& actual, const SE3& reference)
{
    Vec6 r;
    r.head<3>() = actual.p - reference.p;
    r.tail<3>() = so3_log(reference.R.transpose() * actual.R);
    return quadratic_residual_cost(VecX(r), VecX(VecX::Zero(6)));
}

/// Zero inside [lower, upper], half the squared violation outside.
inline ActivationEval bounded_quadratic(const VecX& r, const VecX& lower, const VecX& upper)
{
    if (r.size() != lower.size() || r.size() != upper.size()) throw DimensionError("bounded_quadratic: dimension mismatch");
    ActivationEval a{0.0, VecX::Zero(r.size()), VecX::Zero(r.size())};
    for (Eigen::Index i = 0; i < r.size(); ++i)
    {
        if (lower[i] > upper[i]) throw std::invalid_argument("bounded_quadratic: lower bound exceeds upper bound");
        double viol = 0.0;
        if (r[i] < lower[i])
            viol = r[i] - lower[i];
        else if (r[i] > upper[i])
            viol = r[i] - upper[i];
        else
            continue;
        a.value += 0.5 * viol * viol;
        a.gradient[i] = viol;
        a.hessian_diag[i] = 1.0;
    }
    return a;
}

inline ActivationEval bounded_quadratic(double r, double lower, double upper)
{
    return bounded_quadratic(VecX::Constant(1, r), VecX::Constant(1, lower), VecX::Constant(1, upper));
}

/// Residual (fz, mu fz - |fx|, mu fz - |fy|); every component must stay >= 0.
inline Vec3 friction_cone_residual(const Vec6& w, const WrenchConeSpec& spec)
{
    return {w[2], spec.mu * w[2] - std::abs(w[0]), spec.mu * w[2] - std::abs(w[1])};
}

inline Eigen::Matrix<double, 3, 6> friction_cone_jacobian(const Vec6& w, const WrenchConeSpec& spec)
{
    Eigen::Matrix<double, 3, 6> J = Eigen::Matrix<double, 3, 6>::Zero();
    const auto sgn = [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); };
    J(0, 2) = 1.0;
    J(1, 0) = -sgn(w[0]);
    J(1, 2) = spec.mu;
    J(2, 1) = -sgn(w[1]);
    J(2, 2) = spec.mu;
    return J;
}

/// Linearized cone as five one-sided faces, all >= 0 inside:
///   (f_z, mu f_z - f_x, mu f_z + f_x, mu f_z - f_y, mu f_z + f_y).
/// Same set as friction_cone_residual, without the kink of |f| at zero load.
inline Eigen::Matrix<double, 5, 6> friction_cone_faces(const WrenchConeSpec& spec)
{
    Eigen::Matrix<double, 5, 6> A = Eigen::Matrix<double, 5, 6>::Zero();
    A(0, 2) = 1.0;
    A(1, 0) = -1.0, A(2, 0) = 1.0, A(3, 1) = -1.0, A(4, 1) = 1.0;
    A.block<4, 1>(1, 2).setConstant(spec.mu);
    return A;
}

inline constexpr double kCopMinNormalForce = 1.0;  // N

/// Centre of pressure in the contact frame, (-tau_y / f_z, tau_x / f_z).
inline Eigen::Vector2d cop_from_wrench(const Vec6& w)
{
    if (!(w[2] > kCopMinNormalForce))
        throw UndefinedCopError("centre of pressure undefined: normal force " + std::to_string(w[2]) + " N");
    return {-w[4] / w[2], w[3] / w[2]};
}

inline Eigen::Matrix<double, 2, 6> cop_jacobian(const Vec6& w)
{
    Eigen::Matrix<double, 2, 6> J = Eigen::Matrix<double, 2, 6>::Zero();
    const double fz = w[2];
    J(0, 4) = -1.0 / fz;
    J(0, 2) = w[4] / (fz * fz);
    J(1, 3) = 1.0 / fz;
    J(1, 2) = -w[3] / (fz * fz);
    return J;
}

inline Eigen::Vector2d cop_bound(const WrenchConeSpec& spec) { return {spec.coverage * spec.half_x, spec.coverage * spec.half_y}; }

/// Bounded quadratic of the CoP against +-coverage * half dimensions.
inline ActivationEval cop_barrier(const Vec6& w, const WrenchConeSpec& spec)
{
    const Eigen::Vector2d c = cop_from_wrench(w);
    const Eigen::Vector2d b = cop_bound(spec);
    return bounded_quadratic(VecX(c), VecX(-b), VecX(b));
}

/// CoP bound in moment form, -b f_z <= c f_z <= b f_z with c f_z = (-tau_y, tau_x),
/// as four one-sided residuals scaled by a reference load:
///   r = (c_x f_z - b_x f_z, -c_x f_z - b_x f_z, c_y f_z - b_y f_z, -c_y f_z - b_y f_z) / f_ref <= 0.
/// Each is linear in the wrench. At f_z = f_ref the active one equals the CoP
/// excursion in metres; unlike the CoP itself it stays defined as the foot unloads.
inline Eigen::Matrix<double, 4, 6> cop_moment_jacobian(const WrenchConeSpec& spec, double f_ref)
{
    const Eigen::Vector2d b = cop_bound(spec);
    Eigen::Matrix<double, 4, 6> J = Eigen::Matrix<double, 4, 6>::Zero();
    J(0, 4) = -1.0, J(1, 4) = 1.0, J(2, 3) = 1.0, J(3, 3) = -1.0;
    J(0, 2) = J(1, 2) = -b.x();
    J(2, 2) = J(3, 2) = -b.y();
    return J / f_ref;
}

inline Eigen::Vector4d cop_moment_residual(const Vec6& w, const WrenchConeSpec& spec, double f_ref)
{
    return cop_moment_jacobian(spec, f_ref) * w;
}

/// One weighted term of a node cost. Construct with the factory functions.
struct CostTerm
{
    CostKind kind = CostKind::PostureReg;
    double weight = 1.0;

    Vec3 com_ref = Vec3::Zero();
    std::string frame;  // FramePlacement, FrictionConeBarrier, CopBarrier
    int frame_id = -1;
    SE3 placement_ref;
    State state_ref;
    VecX state_weights;  // PostureReg, per tangent component
    VecX control_ref;    // ControlReg
    VecX lower, upper;   // JointLimitBarrier over (joint positions, joint rates)
    WrenchConeSpec cone;

    bool uses_wrench() const { return kind == CostKind::FrictionConeBarrier || kind == CostKind::CopBarrier; }
    bool is_barrier() const
    {
        return kind == CostKind::JointLimitBarrier || kind == CostKind::FrictionConeBarrier || kind == CostKind::CopBarrier;
    }

    static CostTerm com(const Vec3& ref, double w)
    {
        CostTerm t;
        t.kind = CostKind::ComTracking;
        t.com_ref = ref;
        t.weight = w;
        return t;
    }
    static CostTerm frame_placement(const RobotModel& m, const std::string& frame, const SE3& ref, double w)
    {
        CostTerm t;
        t.kind = CostKind::FramePlacement;
        t.frame = frame;
        t.frame_id = m.frame_id(frame);
        t.placement_ref = ref;
        t.weight = w;
        return t;
    }
    static CostTerm posture(const State& ref, const VecX& weights, double w)
    {
        CostTerm t;
        t.kind = CostKind::PostureReg;
        t.state_ref = ref;
        t.state_weights = weights;
        t.weight = w;
        return t;
    }
    static CostTerm control(const VecX& ref, double w)
    {
        CostTerm t;
        t.kind = CostKind::ControlReg;
        t.control_ref = ref;
        t.weight = w;
        return t;
    }
    /// Bounds over (joint positions, joint rates), dimension 2 nu.
    static CostTerm joint_limits(const VecX& lower, const VecX& upper, double w)
    {
        if (lower.size() != upper.size()) throw DimensionError("joint limit barrier: bound dimensions differ");
        for (Eigen::Index i = 0; i < lower.size(); ++i)
            if (lower[i] > upper[i]) throw std::invalid_argument("joint limit barrier: lower bound exceeds upper bound");
        CostTerm t;
        t.kind = CostKind::JointLimitBarrier;
        t.lower = lower;
        t.upper = upper;
        t.weight = w;
        return t;
    }
    static CostTerm friction_cone(const RobotModel& m, const std::string& frame, const WrenchConeSpec& spec, double w)
    {
        spec.validate();
        CostTerm t;
        t.kind = CostKind::FrictionConeBarrier;
        t.frame = frame;
        t.frame_id = m.frame_id(frame);
        t.cone = spec;
        t.weight = w;
        return t;
    }
    static CostTerm cop(const RobotModel& m, const std::string& frame, const WrenchConeSpec& spec, double w)
    {
        spec.validate();
        CostTerm t;
        t.kind = CostKind::CopBarrier;
        t.frame = frame;
        t.frame_id = m.frame_id(frame);
        t.cone = spec;
        t.weight = w;
        return t;
    }
};

/// Everything a node cost needs at one (state, control) point.
struct NodeContext
{
    const RobotModel& model;
    const State& x;
    const VecX& u;
    const Kinematics& kin;  // placements of x.q
    const MatX& Sw;         // world subspaces of x.q
    const ContactSet* contacts = nullptr;
    const std::vector<Vec6>* wrenches = nullptr;
    const MatX* dlambda_dx = nullptr;  // 6k x 2nv
    const MatX* dlambda_du = nullptr;  // 6k x nu
};

namespace detail
{

inline int contact_slot(const NodeContext& c, int frame)
{
    if (c.contacts)
        for (std::size_t i = 0; i < c.contacts->size(); ++i)
            if ((*c.contacts)[i].frame == frame) return static_cast<int>(i);
    return -1;
}

/// Chain an activation through residual Jacobians (Gauss-Newton).
inline void accumulate(CostEvaluation& out, const ActivationEval& a, const MatX& Rx, const MatX* Ru, double w)
{
    out.value += w * a.value;
    const VecX hg = a.hessian_diag;
    out.Lx.noalias() += w * Rx.transpose() * a.gradient;
    out.Lxx.noalias() += w * Rx.transpose() * hg.asDiagonal() * Rx;
    if (Ru)
    {
        out.Lu.noalias() += w * Ru->transpose() * a.gradient;
        out.Luu.noalias() += w * Ru->transpose() * hg.asDiagonal() * (*Ru);
        out.Lxu.noalias() += w * Rx.transpose() * hg.asDiagonal() * (*Ru);
    }
}

}  // namespace detail

/// Evaluate one term (unweighted by the knot dt, weighted by its own weight).
inline CostEvaluation evaluate_term(const CostTerm& t, const NodeContext& c)
{
    const RobotModel& m = c.model;
    const int nv = m.nv, ndx = 2 * nv, nu = m.nu;
    CostEvaluation out(ndx, nu);
    if (t.weight == 0.0) return out;
    switch (t.kind)
    {
        case CostKind::ComTracking:
        {
            const Vec3 com = center_of_mass(m, c.kin);
            MatX Rx = MatX::Zero(3, ndx);
            Rx.leftCols(nv) = center_of_mass_jacobian(m, c.kin, c.Sw);
            detail::accumulate(out, quadratic_residual_cost(VecX(com), VecX(t.com_ref)), Rx, nullptr, t.weight);
            break;
        }
        case CostKind::FramePlacement:
        {
            const SE3 M = frame_placement<double>(m, c.kin, t.frame_id);
            const MatX Jw = frame_jacobian(m, c.kin, c.Sw, t.frame_id, ReferenceFrame::LocalWorldAligned);
            MatX Rx = MatX::Zero(6, ndx);
            Rx.topLeftCorner(3, nv) = Jw.topRows<3>();
            const Vec3 e = so3_log(t.placement_ref.R.transpose() * M.R);
            Rx.bottomLeftCorner(3, nv) = so3_right_jacobian_inv(e) * M.R.transpose() * Jw.bottomRows<3>();
            detail::accumulate(out, quadratic_residual_cost(M, t.placement_ref), Rx, nullptr, t.weight);
            break;
        }
        case CostKind::PostureReg:
        {
            const VecX r = state_difference(t.state_ref, c.x);
            if (t.state_weights.size() != r.size()) throw DimensionError("posture cost: weight vector has wrong dimension");
            const MatX Rx = difference_jacobian_second(t.state_ref, c.x);
            ActivationEval a;
            a.value = r.dot(t.state_weights.cwiseProduct(r));
            a.gradient = 2.0 * t.state_weights.cwiseProduct(r);
            a.hessian_diag = 2.0 * t.state_weights;
            detail::accumulate(out, a, Rx, nullptr, t.weight);
            break;
        }
        case CostKind::ControlReg:
        {
            const VecX ref = t.control_ref.size() ? t.control_ref : VecX(VecX::Zero(nu));
            const ActivationEval a = quadratic_residual_cost(c.u, ref);
            out.value += t.weight * a.value;
            out.Lu += t.weight * a.gradient;
            out.Luu.diagonal() += t.weight * a.hessian_diag;
            break;
        }
        case CostKind::JointLimitBarrier:
        {
            if (t.lower.size() != 2 * nu) throw DimensionError("joint limit barrier: bounds must have dimension 2 nu");
            VecX r(2 * nu);
            r.head(nu) = c.x.q.tail(nu);
            r.tail(nu) = c.x.v.tail(nu);
            MatX Rx = MatX::Zero(2 * nu, ndx);
            Rx.block(0, 6, nu, nu).setIdentity();
            Rx.block(nu, nv + 6, nu, nu).setIdentity();
            detail::accumulate(out, bounded_quadratic(r, t.lower, t.upper), Rx, nullptr, t.weight);
            break;
        }
        case CostKind::FrictionConeBarrier:
        case CostKind::CopBarrier:
        {
            const int slot = detail::contact_slot(c, t.frame_id);
            if (slot < 0 || !c.wrenches || !c.dlambda_dx || !c.dlambda_du)
                throw std::invalid_argument(std::string(to_string(t.kind)) + " on node without contact at " + t.frame);
            const Vec6& w = (*c.wrenches)[slot];
            const MatX Wx = c.dlambda_dx->middleRows<6>(6 * slot);
            const MatX Wu = c.dlambda_du->middleRows<6>(6 * slot);
            if (t.kind == CostKind::FrictionConeBarrier)
            {
                const Eigen::Matrix<double, 5, 6> D = friction_cone_faces(t.cone);
                const MatX Rx = D * Wx, Ru = D * Wu;
                const VecX r = D * w;
                const VecX inf = VecX::Constant(5, std::numeric_limits<double>::infinity());
                detail::accumulate(out, bounded_quadratic(r, VecX(VecX::Zero(5)), inf), Rx, &Ru, t.weight);
            }
            else
            {
                // Moment form against the robot weight, defined for any load.
                const double f_ref = m.total_mass() * kGravity;
                const Eigen::Matrix<double, 4, 6> D = cop_moment_jacobian(t.cone, f_ref);
                const MatX Rx = D * Wx, Ru = D * Wu;
                const VecX r = D * w;
                const VecX inf = VecX::Constant(4, std::numeric_limits<double>::infinity());
                detail::accumulate(out, bounded_quadratic(r, -inf, VecX(VecX::Zero(4))), Rx, &Ru, t.weight);
            }
            break;
        }
    }
    return out;
}

/// Weighted sum of all terms at one node.
inline CostEvaluation compose_node_cost(const std::vector<CostTerm>& terms, const NodeContext& c)
{
    CostEvaluation out(2 * c.model.nv, c.model.nu);
    for (const auto& t : terms)
    {
        if (t.weight < 0.0) throw std::invalid_argument("cost weight must be >= 0");
        out += evaluate_term(t, c);
    }
    return out;
}

}  // namespace hddp
