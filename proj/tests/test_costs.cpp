#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "hddp/problem.hpp"
#include "hddp/rh5.hpp"
#include "zoo.hpp"

using namespace hddp;

namespace
{

double min_eig(const MatX& A)
{
    if (A.size() == 0) return 0.0;
    const MatX S = 0.5 * (A + A.transpose());
    return Eigen::SelfAdjointEigenSolver<MatX>(S, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

// One single-support walking knot: foot task, cone, CoP, joint barrier,
// posture and torque terms, evaluated through the running knot model.
struct WalkingNode
{
    std::shared_ptr<RobotModel> model = std::make_shared<RobotModel>(rh5::model());
    RobotKnot knot{model};
    State x0;
    VecX u0;

    WalkingNode(double weight_scale = 1.0)
    {
        const RobotModel& m = *model;
        x0 = rh5::standing_state(m);
        knot.dt = 0.03;
        knot.contacts = test::contacts_at(m, x0.q, {rh5::kLeftFoot});
        const auto pl = forward_kinematics(m, x0.q);
        SE3 swing = pl.frames[m.frame_id(rh5::kRightFoot)];
        swing.p += Vec3(0.05, 0.0, 0.03);
        const JointLimits L = joint_limits(m);
        VecX lo(2 * m.nu), hi(2 * m.nu);
        lo << 0.95 * L.lower, -0.95 * L.velocity;
        hi << 0.95 * L.upper, 0.95 * L.velocity;
        const WrenchConeSpec cone;
        knot.costs = {
            CostTerm::frame_placement(m, rh5::kRightFoot, swing, 1e3 * weight_scale),
            CostTerm::friction_cone(m, rh5::kLeftFoot, cone, 1e2 * weight_scale),
            CostTerm::cop(m, rh5::kLeftFoot, cone, 1e2 * weight_scale),
            CostTerm::joint_limits(lo, hi, 1e2 * weight_scale),
            CostTerm::posture(x0, VecX::Ones(2 * m.nv), 1e-1 * weight_scale),
            CostTerm::control(VecX::Zero(m.nu), 1e-4 * weight_scale),
        };
        const StaticEquilibrium eq = static_equilibrium(m, x0.q, knot.contacts);
        u0 = eq.tau;
    }
};

}  // namespace

TEST(QuadraticResidual, ZeroAtReference)
{
    const VecX a = Vec3(0.1, -0.2, 0.9);
    const ActivationEval e = quadratic_residual_cost(a, a);
    EXPECT_EQ(e.value, 0.0);
    EXPECT_EQ(e.gradient.norm(), 0.0);
}

TEST(QuadraticResidual, ComOffset)
{
    const ActivationEval e = quadratic_residual_cost(VecX(Vec3(0.1, 0, 0.9)), VecX(Vec3(0, 0, 0.9)));
    EXPECT_NEAR(e.value, 0.01, 1e-15);
}

TEST(QuadraticResidual, DimensionMismatchThrows)
{
    EXPECT_THROW(quadratic_residual_cost(VecX::Zero(3), VecX::Zero(2)), DimensionError);
}

TEST(QuadraticResidual, PlacementAtReferenceIsZero)
{
    const SE3 M{so3_exp(Vec3(0.1, 0.2, 0.3)), Vec3(1, 2, 3)};
    EXPECT_NEAR(quadratic_residual_cost(M, M).value, 0.0, 1e-24);
}

// Central differences of the task terms through kinematics, 50 random states.
TEST(QuadraticResidual, GradientMatchesFiniteDifferences)
{
    const RobotModel m = rh5::model();
    std::mt19937 rng(11);
    const double h = 1e-6;
    for (int trial = 0; trial < 50; ++trial)
    {
        const State x = test::random_state(m, rng, 0.5);
        const State xr = test::random_state(m, rng, 0.5);
        const auto pl = forward_kinematics(m, xr.q);
        const std::vector<CostTerm> terms = {
            CostTerm::com(center_of_mass(m, xr.q), 1.0),
            CostTerm::frame_placement(m, trial % 2 ? "left_foot" : "right_hand", pl.frames[m.frame_id(trial % 2 ? "left_foot" : "right_hand")], 1.0),
        };
        const VecX u = VecX::Zero(m.nu);
        auto value = [&](const State& s)
        {
            const Kinematics k = forward_kinematics_data(m, s.q);
            const MatX Sw = world_subspaces(m, k);
            return compose_node_cost(terms, NodeContext{m, s, u, k, Sw}).value;
        };
        const Kinematics k = forward_kinematics_data(m, x.q);
        const MatX Sw = world_subspaces(m, k);
        const CostEvaluation c = compose_node_cost(terms, NodeContext{m, x, u, k, Sw});
        VecX fd(2 * m.nv);
        for (int i = 0; i < 2 * m.nv; ++i)
        {
            VecX e = VecX::Zero(2 * m.nv);
            e[i] = h;
            fd[i] = (value(integrate(x, e)) - value(integrate(x, -e))) / (2 * h);
        }
        EXPECT_LT((c.Lx - fd).norm() / std::max(fd.norm(), 1e-8), 1e-5) << "trial " << trial;
    }
}

TEST(BoundedQuadratic, InsideIsZero)
{
    const ActivationEval a = bounded_quadratic(0.3, -1.0, 1.0);
    EXPECT_EQ(a.value, 0.0);
    EXPECT_EQ(a.gradient[0], 0.0);
}

TEST(BoundedQuadratic, ViolationFromNearestBound)
{
    EXPECT_DOUBLE_EQ(bounded_quadratic(2.0, -1.0, 1.0).value, 0.5);
    EXPECT_DOUBLE_EQ(bounded_quadratic(-3.0, -1.0, 1.0).value, 2.0);
    EXPECT_DOUBLE_EQ(bounded_quadratic(-3.0, -1.0, 1.0).gradient[0], -2.0);
}

TEST(BoundedQuadratic, BoundOrderingViolationThrows)
{
    EXPECT_THROW(bounded_quadratic(0.0, 1.0, -1.0), std::invalid_argument);
}

TEST(BoundedQuadratic, ContinuouslyDifferentiableAcrossBounds)
{
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int i = 0; i < 100; ++i)
    {
        const double lo = U(rng), hi = lo + std::abs(U(rng));
        for (double b : {lo, hi})
        {
            const auto in = bounded_quadratic(b + (b == lo ? 1e-6 : -1e-6), lo, hi);
            const auto out = bounded_quadratic(b + (b == lo ? -1e-6 : 1e-6), lo, hi);
            const auto at = bounded_quadratic(b, lo, hi);
            EXPECT_EQ(at.value, 0.0);
            EXPECT_EQ(at.gradient[0], 0.0);
            EXPECT_LT(std::abs(out.value - in.value), 1e-11);
            EXPECT_LT(std::abs(out.gradient[0] - in.gradient[0]), 1.1e-6);
        }
    }
}

TEST(FrictionCone, PureNormalForceIsFree)
{
    Vec6 w;
    w << 0, 0, 100, 0, 0, 0;
    const Vec3 r = friction_cone_residual(w, {});
    EXPECT_GE(r.minCoeff(), 0.0);
    EXPECT_EQ(bounded_quadratic(VecX(r), VecX::Zero(3), VecX::Constant(3, 1e300)).value, 0.0);
}

TEST(FrictionCone, SlidingForceViolates)
{
    Vec6 w;
    w << 80, 0, 100, 0, 0, 0;
    const Vec3 r = friction_cone_residual(w, {0.7});
    EXPECT_NEAR(r[1], -10.0, 1e-12);
    EXPECT_GT(bounded_quadratic(VecX(r), VecX::Zero(3), VecX::Constant(3, 1e300)).value, 0.0);
}

TEST(FrictionCone, PullingForceViolates)
{
    Vec6 w;
    w << 0, 0, -5, 0, 0, 0;
    const Vec3 r = friction_cone_residual(w, {});
    EXPECT_LT(r[0], 0.0);
    EXPECT_GT(bounded_quadratic(VecX(r), VecX::Zero(3), VecX::Constant(3, 1e300)).value, 0.0);
}

TEST(FrictionCone, PositivelyHomogeneous)
{
    std::mt19937 rng(5);
    for (int i = 0; i < 100; ++i)
    {
        const Vec6 w = test::random_vector(6, rng, 50.0);
        const double s = std::uniform_real_distribution<double>(0.01, 10.0)(rng);
        EXPECT_LT((friction_cone_residual(s * w, {}) - s * friction_cone_residual(w, {})).norm(), 1e-12 * (1 + w.norm() * s));
    }
}

TEST(CenterOfPressure, CenteredLoad)
{
    Vec6 w;
    w << 0, 0, 100, 0, 0, 0;
    EXPECT_EQ(cop_from_wrench(w), Eigen::Vector2d::Zero());
}

TEST(CenterOfPressure, PitchMomentShiftsForward)
{
    Vec6 w;
    w << 0, 0, 100, 0, -2, 0;
    const Eigen::Vector2d c = cop_from_wrench(w);
    EXPECT_NEAR(c.x(), 0.02, 1e-15);
    // Moment about the CoP: tau + (0 - c) x f must have no tangential part.
    const Vec3 tau = w.tail<3>() - Vec3(c.x(), c.y(), 0).cross(Vec3(w.head<3>()));
    EXPECT_NEAR(tau.x(), 0.0, 1e-14);
    EXPECT_NEAR(tau.y(), 0.0, 1e-14);
}

TEST(CenterOfPressure, UnloadedFootIsUndefined)
{
    Vec6 w;
    w << 0, 0, 0.5, 0, 0, 0;
    EXPECT_THROW(cop_from_wrench(w), UndefinedCopError);
    EXPECT_THROW(cop_barrier(w, {}), UndefinedCopError);
}

namespace
{
Vec6 wrench_with_cop(double cx, double cy, double fz = 100.0)
{
    Vec6 w;
    w << 0, 0, fz, cy * fz, -cx * fz, 0;
    return w;
}
}  // namespace

TEST(CopBarrier, InsideHalfCoverageIsFree)
{
    const WrenchConeSpec foot{0.7, 0.100, 0.040, 0.5};
    EXPECT_EQ(cop_barrier(wrench_with_cop(0.03, 0.01), foot).value, 0.0);
}

TEST(CopBarrier, OutsideCostsHalfSquaredViolation)
{
    const WrenchConeSpec foot{0.7, 0.100, 0.040, 0.5};
    EXPECT_NEAR(cop_barrier(wrench_with_cop(0.08, 0.0), foot).value, 0.5 * 0.03 * 0.03, 1e-15);
}

TEST(CopBarrier, BoundaryIsFree)
{
    const WrenchConeSpec foot{0.7, 0.100, 0.040, 0.5};
    const ActivationEval a = cop_barrier(wrench_with_cop(0.05, -0.02), foot);
    EXPECT_EQ(a.value, 0.0);
    EXPECT_EQ(a.gradient.norm(), 0.0);
}

TEST(CopBarrier, InvalidSpecRejected)
{
    const RobotModel m = rh5::model();
    EXPECT_THROW(CostTerm::cop(m, "left_foot", {0.7, 0.1, 0.04, 1.5}, 1.0), std::invalid_argument);
    EXPECT_THROW(CostTerm::friction_cone(m, "left_foot", {0.0}, 1.0), std::invalid_argument);
}

TEST(ComposeNodeCost, SingleTermEqualsTerm)
{
    const RobotModel m = rh5::model();
    const State x = rh5::standing_state(m);
    const VecX u = VecX::Zero(m.nu);
    const Kinematics k = forward_kinematics_data(m, x.q);
    const MatX Sw = world_subspaces(m, k);
    const NodeContext c{m, x, u, k, Sw};
    const CostTerm t = CostTerm::com(Vec3(0.1, 0, 0.8), 1.0);
    const CostEvaluation a = compose_node_cost({t}, c), b = evaluate_term(t, c);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.Lx, b.Lx);
    EXPECT_EQ(a.Lxx, b.Lxx);
    EXPECT_NEAR(a.value, quadratic_residual_cost(VecX(center_of_mass(m, x.q)), VecX(Vec3(0.1, 0, 0.8))).value, 1e-15);
}

TEST(ComposeNodeCost, LinearInWeights)
{
    const RobotModel m = rh5::model();
    const State x = rh5::standing_state(m);
    std::mt19937 rng(2);
    const VecX u = test::random_vector(m.nu, rng);
    const Kinematics k = forward_kinematics_data(m, x.q);
    const MatX Sw = world_subspaces(m, k);
    const NodeContext c{m, x, u, k, Sw};
    CostTerm half = CostTerm::com(Vec3(0.1, 0, 0.8), 0.5), one = CostTerm::com(Vec3(0.1, 0, 0.8), 1.0);
    const CostEvaluation two_half = compose_node_cost({half, half}, c), single = compose_node_cost({one}, c);
    EXPECT_NEAR(two_half.value, single.value, 1e-14 * single.value);
    EXPECT_LT(test::rel_error(two_half.Lxx, single.Lxx), 1e-14);

    // Scaling every weight by s scales everything by s exactly (s a power of 2).
    const WalkingNode n1(1.0), n4(4.0);
    ActionData d1, d4;
    n1.knot.calc(d1, n1.x0.stacked(), n1.u0 + u, true);
    n4.knot.calc(d4, n4.x0.stacked(), n4.u0 + u, true);
    EXPECT_EQ(4.0 * d1.cost, d4.cost);
    EXPECT_EQ(MatX(4.0 * d1.Lxx), d4.Lxx);
    EXPECT_EQ(MatX(4.0 * d1.Luu), d4.Luu);
    EXPECT_EQ(VecX(4.0 * d1.Lu), d4.Lu);
}

TEST(ComposeNodeCost, WrenchTermOnContactFreeNodeThrows)
{
    const RobotModel m = rh5::model();
    const State x = rh5::standing_state(m);
    const VecX u = VecX::Zero(m.nu);
    const Kinematics k = forward_kinematics_data(m, x.q);
    const MatX Sw = world_subspaces(m, k);
    const NodeContext c{m, x, u, k, Sw};
    EXPECT_THROW(compose_node_cost({CostTerm::friction_cone(m, "left_foot", {}, 1.0)}, c), std::invalid_argument);
}

TEST(ComposeNodeCost, NegativeWeightRejected)
{
    const RobotModel m = rh5::model();
    const State x = rh5::standing_state(m);
    const VecX u = VecX::Zero(m.nu);
    const Kinematics k = forward_kinematics_data(m, x.q);
    const MatX Sw = world_subspaces(m, k);
    EXPECT_THROW(compose_node_cost({CostTerm::com(Vec3::Zero(), -1.0)}, NodeContext{m, x, u, k, Sw}), std::invalid_argument);
}

// Gradient of the full walking node (all six terms, chained through the
// contact dynamics) against central differences in state and control.
TEST(ComposeNodeCost, WalkingNodeGradientMatchesFiniteDifferences)
{
    const WalkingNode n;
    const RobotModel& m = *n.model;
    std::mt19937 rng(17);
    const double h = 1e-6;
    for (int trial = 0; trial < 10; ++trial)
    {
        State x = integrate(n.x0, test::random_vector(2 * m.nv, rng, 0.02));
        const VecX u = n.u0 + test::random_vector(m.nu, rng, 5.0);
        ActionData d;
        n.knot.calc(d, x.stacked(), u, true);
        auto value = [&](const State& s, const VecX& uu)
        {
            ActionData e;
            n.knot.calc(e, s.stacked(), uu, false);
            return e.cost;
        };
        VecX gx(2 * m.nv), gu(m.nu);
        for (int i = 0; i < 2 * m.nv; ++i)
        {
            VecX e = VecX::Zero(2 * m.nv);
            e[i] = h;
            gx[i] = (value(integrate(x, e), u) - value(integrate(x, -e), u)) / (2 * h);
        }
        for (int i = 0; i < m.nu; ++i)
        {
            VecX e = VecX::Zero(m.nu);
            e[i] = h;
            gu[i] = (value(x, u + e) - value(x, u - e)) / (2 * h);
        }
        EXPECT_LT((d.Lx - gx).norm() / gx.norm(), 1e-4) << "trial " << trial;
        EXPECT_LT((d.Lu - gu).norm() / gu.norm(), 1e-4) << "trial " << trial;
    }
}

TEST(ComposeNodeCost, HessiansSymmetricPositiveSemidefinite)
{
    const WalkingNode n;
    const RobotModel& m = *n.model;
    std::mt19937 rng(23);
    for (int trial = 0; trial < 20; ++trial)
    {
        const State x = integrate(n.x0, test::random_vector(2 * m.nv, rng, 0.05));
        const VecX u = n.u0 + test::random_vector(m.nu, rng, 20.0);
        ActionData d;
        n.knot.calc(d, x.stacked(), u, true);
        EXPECT_GE(d.cost, 0.0);
        EXPECT_LT((d.Lxx - d.Lxx.transpose()).cwiseAbs().maxCoeff(), 1e-9 * std::max(1.0, d.Lxx.cwiseAbs().maxCoeff()));
        EXPECT_GE(min_eig(d.Lxx), -1e-10);
        EXPECT_GE(min_eig(d.Luu), -1e-10);
        MatX H(2 * m.nv + m.nu, 2 * m.nv + m.nu);
        H << d.Lxx, d.Lxu, d.Lxu.transpose(), d.Luu;
        EXPECT_GE(min_eig(H), -1e-8 * std::max(1.0, H.cwiseAbs().maxCoeff()));
    }
}

TEST(ComposeNodeCost, JointBarrierActiveOnlyOutsideBounds)
{
    const RobotModel m = rh5::model();
    const JointLimits L = joint_limits(m);
    VecX lo(2 * m.nu), hi(2 * m.nu);
    lo << L.lower, -L.velocity;
    hi << L.upper, L.velocity;
    const CostTerm t = CostTerm::joint_limits(lo, hi, 1.0);
    State x = rh5::standing_state(m);
    const VecX u = VecX::Zero(m.nu);
    auto eval = [&](const State& s)
    {
        const Kinematics k = forward_kinematics_data(m, s.q);
        const MatX Sw = world_subspaces(m, k);
        return evaluate_term(t, NodeContext{m, s, u, k, Sw});
    };
    EXPECT_EQ(eval(x).value, 0.0);
    const int knee = m.joints[m.joint_id("left_knee")].u_index;
    x.v[6 + knee] = L.velocity[knee] + 0.5;
    EXPECT_NEAR(eval(x).value, 0.5 * 0.25, 1e-12);
    EXPECT_NEAR(eval(x).Lx[m.nv + 6 + knee], 0.5, 1e-12);
}
