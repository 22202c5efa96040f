#include <gtest/gtest.h>

#include <random>

#include "hddp/solver.hpp"
#include "zoo.hpp"

using namespace hddp;

namespace
{

// x' = A x + B u + c,  l = 1/2 x^T Q x + q^T x + 1/2 u^T R u + r^T u
struct LinearQuadratic : ActionModel
{
    MatX A, B, Q, R;
    VecX c, q, r, lb, ub;
    bool terminal = false;

    int nx() const override { return static_cast<int>(A.rows()); }
    int ndx() const override { return nx(); }
    int nu() const override { return terminal ? 0 : static_cast<int>(B.cols()); }
    VecX integrate(const VecX& x, const VecX& dx) const override { return x + dx; }
    VecX difference(const VecX& x0, const VecX& x1) const override { return x1 - x0; }
    VecX lower_bound() const override { return lb.size() ? lb : ActionModel::lower_bound(); }
    VecX upper_bound() const override { return ub.size() ? ub : ActionModel::upper_bound(); }

    void calc(ActionData& d, const VecX& x, const VecX& u, bool derivatives) const override
    {
        d.next = terminal ? x : VecX(A * x + B * u + c);
        d.cost = 0.5 * x.dot(Q * x) + q.dot(x);
        if (!terminal) d.cost += 0.5 * u.dot(R * u) + r.dot(u);
        if (!derivatives) return;
        d.Fx = terminal ? MatX::Identity(nx(), nx()) : A;
        d.Fu = terminal ? MatX(nx(), 0) : B;
        d.Lx = Q * x + q;
        d.Lxx = Q;
        d.Lu = terminal ? VecX(0) : VecX(R * u + r);
        d.Luu = terminal ? MatX(0, 0) : R;
        d.Lxu = MatX::Zero(nx(), nu());
    }
};

MatX random_spd(int n, std::mt19937& rng, double shift)
{
    const MatX G = test::random_vector(n * n, rng).reshaped(n, n);
    return G * G.transpose() + shift * MatX::Identity(n, n);
}

ShootingProblem make_lqr(int N, int nx, int nu, unsigned seed, double bound = 0.0)
{
    std::mt19937 rng(seed);
    ShootingProblem p;
    p.x0 = test::random_vector(nx, rng);
    auto run = std::make_shared<LinearQuadratic>();
    run->A = MatX::Identity(nx, nx) + 0.1 * test::random_vector(nx * nx, rng).reshaped(nx, nx);
    run->B = test::random_vector(nx * nu, rng).reshaped(nx, nu);
    run->c = 0.1 * test::random_vector(nx, rng);
    run->Q = random_spd(nx, rng, 0.1);
    run->R = random_spd(nu, rng, 0.5);
    run->q = test::random_vector(nx, rng);
    run->r = test::random_vector(nu, rng);
    if (bound > 0.0)
    {
        run->lb = VecX::Constant(nu, -bound);
        run->ub = VecX::Constant(nu, bound);
    }
    auto term = std::make_shared<LinearQuadratic>(*run);
    term->terminal = true;
    term->Q = random_spd(nx, rng, 1.0);
    p.running.assign(N, run);
    p.terminal = term;
    return p;
}

// Discrete Riccati recursion for the affine LQ problem, then a rollout.
std::vector<VecX> riccati_controls(const ShootingProblem& p)
{
    const auto& m = dynamic_cast<const LinearQuadratic&>(*p.running[0]);
    const auto& t = dynamic_cast<const LinearQuadratic&>(*p.terminal);
    const int N = p.horizon();
    std::vector<MatX> K(N);
    std::vector<VecX> k(N);
    MatX P = t.Q;
    VecX s = t.q;
    for (int i = N - 1; i >= 0; --i)
    {
        const MatX H = m.R + m.B.transpose() * P * m.B;
        const VecX g = m.r + m.B.transpose() * (P * m.c + s);
        const MatX G = m.B.transpose() * P * m.A;
        K[i] = -H.ldlt().solve(G);
        k[i] = -H.ldlt().solve(g);
        const MatX Acl = m.A + m.B * K[i];
        const MatX Pn = m.Q + K[i].transpose() * m.R * K[i] + Acl.transpose() * P * Acl;
        const VecX sn = m.q + K[i].transpose() * (m.R * k[i] + m.r) + Acl.transpose() * (P * (m.B * k[i] + m.c) + s);
        P = 0.5 * (Pn + Pn.transpose());
        s = sn;
    }
    std::vector<VecX> us;
    VecX x = p.x0;
    for (int i = 0; i < N; ++i)
    {
        us.push_back(k[i] + K[i] * x);
        x = m.A * x + m.B * us.back() + m.c;
    }
    return us;
}

double total_cost(const ShootingProblem& p, const std::vector<VecX>& us)
{
    const auto xs = rollout(p, us);
    double J = 0.0;
    ActionData d;
    for (int k = 0; k < p.horizon(); ++k)
    {
        p.running[k]->calc(d, xs[k], us[k], false);
        J += d.cost;
    }
    p.terminal->calc(d, xs.back(), VecX(), false);
    return J + d.cost;
}

// Fixed-base pendulum (base welded by a 6D contact) swung towards 1.2 rad.
ShootingProblem make_pendulum(double weight_scale = 1.0, int N = 30, double bound = 20.0)
{
    auto m = std::make_shared<RobotModel>(parse_model_string(test::kPendulum));
    State x0 = neutral_state(*m);
    const ContactSet weld = test::contacts_at(*m, x0.q, {"base_frame"});
    State target = x0;
    target.q[7] = 1.2;
    VecX w = VecX::Ones(2 * m->nv);
    ShootingProblem p;
    p.x0 = x0.stacked();
    for (int k = 0; k < N; ++k)
    {
        auto knot = std::make_shared<RobotKnot>(m);
        knot->dt = 0.05;
        knot->contacts = weld;
        knot->costs = {CostTerm::posture(target, w, 0.1 * weight_scale), CostTerm::control(VecX::Zero(m->nu), 1e-3 * weight_scale)};
        knot->u_lower = VecX::Constant(1, -bound);
        knot->u_upper = VecX::Constant(1, bound);
        knot->validate();
        p.running.push_back(knot);
    }
    auto term = std::make_shared<RobotKnot>(m);
    term->is_terminal = true;
    term->costs = {CostTerm::posture(target, w, 10.0 * weight_scale)};
    p.terminal = term;
    return p;
}

}  // namespace

TEST(BoxQp, UnconstrainedIsNewtonStep)
{
    std::mt19937 rng(1);
    const MatX H = random_spd(4, rng, 0.5);
    const VecX q = test::random_vector(4, rng);
    const VecX inf = VecX::Constant(4, 1e300);
    const BoxQpResult r = boxqp(H, q, -inf, inf, VecX::Zero(4));
    ASSERT_TRUE(r.ok);
    EXPECT_LT((r.x + H.llt().solve(q)).norm(), 1e-12);
}

TEST(BoxQp, ScalarClamp)
{
    const BoxQpResult r = boxqp(MatX::Constant(1, 1, 2.0), VecX::Constant(1, 6.0), VecX::Constant(1, -1.0), VecX::Constant(1, 1.0),
                                VecX::Zero(1));
    ASSERT_TRUE(r.ok);
    EXPECT_EQ(r.x[0], -1.0);
    EXPECT_FALSE(r.free[0]);
}

// Exhaustive oracle: every assignment of {free, lower, upper} to 3 variables.
TEST(BoxQp, MatchesActiveSetEnumeration)
{
    std::mt19937 rng(42);
    for (int trial = 0; trial < 200; ++trial)
    {
        const MatX H = random_spd(3, rng, 0.1);
        const VecX q = test::random_vector(3, rng, 3.0);
        const VecX lb = -VecX::Constant(3, 0.5) - 0.5 * test::random_vector(3, rng).cwiseAbs();
        const VecX ub = VecX::Constant(3, 0.5) + 0.5 * test::random_vector(3, rng).cwiseAbs();
        double best = std::numeric_limits<double>::infinity();
        VecX xbest;
        for (int code = 0; code < 27; ++code)
        {
            VecX x = VecX::Zero(3);
            std::vector<int> fr;
            int c = code;
            for (int i = 0; i < 3; ++i, c /= 3)
            {
                if (c % 3 == 0)
                    fr.push_back(i);
                else
                    x[i] = c % 3 == 1 ? lb[i] : ub[i];
            }
            if (!fr.empty())
            {
                const int nf = static_cast<int>(fr.size());
                MatX Hf(nf, nf);
                VecX gf(nf);
                for (int a = 0; a < nf; ++a)
                {
                    gf[a] = q[fr[a]];
                    for (int i = 0; i < 3; ++i)
                        if (std::find(fr.begin(), fr.end(), i) == fr.end()) gf[a] += H(fr[a], i) * x[i];
                    for (int b = 0; b < nf; ++b) Hf(a, b) = H(fr[a], fr[b]);
                }
                const VecX xf = -Hf.llt().solve(gf);
                for (int a = 0; a < nf; ++a) x[fr[a]] = xf[a];
            }
            if ((x.array() < lb.array() - 1e-14).any() || (x.array() > ub.array() + 1e-14).any()) continue;
            const double v = boxqp_value(H, q, x);
            if (v < best)
            {
                best = v;
                xbest = x;
            }
        }
        const BoxQpResult r = boxqp(H, q, lb, ub, VecX::Zero(3));
        ASSERT_TRUE(r.ok);
        EXPECT_LT((r.x - xbest).cwiseAbs().maxCoeff(), 1e-9) << "trial " << trial;
        EXPECT_TRUE((r.x.array() >= lb.array()).all() && (r.x.array() <= ub.array()).all());
    }
}

TEST(ExpectedImprovement, Arithmetic)
{
    EXPECT_DOUBLE_EQ(expected_improvement(-2.0, 1.0, 1.0), -1.5);
    EXPECT_EQ(expected_improvement(-2.0, 1.0, 0.0), 0.0);
    EXPECT_LT(std::abs(expected_improvement(-2.0, 1.0, 1e-12)), 1e-11);
}

TEST(BoxFddpLqr, ConvergesToRiccatiSolution)
{
    for (unsigned seed : {1u, 2u, 3u})
    {
        const ShootingProblem p = make_lqr(20, 4, 2, seed);
        const Solution s = solve(p);
        ASSERT_TRUE(s.converged()) << to_string(s.status);
        EXPECT_LE(s.iterations, 2);
        const auto us = riccati_controls(p);
        double err = 0.0;
        for (int k = 0; k < p.horizon(); ++k) err = std::max(err, (s.us[k] - us[k]).cwiseAbs().maxCoeff());
        EXPECT_LT(err, 1e-9);
        EXPECT_LT(s.gap, 1e-12);
    }
}

TEST(BoxFddpLqr, FullStepDecreaseMatchesModel)
{
    const ShootingProblem p = make_lqr(15, 3, 2, 9);
    BoxFddp s(p);
    s.init(rollout(p, std::vector<VecX>(15, VecX::Zero(2))), std::vector<VecX>(15, VecX::Zero(2)));
    s.calc_all(true);
    ASSERT_TRUE(s.backward_pass());
    double d1, d2;
    s.expected_coefficients(d1, d2);
    const double J0 = s.cost();
    for (double alpha : {1.0, 0.5, 0.125})
    {
        const double J1 = s.forward_pass(alpha);
        EXPECT_NEAR(J1 - J0, expected_improvement(d1, d2, alpha), 1e-10 * std::max(1.0, std::abs(J0)));
    }
}

TEST(BoxFddpLqr, NullStepReproducesIterate)
{
    const ShootingProblem p = make_lqr(10, 3, 1, 4);
    std::mt19937 rng(4);
    std::vector<VecX> us;
    for (int k = 0; k < 10; ++k) us.push_back(test::random_vector(1, rng));
    const auto xs = rollout(p, us);
    BoxFddp s(p);
    s.init(xs, us);
    s.calc_all(true);
    ASSERT_TRUE(s.backward_pass());
    const double J = s.forward_pass(0.0);
    EXPECT_EQ(J, s.cost());
    for (int k = 0; k < 10; ++k)
    {
        EXPECT_EQ(s.us_try()[k], us[k]);
        EXPECT_EQ(s.xs_try()[k], xs[k]);
    }
}

TEST(BoxFddpLqr, InfeasibleWarmStartFullStepClosesGaps)
{
    const ShootingProblem p = make_lqr(12, 3, 2, 5);
    std::mt19937 rng(5);
    std::vector<VecX> xs;
    for (int k = 0; k <= 12; ++k) xs.push_back(test::random_vector(3, rng, 5.0));
    BoxFddp s(p);
    s.init(xs, {});
    s.calc_all(true);
    EXPECT_GT(s.gap(), 0.1);
    ASSERT_TRUE(s.backward_pass());
    s.forward_pass(1.0);
    double gap = 0.0;
    ActionData d;
    for (int k = 0; k < 12; ++k)
    {
        p.running[k]->calc(d, s.xs_try()[k], s.us_try()[k], false);
        gap = std::max(gap, (d.next - s.xs_try()[k + 1]).cwiseAbs().maxCoeff());
    }
    gap = std::max(gap, (s.xs_try()[0] - p.x0).cwiseAbs().maxCoeff());
    EXPECT_LE(gap, 1e-12);
}

// Brute force over the whole trajectory: J(u) is quadratic in the stacked
// controls; enumerate the 3^N active sets and keep the best feasible one.
TEST(BoxFddpLqr, BoxedSolutionMatchesActiveSetEnumeration)
{
    for (int N : {3, 5})
    {
        ShootingProblem p = make_lqr(N, 2, 1, 100 + N, 0.1);
        const auto& m = dynamic_cast<const LinearQuadratic&>(*p.running[0]);
        // Make the unconstrained optimum large enough to saturate.
        auto mm = std::make_shared<LinearQuadratic>(m);
        mm->r = VecX::Constant(1, -0.5 * mm->R(0, 0) * 5.0);
        p.running.assign(N, mm);

        const VecX u0 = VecX::Zero(N);
        auto J = [&](const VecX& u)
        {
            std::vector<VecX> us;
            for (int k = 0; k < N; ++k) us.push_back(VecX::Constant(1, u[k]));
            return total_cost(p, us);
        };
        // Quadratic model from exact differences (J is exactly quadratic).
        MatX H(N, N);
        VecX g(N);
        const double J0 = J(u0);
        for (int i = 0; i < N; ++i)
        {
            VecX ei = VecX::Zero(N);
            ei[i] = 1.0;
            g[i] = 0.5 * (J(ei) - J(-ei));
            for (int j = 0; j < N; ++j)
            {
                VecX ej = VecX::Zero(N);
                ej[j] = 1.0;
                H(i, j) = 0.5 * (J(ei + ej) - J(ei) - J(ej) + J0 + (J(-ei - ej) - J(-ei) - J(-ej) + J0));
            }
        }
        H = 0.5 * (H + H.transpose());
        int codes = 1;
        for (int i = 0; i < N; ++i) codes *= 3;
        double best = std::numeric_limits<double>::infinity();
        VecX ubest;
        bool any_clamped = false;
        for (int code = 0; code < codes; ++code)
        {
            VecX u = VecX::Zero(N);
            std::vector<int> fr;
            int c = code;
            for (int i = 0; i < N; ++i, c /= 3)
            {
                if (c % 3 == 0)
                    fr.push_back(i);
                else
                    u[i] = c % 3 == 1 ? -0.1 : 0.1;
            }
            if (!fr.empty())
            {
                const int nf = static_cast<int>(fr.size());
                MatX Hf(nf, nf);
                VecX gf(nf);
                for (int a = 0; a < nf; ++a)
                {
                    gf[a] = g[fr[a]];
                    for (int i = 0; i < N; ++i)
                        if (std::find(fr.begin(), fr.end(), i) == fr.end()) gf[a] += H(fr[a], i) * u[i];
                    for (int b = 0; b < nf; ++b) Hf(a, b) = H(fr[a], fr[b]);
                }
                const VecX uf = -Hf.llt().solve(gf);
                for (int a = 0; a < nf; ++a) u[fr[a]] = uf[a];
            }
            if ((u.array().abs() > 0.1 + 1e-12).any()) continue;
            const double v = J(u);
            if (v < best)
            {
                best = v;
                ubest = u;
            }
        }
        const Solution s = solve(p);
        ASSERT_TRUE(s.converged()) << to_string(s.status);
        for (int k = 0; k < N; ++k)
        {
            EXPECT_NEAR(s.us[k][0], ubest[k], 1e-7);
            EXPECT_LE(std::abs(s.us[k][0]), 0.1);
            if (std::abs(ubest[k]) == 0.1)
            {
                any_clamped = true;
                EXPECT_EQ(std::abs(s.us[k][0]), 0.1);
                EXPECT_EQ(s.K[k].norm(), 0.0);
            }
        }
        EXPECT_TRUE(any_clamped);
    }
}

TEST(BoxFddpPendulum, ConvergesWithinBoundsAndFeasible)
{
    const ShootingProblem p = make_pendulum();
    SolverOptions opt;
    const Solution s = solve(p, {}, {}, opt);
    ASSERT_TRUE(s.converged()) << to_string(s.status) << " after " << s.iterations;
    EXPECT_LE(s.gap, 1e-9);
    for (const auto& u : s.us) EXPECT_LE(std::abs(u[0]), 20.0);
    // Regularization schedule stays within its range and starts at the floor.
    ASSERT_FALSE(s.log.empty());
    EXPECT_EQ(s.log.front().reg, 1e-9);
    for (const auto& L : s.log)
    {
        EXPECT_GE(L.reg, 1e-9);
        EXPECT_LE(L.reg, 1e9);
    }
    // Accepted costs are non-increasing once feasible.
    for (std::size_t i = 1; i < s.log.size(); ++i)
        if (s.log[i].accepted && s.log[i - 1].gap == 0.0) EXPECT_LE(s.log[i].cost, s.log[i - 1].cost + 1e-12);
    // The state sequence is a rollout of the controls.
    const auto xs = rollout(p, s.us);
    for (std::size_t k = 0; k < xs.size(); ++k) EXPECT_LT((xs[k] - s.xs[k]).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(BoxFddpPendulum, InfeasibleWarmStartGapsShrinkMonotonically)
{
    const ShootingProblem p = make_pendulum();
    std::mt19937 rng(8);
    const RobotModel m = parse_model_string(test::kPendulum);
    std::vector<VecX> xs;
    for (int k = 0; k <= p.horizon(); ++k)
    {
        State x = unstack(m, p.x0);
        x.q[7] = 1.2 * k / p.horizon();
        x.v[6] = test::random_vector(1, rng)[0];
        xs.push_back(x.stacked());
    }
    const Solution s = solve(p, xs, {});
    ASSERT_TRUE(s.converged()) << to_string(s.status);
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& L : s.log)
        if (L.accepted)
        {
            EXPECT_LE(L.gap, prev);
            prev = L.gap;
        }
    EXPECT_LE(s.gap, 1e-9);
}

TEST(BoxFddpPendulum, Deterministic)
{
    const ShootingProblem p = make_pendulum();
    const Solution a = solve(p), b = solve(p);
    ASSERT_EQ(a.iterations, b.iterations);
    for (std::size_t k = 0; k < a.xs.size(); ++k) EXPECT_EQ(a.xs[k], b.xs[k]);
    for (std::size_t k = 0; k < a.us.size(); ++k) EXPECT_EQ(a.us[k], b.us[k]);
}

TEST(BoxFddpPendulum, ArgminInvariantToWeightScaling)
{
    SolverOptions opt;
    opt.tol = 1e-18;
    const Solution a = solve(make_pendulum(1.0), {}, {}, opt);
    opt.tol = 1e-18 * 8.0;
    const Solution b = solve(make_pendulum(8.0), {}, {}, opt);
    ASSERT_TRUE(a.converged());
    ASSERT_TRUE(b.converged());
    double err = 0.0;
    for (std::size_t k = 0; k < a.xs.size(); ++k) err = std::max(err, (a.xs[k] - b.xs[k]).cwiseAbs().maxCoeff());
    EXPECT_LT(err, 1e-8);
}

// Knot transition Jacobians against central differences on the manifold.
namespace
{
void check_knot_jacobians(const RobotKnot& knot, const State& x, const VecX& u, double tol)
{
    const RobotModel& m = *knot.model;
    ActionData d;
    knot.calc(d, x.stacked(), u, true);
    const double h = 1e-6;
    MatX Fx(2 * m.nv, 2 * m.nv), Fu(2 * m.nv, m.nu);
    ActionData a, b;
    for (int i = 0; i < 2 * m.nv; ++i)
    {
        VecX e = VecX::Zero(2 * m.nv);
        e[i] = h;
        knot.calc(a, integrate(x, e).stacked(), u, false);
        knot.calc(b, integrate(x, -e).stacked(), u, false);
        Fx.col(i) = knot.difference(b.next, a.next) / (2 * h);
    }
    for (int i = 0; i < m.nu; ++i)
    {
        VecX e = VecX::Zero(m.nu);
        e[i] = h;
        knot.calc(a, x.stacked(), u + e, false);
        knot.calc(b, x.stacked(), u - e, false);
        Fu.col(i) = knot.difference(b.next, a.next) / (2 * h);
    }
    EXPECT_LT(test::rel_error(d.Fx, Fx), tol);
    if (m.nu) EXPECT_LT(test::rel_error(d.Fu, Fu), tol);
}
}  // namespace

TEST(RobotKnot, RunningJacobiansMatchFiniteDifferences)
{
    std::mt19937 rng(31);
    for (const auto& z : test::zoo())
    {
        auto m = std::make_shared<RobotModel>(z.model);
        for (int trial = 0; trial < 3; ++trial)
        {
            const State x = test::random_state(*m, rng, 0.5);
            RobotKnot knot(m);
            knot.dt = 0.03;
            knot.contacts = trial == 0 ? ContactSet{} : test::contacts_at(*m, x.q, z.contact_frames);
            check_knot_jacobians(knot, x, test::random_vector(m->nu, rng, 5.0), 1e-5);
        }
    }
}

TEST(RobotKnot, ImpulseJacobiansMatchFiniteDifferences)
{
    std::mt19937 rng(32);
    for (const auto& z : test::zoo())
    {
        auto m = std::make_shared<RobotModel>(z.model);
        const State x = test::random_state(*m, rng, 0.5);
        RobotKnot knot(m);
        knot.is_impulse = true;
        knot.contacts = test::contacts_at(*m, x.q, z.contact_frames);
        knot.validate();
        check_knot_jacobians(knot, x, VecX::Zero(m->nu), 1e-5);
    }
}

TEST(RobotKnot, ValidationRejectsBadKnots)
{
    auto m = std::make_shared<RobotModel>(rh5::model());
    RobotKnot k(m);
    EXPECT_THROW(k.validate(), std::invalid_argument);  // dt = 0 on a running knot
    k.dt = 0.01;
    k.u_lower[0] = 1e6;
    EXPECT_THROW(k.validate(), std::invalid_argument);
    RobotKnot imp(m);
    imp.is_impulse = true;
    imp.costs = {CostTerm::control(VecX::Zero(m->nu), 1.0)};
    EXPECT_THROW(imp.validate(), std::invalid_argument);
}

TEST(BoxFddpPendulum, NoFeedbackOnControlsRestingOnTheBound)
{
    const ShootingProblem p = make_pendulum(1.0, 30, 4.0);
    const Solution s = solve(p);
    ASSERT_TRUE(s.converged()) << to_string(s.status) << " after " << s.iterations;
    int on_bound = 0, inside = 0;
    for (std::size_t k = 0; k < s.us.size(); ++k)
    {
        if (std::abs(std::abs(s.us[k][0]) - 4.0) <= 1e-12)
        {
            ++on_bound;
            EXPECT_TRUE(s.K[k].isZero()) << "knot " << k;
        }
        else if (!s.K[k].isZero())
            ++inside;
    }
    EXPECT_GT(on_bound, 0);
    EXPECT_GT(inside, 0);
}

TEST(BoxFddpPendulum, RegularizationFollowsTheAcceptedStepLength)
{
    const ShootingProblem p = make_pendulum();
    SolverOptions opt;
    opt.reg_init = 1e-2;
    opt.reg_increase_alpha = 0.01;
    opt.reg_decrease_alpha = 0.5;
    const Solution s = solve(p, {}, {}, opt);
    ASSERT_TRUE(s.converged());
    int checked = 0;
    for (std::size_t i = 0; i + 1 < s.log.size(); ++i)
    {
        const IterationLog &a = s.log[i], &b = s.log[i + 1];
        if (!a.accepted) continue;
        double expect = a.reg;
        if (a.alpha <= opt.reg_increase_alpha)
            expect = std::min(a.reg * opt.reg_factor, opt.reg_max);
        else if (a.alpha >= opt.reg_decrease_alpha)
            expect = std::max(a.reg / opt.reg_factor, opt.reg_min);
        EXPECT_DOUBLE_EQ(b.reg, expect) << "iteration " << i << " alpha " << a.alpha;
        ++checked;
    }
    EXPECT_GT(checked, 0);
}
