#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hddp/gaitplan.hpp"

using namespace hddp;

namespace
{

const RobotModel& rh5_model()
{
    static const RobotModel m = rh5::model();
    return m;
}

ExperimentSpec parse(const std::string& text, const std::string& name = "<test>")
{
    std::istringstream in(text);
    return parse_experiment(in, name);
}

// Short double-support problem with nothing but posture regularization.
ExperimentSpec standing_spec()
{
    ExperimentSpec s = default_spec(Motion::SquatWeights);
    s.height = 0.0;
    s.payload_kg = 0.0;
    s.total_time = 0.3;
    s.flags = ConstraintFlags{};
    s.flags.posture = true;
    return s;
}

int line_of_error(const std::string& text)
{
    try
    {
        parse(text);
    }
    catch (const ParseError& e)
    {
        return e.line();
    }
    return -1;
}

}  // namespace

TEST(Gaitplan, KnotCountsFollowTotalTimeOverKnotStep)
{
    // Table: 1.5/0.03, 0.9/0.01, 2.7/0.01
    EXPECT_EQ(default_spec(Motion::WalkWeights).knots(), 50);
    EXPECT_EQ(default_spec(Motion::Jump1cm).knots(), 90);
    EXPECT_EQ(default_spec(Motion::Jump10cm).knots(), 90);
    EXPECT_EQ(default_spec(Motion::JumpObstacles).knots(), 270);
    for (const auto& [motion, name] : motion_names())
    {
        const ExperimentSpec s = default_spec(motion);
        const GaitProblem g = build_problem(rh5_model(), s);
        EXPECT_EQ(g.running_knots, s.knots()) << name;
        EXPECT_EQ(g.schedule.knots(), s.knots()) << name;
        EXPECT_NEAR(g.schedule.total_time(), s.total_time, 1e-12) << name;
        int ticking = 0;
        for (const auto& k : g.knots) ticking += k.impulse ? 0 : 1;
        EXPECT_EQ(ticking, s.knots()) << name;
    }
}

TEST(Gaitplan, WalkingWithWeightsHasFiftyRunningKnots)
{
    const GaitProblem g = build_problem(rh5_model(), default_spec(Motion::WalkWeights));
    EXPECT_EQ(g.running_knots, 50);
    EXPECT_NEAR(g.spec.total_time, 1.5, 0.0);
    EXPECT_NEAR(g.spec.knot_dt, 0.03, 0.0);
    EXPECT_NEAR(g.model->total_mass(), rh5_model().total_mass() + 10.0, 1e-9);
}

TEST(Gaitplan, DefaultFlagsMatchTheConstraintTable)
{
    // columns: foot, CoM, friction, CoP, joint, posture, torque
    const std::vector<std::pair<Motion, ConstraintFlags>> table = {
        {Motion::WalkWeights, {true, false, true, true, true, true, true}},
        {Motion::WalkFast, {true, true, false, false, true, true, true}},
        {Motion::SquatWeights, {true, true, true, true, true, true, true}},
        {Motion::Jump1cm, {true, false, true, true, true, true, true}},
        {Motion::Jump10cm, {true, false, true, true, true, true, true}},
        {Motion::JumpObstacles, {true, false, true, true, true, false, true}},
    };
    for (const auto& [m, flags] : table) EXPECT_TRUE(default_flags(m) == flags) << to_string(m);
}

TEST(Gaitplan, ContactSetsChangeOnlyAtPhaseBoundaries)
{
    for (const auto& [motion, name] : motion_names())
    {
        const GaitProblem g = build_problem(rh5_model(), default_spec(motion));
        std::vector<int> phase_of_tick;
        for (std::size_t p = 0; p < g.schedule.phases.size(); ++p)
            for (int j = 0; j < g.schedule.phase_knots(p); ++j) phase_of_tick.push_back(static_cast<int>(p));
        int tick = 0;
        for (std::size_t k = 0; k < g.knots.size(); ++k)
        {
            if (g.knots[k].impulse) continue;
            EXPECT_EQ(g.knots[k].contacts, g.schedule.phases[phase_of_tick[tick]].contacts) << name << " knot " << k;
            ++tick;
        }
    }
}

TEST(Gaitplan, EveryTouchdownIsFollowedByOneImpulseKnot)
{
    for (const auto& [motion, name] : motion_names())
    {
        const GaitProblem g = build_problem(rh5_model(), default_spec(motion));
        std::vector<std::string> prev = {rh5::kLeftFoot, rh5::kRightFoot};
        int touchdowns = 0, impulses = 0;
        for (std::size_t k = 0; k < g.knots.size(); ++k)
        {
            const auto& c = g.knots[k].contacts;
            if (g.knots[k].impulse)
            {
                ++impulses;
                ASSERT_LT(k + 1, g.knots.size());
                EXPECT_FALSE(g.knots[k + 1].impulse);
                EXPECT_EQ(g.knots[k + 1].contacts, c);
                EXPECT_EQ(g.knots[k + 1].time, g.knots[k].time);
                continue;
            }
            const bool lands = std::any_of(c.begin(), c.end(), [&](const std::string& f) { return std::find(prev.begin(), prev.end(), f) == prev.end(); });
            if (lands)
            {
                ++touchdowns;
                EXPECT_TRUE(k > 0 && g.knots[k - 1].impulse) << name << " knot " << k;
            }
            prev = c;
        }
        EXPECT_EQ(touchdowns, impulses) << name;
    }
}

TEST(Gaitplan, ImpactsCanBeSwitchedOff)
{
    ExperimentSpec s = default_spec(Motion::Jump1cm);
    s.impacts = false;
    const GaitProblem g = build_problem(rh5_model(), s);
    EXPECT_TRUE(std::none_of(g.knots.begin(), g.knots.end(), [](const KnotInfo& k) { return k.impulse; }));
    EXPECT_EQ(static_cast<int>(g.knots.size()), s.knots());
}

TEST(Gaitplan, SmallJumpHasAFlightPhaseAndALandingImpulse)
{
    const GaitProblem g = build_problem(rh5_model(), default_spec(Motion::Jump1cm));
    const auto flight = std::find_if(g.schedule.phases.begin(), g.schedule.phases.end(), [](const Phase& p) { return p.contacts.empty(); });
    ASSERT_NE(flight, g.schedule.phases.end());
    // ballistic flight time 2 sqrt(2h/g), rounded to the knot grid
    const double t_flight = 2.0 * std::sqrt(2.0 * 0.01 / 9.81);
    EXPECT_NEAR(flight->duration, std::round(t_flight / 0.01) * 0.01, 1e-12);
    EXPECT_EQ(flight->swings.size(), 2u);
    const int impulses = static_cast<int>(std::count_if(g.knots.begin(), g.knots.end(), [](const KnotInfo& k) { return k.impulse; }));
    EXPECT_EQ(impulses, 1);
}

TEST(Gaitplan, ObstacleJumpsLandThreeTimesAndTravelTheLength)
{
    const GaitProblem g = build_problem(rh5_model(), default_spec(Motion::JumpObstacles));
    int flights = 0;
    double advance = 0.0;
    for (const auto& p : g.schedule.phases)
        if (p.contacts.empty())
        {
            ++flights;
            advance += p.swings[0].goal.p.x() - p.swings[0].start.p.x();
            EXPECT_NEAR(p.swings[0].apex, 0.25, 0.0);
        }
    EXPECT_EQ(flights, 3);
    EXPECT_NEAR(advance, 0.6, 1e-12);
}

TEST(Gaitplan, SquatKeepsBothFeetDownAndLowersTheComByTheDepth)
{
    const GaitProblem g = build_problem(rh5_model(), default_spec(Motion::SquatWeights));
    for (const auto& k : g.knots)
    {
        EXPECT_FALSE(k.impulse);
        EXPECT_EQ(k.contacts.size(), 2u);
    }
    double lo = INFINITY, hi = -INFINITY;
    for (int i = 0; i <= 1000; ++i)
    {
        const double z = g.com_reference(g.spec.total_time * i / 1000.0).z();
        lo = std::min(lo, z), hi = std::max(hi, z);
    }
    EXPECT_NEAR(hi - lo, 0.2, 1e-9);
    EXPECT_NEAR(g.com_reference(0.0).z(), g.com0.z(), 1e-12);
}

TEST(Gaitplan, WalkingStepsAlternateAndCoverTheLength)
{
    const GaitProblem g = build_problem(rh5_model(), default_spec(Motion::WalkWeights));
    std::vector<std::string> swing_order;
    double left = 0.0, right = 0.0;
    for (const auto& p : g.schedule.phases)
        for (const auto& s : p.swings)
        {
            swing_order.push_back(s.frame);
            (s.frame == rh5::kLeftFoot ? left : right) += s.goal.p.x() - s.start.p.x();
            EXPECT_NEAR(s.apex, 0.05, 0.0);
        }
    ASSERT_EQ(swing_order.size(), 2u);
    EXPECT_NE(swing_order[0], swing_order[1]);
    EXPECT_NEAR(left, 0.5, 1e-12);
    EXPECT_NEAR(right, 0.5, 1e-12);
}

TEST(Gaitplan, ReferencesAreContinuousBetweenKnots)
{
    const RobotModel& m = rh5_model();
    const double v_max = joint_limits(m).velocity.maxCoeff();
    for (const auto& [motion, name] : motion_names())
    {
        const GaitProblem g = build_problem(m, default_spec(motion));
        const double dt = g.spec.knot_dt;
        for (int k = 0; k + 1 < g.spec.knots(); ++k)
        {
            const double t = k * dt;
            EXPECT_LE((g.com_reference(t + dt) - g.com_reference(t)).norm(), 5.0 * v_max * dt) << name;
        }
        for (const auto& p : g.schedule.phases)
            for (const auto& s : p.swings)
            {
                const int n = static_cast<int>(std::llround(p.duration / dt));
                for (int j = 0; j < n; ++j)
                {
                    const SE3 a = swing_reference(s.start, s.goal, s.apex, j / static_cast<double>(n));
                    const SE3 b = swing_reference(s.start, s.goal, s.apex, (j + 1) / static_cast<double>(n));
                    EXPECT_LE((b.p - a.p).norm(), 5.0 * v_max * dt) << name;
                }
            }
    }
}

TEST(Gaitplan, ControlBoundsComeFromEffortLimits)
{
    const GaitProblem g = build_problem(rh5_model(), default_spec(Motion::WalkWeights));
    const VecX lim = g.model->effort_limits();
    for (std::size_t k = 0; k < g.knots.size(); ++k)
    {
        if (g.knots[k].impulse) continue;
        EXPECT_EQ(g.knot(static_cast<int>(k)).u_upper, lim);
        EXPECT_EQ(g.knot(static_cast<int>(k)).u_lower, -lim);
    }
}

TEST(Gaitplan, ComCostOnlyWhenFlagged)
{
    auto has_com = [](const GaitProblem& g)
    {
        for (std::size_t k = 0; k < g.knots.size(); ++k)
            for (const auto& c : g.knot(static_cast<int>(k)).costs)
                if (c.kind == CostKind::ComTracking) return true;
        return false;
    };
    EXPECT_FALSE(has_com(build_problem(rh5_model(), default_spec(Motion::WalkWeights))));
    EXPECT_TRUE(has_com(build_problem(rh5_model(), default_spec(Motion::WalkFast))));
}

TEST(Gaitplan, MissingFrameIsRejected)
{
    RobotModel m = rh5_model();
    for (auto& f : m.frames)
        if (f.name == rh5::kLeftFoot) f.name = "renamed";
    EXPECT_THROW(build_problem(m, default_spec(Motion::Jump1cm)), std::invalid_argument);
}

TEST(Gaitplan, NonIntegralKnotDivisionIsRejected)
{
    ExperimentSpec s = default_spec(Motion::WalkWeights);
    s.total_time = 1.51;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    EXPECT_THROW(build_problem(rh5_model(), s), std::invalid_argument);
}

TEST(SwingReference, EndpointsAreExact)
{
    SE3 a, b;
    a.p = Vec3(0.1, 0.2, 0.0);
    b.p = Vec3(0.4, 0.2, 0.02);
    b.R = so3_exp(Vec3(0, 0, 0.3));
    const SE3 s0 = swing_reference(a, b, 0.05, 0.0), s1 = swing_reference(a, b, 0.05, 1.0);
    EXPECT_EQ(s0.p, a.p);
    EXPECT_EQ(s0.R, a.R);
    EXPECT_EQ(s1.p, b.p);
    EXPECT_EQ(s1.R, b.R);
}

TEST(SwingReference, ApexAtHalfPhase)
{
    SE3 a, b;
    a.p = Vec3(0.0, 0.1, 0.01);
    b.p = Vec3(0.3, 0.1, 0.03);
    EXPECT_NEAR(swing_reference(a, b, 0.05, 0.5).p.z(), 0.03 + 0.05, 1e-15);
    EXPECT_NEAR(swing_reference(a, b, 0.05, 0.5).p.x(), 0.15, 1e-15);
}

TEST(SwingReference, SymmetricAboutHalfPhase)
{
    SE3 a, b;
    b.p = Vec3(0.25, 0.0, 0.0);
    for (double t : {0.1, 0.2, 0.33, 0.45})
        EXPECT_NEAR(swing_reference(a, b, 0.07, t).p.z(), swing_reference(a, b, 0.07, 1.0 - t).p.z(), 1e-15);
}

TEST(SwingReference, RejectsPhaseOutsideUnitInterval)
{
    EXPECT_THROW(swing_reference(SE3{}, SE3{}, 0.1, -0.01), std::invalid_argument);
    EXPECT_THROW(swing_reference(SE3{}, SE3{}, 0.1, 1.01), std::invalid_argument);
}

TEST(WarmStart, WalkingGuessRespectsJointLimits)
{
    const GaitProblem g = build_problem(rh5_model(), default_spec(Motion::WalkWeights));
    const WarmStartGuess w = warm_start(g);
    ASSERT_EQ(static_cast<int>(w.xs.size()), g.problem.horizon() + 1);
    ASSERT_EQ(static_cast<int>(w.us.size()), g.problem.horizon());
    const LimitReport rep = check_limits(*g.model, w.xs, {});
    EXPECT_TRUE(rep.position_ok());
    EXPECT_TRUE(rep.velocity_ok());
}

TEST(WarmStart, ComInterpolatedGuessMovesTheComLinearly)
{
    const GaitProblem g = build_problem(rh5_model(), default_spec(Motion::WalkFast));
    const WarmStartGuess w = warm_start(g);
    const RobotModel& m = *g.model;
    const double x0 = center_of_mass(m, w.xs.front().head(m.nq)).x();
    EXPECT_NEAR(center_of_mass(m, w.xs.back().head(m.nq)).x() - x0, 0.7, 1e-9);
    for (std::size_t k = 0; k < g.knots.size(); ++k)
    {
        const double x = center_of_mass(m, w.xs[k].head(m.nq)).x() - x0;
        EXPECT_NEAR(x, 0.7 * g.knots[k].time / g.spec.total_time, 1e-9) << k;
    }
}

TEST(WarmStart, FlightKnotsGetZeroTorque)
{
    const GaitProblem g = build_problem(rh5_model(), default_spec(Motion::Jump10cm));
    const WarmStartGuess w = warm_start(g);
    for (std::size_t k = 0; k < g.knots.size(); ++k)
        if (g.knots[k].contacts.empty()) EXPECT_TRUE(w.us[k].isZero()) << k;
}

TEST(WarmStart, StandingGuessIsAlreadyOptimalForPosture)
{
    const GaitProblem g = build_problem(rh5_model(), standing_spec());
    const Solution sol = solve_gait(g);
    EXPECT_TRUE(sol.converged());
    EXPECT_LE(sol.iterations, 3);
}

TEST(DesignScaling, SatisfiedLimitGivesFactorOne)
{
    std::vector<ScalingStep> seen;
    const ScalingResult r =
        design_scaling_search(rh5_model(), standing_spec(), "knee", LimitKind::Velocity, {}, [&](const ScalingStep& s) { seen.push_back(s); });
    EXPECT_TRUE(r.found);
    EXPECT_EQ(r.factor, 1.0);
    ASSERT_EQ(r.log.size(), 1u);
    EXPECT_EQ(seen.size(), 1u);
    EXPECT_TRUE(r.log[0].feasible);
    EXPECT_TRUE(r.log[0].violators.empty());
}

TEST(DesignScaling, RejectsBadOptionsAndUnknownJoints)
{
    ScalingOptions bad;
    bad.step = 0.0;
    EXPECT_THROW(design_scaling_search(rh5_model(), standing_spec(), "knee", LimitKind::Velocity, bad), std::invalid_argument);
    EXPECT_THROW(design_scaling_search(rh5_model(), standing_spec(), "tail", LimitKind::Velocity), std::invalid_argument);
}

TEST(DesignScaling, LimitScalesReachTheModel)
{
    ExperimentSpec s = default_spec(Motion::Jump10cm);
    s.limit_scales.push_back({"knee", LimitKind::Velocity, 3.0});
    const GaitProblem g = build_problem(rh5_model(), s);
    const RobotModel& base = rh5_model();
    for (const char* j : {"left_knee", "right_knee"})
        EXPECT_NEAR(g.model->joints[g.model->joint_id(j)].velocity_limit, 3.0 * base.joints[base.joint_id(j)].velocity_limit, 1e-12);
    EXPECT_EQ(g.model->joints[g.model->joint_id("left_hip3")].velocity_limit, base.joints[base.joint_id("left_hip3")].velocity_limit);
}

TEST(ExperimentFile, ShippedFixturesParse)
{
    for (const auto& [motion, name] : motion_names())
    {
        const std::string path = experiment_path(name);
        const ExperimentSpec s = load_experiment(path);
        EXPECT_EQ(s.motion, motion) << name;
        const ExperimentSpec d = default_spec(motion);
        EXPECT_EQ(s.total_time, d.total_time) << name;
        EXPECT_EQ(s.knot_dt, d.knot_dt) << name;
        EXPECT_EQ(s.length, d.length) << name;
        EXPECT_EQ(s.height, d.height) << name;
        EXPECT_EQ(s.payload_kg, d.payload_kg) << name;
        EXPECT_EQ(s.warm_start, d.warm_start) << name;
        if (motion != Motion::JumpObstacles) EXPECT_TRUE(s.flags == d.flags) << name;
    }
}

TEST(ExperimentFile, OverridesDefaults)
{
    const ExperimentSpec s = parse(R"(
[motion]
type = walk_weights
length = 0.4
[timing]
total_time = 1.2
knot_dt = 0.03
[constraints]
cop = false
[weights]
mu = 0.5
[warm_start]
type = com-interpolated
[payload]
mass_per_hand = 2.5
[solver]
max_iters = 42
[limits]
scale = knee:velocity:3, torso_pitch:torque:1.5
)");
    EXPECT_EQ(s.motion, Motion::WalkWeights);
    EXPECT_EQ(s.length, 0.4);
    EXPECT_EQ(s.knots(), 40);
    EXPECT_FALSE(s.flags.cop);
    EXPECT_TRUE(s.flags.friction);
    EXPECT_EQ(s.cone.mu, 0.5);
    EXPECT_EQ(s.warm_start, WarmStart::ComInterpolated);
    EXPECT_EQ(s.payload_kg, 2.5);
    EXPECT_EQ(s.solver.max_iters, 42);
    ASSERT_EQ(s.limit_scales.size(), 2u);
    EXPECT_EQ(s.limit_scales[0].joint, "knee");
    EXPECT_EQ(s.limit_scales[1].kind, LimitKind::Torque);
    EXPECT_EQ(s.limit_scales[1].factor, 1.5);
}

TEST(ExperimentFile, ErrorsCarryTheLineNumber)
{
    const std::string dir = ::testing::TempDir();
    auto line_in_file = [&](const std::string& text)
    {
        const std::string path = dir + "/hddp_exp_error.ini";
        std::ofstream(path) << text;
        try
        {
            load_experiment(path);
        }
        catch (const ParseError& e)
        {
            return e.line();
        }
        return -1;
    };
    EXPECT_EQ(line_in_file("[motion]\ntype = walk_weights\n\n[timing]\nknot_dt = fast\n"), 5);
    EXPECT_EQ(line_in_file("[motion]\ntype = walk_weights\n[weights]\ncop = 1\nbogus = 2\n"), 5);
    EXPECT_EQ(line_in_file("[motion]\ntype = moonwalk\n"), 2);
    EXPECT_EQ(line_in_file("[motion]\ntype = walk_weights\n[gravity]\ng = 9.81\n"), 3);
    EXPECT_EQ(line_in_file("[motion]\ntype = walk_weights\nthis line is broken\n"), 3);
}

TEST(ExperimentFile, RejectsMissingTypeAndNonIntegralDivision)
{
    EXPECT_THROW(parse("[timing]\ntotal_time = 1.0\n"), ParseError);
    EXPECT_THROW(parse("[motion]\ntype = walk_weights\n[timing]\ntotal_time = 1.0\nknot_dt = 0.03\n"), ParseError);
    EXPECT_EQ(line_of_error("[motion]\ntype = walk_weights\n[solver]\nmax_iters = 1.5\n"), 4);
}

TEST(ExperimentFile, LimitScaleSyntax)
{
    const LimitScale a = parse_limit_scale("knee:velocity");
    EXPECT_EQ(a.factor, 1.0);
    EXPECT_EQ(parse_limit_scale("left_knee:vel:2.5").factor, 2.5);
    EXPECT_THROW(parse_limit_scale("knee"), std::invalid_argument);
    EXPECT_THROW(parse_limit_scale("knee:speed:2"), std::invalid_argument);
    EXPECT_THROW(parse_limit_scale("knee:velocity:-1"), std::invalid_argument);
    EXPECT_THROW(parse_limit_scale("knee:velocity:2x"), std::invalid_argument);
}

TEST(ExperimentFile, FixtureDirectoryFollowsTheEnvironment)
{
    const std::string dir = ::testing::TempDir() + "/hddp_fixture_env";
    std::filesystem::create_directories(dir);
    std::ofstream(dir + "/custom") << "[motion]\ntype = jump_1cm\n";
    ::setenv("HDDP_FIXTURES", dir.c_str(), 1);
    EXPECT_EQ(fixtures_dir(), dir);
    EXPECT_EQ(load_experiment(experiment_path("custom")).motion, Motion::Jump1cm);
    ::unsetenv("HDDP_FIXTURES");
    EXPECT_NE(fixtures_dir(), dir);
}
