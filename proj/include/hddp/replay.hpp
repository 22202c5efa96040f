#pragma once

// Closed-loop replay of an interpolated trajectory: joint-space PD control
// with feedforward torques, an unactuated floating base and a rigid ground
// plane handled by the same KKT contact dynamics as the planner.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hddp/dynamics.hpp"
#include "hddp/kinematics.hpp"
#include "hddp/trajio.hpp"

namespace hddp
{

struct PdGains
{
    VecX kp, kd;  // per actuated joint (nu)
    bool feedforward = true;

    void validate(int nu) const
    {
        if (kp.size() != nu || kd.size() != nu) throw DimensionError("PdGains: kp and kd must have nu entries");
        if ((kp.array() < 0.0).any() || (kd.array() < 0.0).any()) throw std::invalid_argument("PdGains: gains must be >= 0");
    }
};

/// kp on every joint and kd = 2 sqrt(kp M_ii), with M_ii the joint diagonal
/// of the mass matrix at `q`.
inline PdGains default_gains(const RobotModel& m, const VecX& q, double kp = 300.0, bool feedforward = true)
{
    const MatX M = mass_matrix(m, q);
    PdGains g;
    g.kp = VecX::Constant(m.nu, kp);
    g.kd = VecX::Zero(m.nu);
    g.feedforward = feedforward;
    for (const auto& j : m.joints)
        if (j.u_index >= 0) g.kd[j.u_index] = 2.0 * std::sqrt(kp * M(j.v_index, j.v_index));
    return g;
}

struct GroundPlane
{
    double height = 0.0;
};

/// Per-foot contact state with a hysteresis band. A foot becomes active when
/// its sole reaches the ground while descending, provided it has been above
/// the band since its last activation; sinking below the band re-arms it.
/// An active foot is released when its normal force turns negative, or when
/// the schedule says swing and the force is not positive.
class ContactEventDetector
{
   public:
    ContactEventDetector() = default;
    ContactEventDetector(std::vector<int> frames, double band = 0.002) : frames_(std::move(frames)), band_(band)
    {
        active_.assign(frames_.size(), false);
        armed_.assign(frames_.size(), true);
        activations_.assign(frames_.size(), 0);
    }

    /// Geometric update. Returns the indices of newly activated feet.
    std::vector<std::size_t> update(const std::vector<double>& height, const std::vector<double>& vz)
    {
        std::vector<std::size_t> fresh;
        for (std::size_t i = 0; i < frames_.size(); ++i)
        {
            if (height[i] >= band_ || height[i] <= -band_) armed_[i] = true;
            if (!active_[i] && armed_[i] && height[i] <= 0.0 && vz[i] < 0.0)
            {
                active_[i] = true;
                armed_[i] = false;
                ++activations_[i];
                fresh.push_back(i);
            }
        }
        return fresh;
    }

    /// Force-based release. Returns true if any foot was released.
    bool release(const std::vector<double>& normal_force, const std::vector<bool>& scheduled)
    {
        bool any = false;
        for (std::size_t i = 0; i < frames_.size(); ++i)
            if (active_[i] && (normal_force[i] < 0.0 || (!scheduled[i] && normal_force[i] <= 0.0)))
            {
                active_[i] = false;
                any = true;
            }
        return any;
    }

    void set_active(std::size_t i, bool on)
    {
        active_[i] = on;
        if (on) armed_[i] = false;
    }
    bool active(std::size_t i) const { return active_[i]; }
    int activations(std::size_t i) const { return activations_[i]; }
    const std::vector<int>& frames() const { return frames_; }
    double band() const { return band_; }

   private:
    std::vector<int> frames_;
    double band_ = 0.002;
    std::vector<bool> active_, armed_;
    std::vector<int> activations_;
};

/// Stateless geometric test: frame active when at or below the ground and descending.
inline ContactSet touching_contacts(const RobotModel& m, const State& s, const std::vector<int>& frames, const GroundPlane& ground)
{
    const Placements pl = forward_kinematics(m, s.q);
    ContactSet out;
    for (const int f : frames)
    {
        const double h = pl.frames[f].p.z() - ground.height;
        const double vz = frame_jacobian(m, s.q, f, ReferenceFrame::LocalWorldAligned).row(2).dot(s.v);
        if (h <= 0.0 && vz < 0.0) out.push_back({f, pl.frames[f]});
    }
    return out;
}

struct ReplayOptions
{
    int substeps = 4;                 // physics steps per control tick
    double fall_threshold = 0.3;      // base height drop below plan, m
    double hysteresis = 0.002;        // m
    ContactOptions stabilization{10.0, 100.0};
    GroundPlane ground;
};

struct ReplayStep
{
    double t = 0.0;
    Vec3 base = Vec3::Zero(), planned_base = Vec3::Zero();
    double joint_error_rms = 0.0;
    std::vector<Vec6> wrenches;  // per contact frame, contact frame coordinates (zero when inactive)
    unsigned contacts = 0;
};

struct ReplayReport
{
    Vec3 base_deviation = Vec3::Zero();  // per-axis max |actual - planned|
    double joint_tracking_rms = 0.0;     // over the whole replay
    bool fell = false;
    int fell_step = -1;
    int steps = 0;
    std::vector<std::string> contact_frames;
    std::vector<ReplayStep> log;
    State final_state;

    bool operator==(const ReplayReport& o) const
    {
        if (base_deviation != o.base_deviation || joint_tracking_rms != o.joint_tracking_rms || fell != o.fell || fell_step != o.fell_step ||
            steps != o.steps || contact_frames != o.contact_frames || log.size() != o.log.size())
            return false;
        for (std::size_t i = 0; i < log.size(); ++i)
        {
            const ReplayStep &a = log[i], &b = o.log[i];
            if (a.t != b.t || a.base != b.base || a.planned_base != b.planned_base || a.joint_error_rms != b.joint_error_rms ||
                a.wrenches != b.wrenches || a.contacts != b.contacts)
                return false;
        }
        return true;
    }
};

struct ReplayThresholds
{
    double xy = 0.03, z = 0.02;
    bool passes(const ReplayReport& r) const
    {
        return !r.fell && r.base_deviation.x() <= xy && r.base_deviation.y() <= xy && r.base_deviation.z() <= z;
    }
};

namespace detail
{
inline VecX pd_torque(const RobotModel& m, const PdGains& g, const State& s, const VecX& q_ref, const VecX& v_ref, const VecX& u_ref)
{
    VecX tau = g.feedforward ? u_ref : VecX::Zero(m.nu);
    for (const auto& j : m.joints)
    {
        if (j.u_index < 0) continue;
        const int i = j.u_index;
        tau[i] += g.kp[i] * (q_ref[j.q_index] - s.q[j.q_index]) + g.kd[i] * (v_ref[j.v_index] - s.v[j.v_index]);
        tau[i] = std::clamp(tau[i], -j.effort_limit, j.effort_limit);
    }
    return tau;
}
}  // namespace detail

/// Integrate the robot under PD tracking of `plan`. The plan's contact
/// masks refer to `frame_names`. Each control tick holds its reference
/// sample while the PD law is re-evaluated at every physics substep.
/// Touch-downs anchor the sole flat on the ground at the landing point.
/// Deterministic for identical inputs.
inline ReplayReport replay(const RobotModel& m, const InterpolatedTrajectory& plan, const std::vector<std::string>& frame_names,
                           const PdGains& gains, const ReplayOptions& opt = {})
{
    gains.validate(m.nu);
    if (plan.size() < 2) throw std::invalid_argument("replay: trajectory has fewer than two samples");
    if (opt.substeps < 1) throw std::invalid_argument("replay: substeps must be >= 1");
    std::vector<int> frames;
    for (const auto& n : frame_names) frames.push_back(m.frame_id(n));
    const std::size_t nc = frames.size();

    ReplayReport rep;
    rep.contact_frames = frame_names;
    ContactEventDetector det(frames, opt.hysteresis);
    State s = plan.state(0);
    const double tick = 1.0 / plan.rate, h = tick / opt.substeps;

    std::vector<SE3> anchor(nc);
    {
        const Placements pl = forward_kinematics(m, s.q);
        for (std::size_t i = 0; i < nc; ++i)
            if ((plan.contacts[0] >> i) & 1u)
            {
                det.set_active(i, true);
                anchor[i] = pl.frames[frames[i]];
            }
    }
    auto active_set = [&]()
    {
        ContactSet c;
        for (std::size_t i = 0; i < nc; ++i)
            if (det.active(i)) c.push_back({frames[i], anchor[i]});
        return c;
    };

    double sq_sum = 0.0;
    long sq_count = 0;
    const int nj = m.nu;
    for (std::size_t step = 0; step + 1 < plan.size(); ++step)
    {
        std::vector<bool> scheduled(nc);
        for (std::size_t i = 0; i < nc; ++i) scheduled[i] = (plan.contacts[step] >> i) & 1u;
        std::vector<Vec6> wrench(nc, Vec6::Zero());
        bool finite = true;
        for (int sub = 0; sub < opt.substeps && finite; ++sub)
        {
            const VecX tau = detail::pd_torque(m, gains, s, plan.q[step], plan.v[step], plan.u[step]);
            // contact dynamics, dropping feet whose force turns negative
            ContactDynamicsResult res;
            for (std::size_t guard = 0; guard <= nc; ++guard)
            {
                res = contact_forward_dynamics(m, s, active_set(), tau, opt.stabilization);
                std::vector<double> fz(nc, 0.0);
                for (std::size_t i = 0, a = 0; i < nc; ++i)
                    if (det.active(i)) fz[i] = res.wrenches[a++][2];
                if (!det.release(fz, scheduled)) break;
            }
            std::fill(wrench.begin(), wrench.end(), Vec6::Zero());
            for (std::size_t i = 0, a = 0; i < nc; ++i)
                if (det.active(i)) wrench[i] = res.wrenches[a++];
            s = integrate_state(s, res.vdot, h);
            // touch-downs: zero-restitution impact on the new contact set
            const Kinematics k = forward_kinematics_data(m, s.q);
            const MatX Sw = world_subspaces(m, k);
            std::vector<double> height(nc), vz(nc);
            for (std::size_t i = 0; i < nc; ++i)
            {
                height[i] = frame_placement<double>(m, k, frames[i]).p.z() - opt.ground.height;
                vz[i] = frame_jacobian(m, k, Sw, frames[i], ReferenceFrame::LocalWorldAligned).row(2).dot(s.v);
            }
            const auto fresh = det.update(height, vz);
            if (!fresh.empty())
            {
                for (const std::size_t i : fresh)
                {
                    anchor[i] = frame_placement<double>(m, k, frames[i]);
                    anchor[i].p.z() = opt.ground.height;
                    // sole lies flat on the plane, heading kept
                    const double yaw = std::atan2(anchor[i].R(1, 0), anchor[i].R(0, 0));
                    anchor[i].R = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
                }
                s.v = impulse_dynamics(m, s, active_set()).v_plus;
            }
            finite = s.q.allFinite() && s.v.allFinite();
        }

        const std::size_t next = step + 1;
        ReplayStep L;
        L.t = plan.t[next];
        L.base = s.q.head<3>();
        L.planned_base = plan.q[next].head<3>();
        L.wrenches = wrench;
        for (std::size_t i = 0; i < nc; ++i)
            if (det.active(i)) L.contacts |= 1u << i;
        double e2 = 0.0;
        for (int i = 7; i < m.nq; ++i) e2 += std::pow(s.q[i] - plan.q[next][i], 2);
        L.joint_error_rms = nj > 0 ? std::sqrt(e2 / nj) : 0.0;
        sq_sum += e2;
        sq_count += nj;
        rep.steps = static_cast<int>(next);
        if (!finite || L.base.z() < L.planned_base.z() - opt.fall_threshold)
        {
            rep.fell = true;
            rep.fell_step = static_cast<int>(next);
            if (finite) rep.log.push_back(L);
            break;
        }
        rep.base_deviation = rep.base_deviation.cwiseMax((L.base - L.planned_base).cwiseAbs());
        rep.log.push_back(std::move(L));
    }
    rep.joint_tracking_rms = sq_count ? std::sqrt(sq_sum / sq_count) : 0.0;
    rep.final_state = s;
    return rep;
}

/// Tidy per-step CSV: time, base and planned base, deviation, joint error,
/// per-frame contact flag and wrench.
inline std::string format_replay_csv(const ReplayReport& r)
{
    using detail::fmt17;
    std::string out = "t,base_x,base_y,base_z,plan_x,plan_y,plan_z,dev_x,dev_y,dev_z,joint_error_rms";
    for (const auto& f : r.contact_frames)
    {
        out += "," + f + "_active";
        for (const char* a : {"fx", "fy", "fz", "tx", "ty", "tz"}) out += "," + f + "_" + a;
    }
    out += "\n";
    for (const auto& L : r.log)
    {
        out += fmt17(L.t);
        for (int i = 0; i < 3; ++i) out += "," + fmt17(L.base[i]);
        for (int i = 0; i < 3; ++i) out += "," + fmt17(L.planned_base[i]);
        for (int i = 0; i < 3; ++i) out += "," + fmt17(L.base[i] - L.planned_base[i]);
        out += "," + fmt17(L.joint_error_rms);
        for (std::size_t c = 0; c < r.contact_frames.size(); ++c)
        {
            out += std::string(",") + (((L.contacts >> c) & 1u) ? "1" : "0");
            for (int i = 0; i < 6; ++i) out += "," + fmt17(L.wrenches[c][i]);
        }
        out += "\n";
    }
    return out;
}

}  // namespace hddp
