#pragma once

// Approximate RH5 humanoid as a serialized tree model.
//
// Geometry: hip centres 0.93 m above the sole, 0.22 m apart; thigh 0.41 m,
// shank 0.42 m, ankle axes 0.10 m above the sole; 0.08 x 0.20 m sole;
// body (torso) joint 1.14 m and head joint 1.80 m above the sole; shoulders
// 0.64 m apart, upper/lower arm 0.355/0.386 m.
// Masses: thigh+hip 6.2, shank 2.3, foot 1.3, body joint 4.8, torso 21,
// head 3.3 (lumped into the torso), upper arm 3.6, forearm+gripper 3.3 kg.
// Every link is a solid cylinder of radius 0.06 m along its length.
// Range-valued torque/velocity limits use the lower end of the range.
// Head joints and the wrist are not modelled.

#include <cmath>
#include <string>

#include "hddp/kinematics.hpp"

namespace hddp::rh5
{

inline constexpr double kHipHeight = 0.93;
inline constexpr double kHipSpacing = 0.22;
inline constexpr double kThigh = 0.41;
inline constexpr double kShank = 0.42;
inline constexpr double kAnkleHeight = 0.10;
inline constexpr double kFootLength = 0.20;
inline constexpr double kFootWidth = 0.08;
inline constexpr double kBodyJointHeight = 1.14;
inline constexpr double kHeadJointHeight = 1.80;
inline constexpr double kShoulderHeight = 1.50;  // not published; chosen between body and head joints
inline constexpr double kShoulderSpacing = 0.64;
inline constexpr double kUpperArm = 0.355;
inline constexpr double kForearm = 0.386;
inline constexpr double kLinkRadius = 0.06;

inline constexpr double kHipTilt = 15.0;       // deg, first hip axis
inline constexpr double kShoulderTilt = 14.0;  // deg, first shoulder axis

inline constexpr double kTotalMass = 62.5;

inline double deg(double d) { return d * M_PI / 180.0; }

namespace detail
{
using hddp::detail::fmt17;
using hddp::detail::fmt_list;

/// Solid cylinder along z: (ixx, iyy, izz).
inline std::string cylinder(double mass, double length)
{
    const double r2 = kLinkRadius * kLinkRadius;
    const double it = mass * (3.0 * r2 + length * length) / 12.0;
    const double ia = 0.5 * mass * r2;
    return fmt_list({it, it, ia, 0.0, 0.0, 0.0});
}

inline std::string body(const std::string& name, double mass, double com_z, double length)
{
    return "body " + name + " mass=" + fmt17(mass) + " com=" + fmt_list({0.0, 0.0, com_z}) +
           " inertia=" + cylinder(mass, length) + "\n";
}

inline std::string massless(const std::string& name) { return "body " + name + " mass=0 com=0,0,0 inertia=0,0,0,0,0,0\n"; }

struct Limits
{
    double lo, hi, tau, vel;  // deg, deg, N m, deg/s
};

inline std::string joint(const std::string& name, const std::string& parent, const std::string& child, const Vec3& axis,
                         const Vec3& xyz, const Vec3& rpy, const Limits& l)
{
    return "joint " + name + " type=revolute parent=" + parent + " child=" + child +
           " axis=" + fmt_list({axis.x(), axis.y(), axis.z()}) + " xyz=" + fmt_list({xyz.x(), xyz.y(), xyz.z()}) +
           " rpy=" + fmt_list({rpy.x(), rpy.y(), rpy.z()}) + " limits=" + fmt_list({deg(l.lo), deg(l.hi)}) +
           " vmax=" + fmt17(deg(l.vel)) + " taumax=" + fmt17(l.tau) + "\n";
}

inline std::string frame(const std::string& name, const std::string& body, const Vec3& xyz)
{
    return "frame " + name + " body=" + body + " xyz=" + fmt_list({xyz.x(), xyz.y(), xyz.z()}) + " rpy=0,0,0\n";
}

}  // namespace detail

// Joint range, max torque (lower bound of range), max velocity (lower bound of range).
inline constexpr detail::Limits kShoulder1{-180, 180, 135, 210};
inline constexpr detail::Limits kShoulder2{-110, 110, 167, 131};
inline constexpr detail::Limits kShoulder3{-180, 180, 135, 210};
inline constexpr detail::Limits kElbow{-125, 125, 23, 413};
inline constexpr detail::Limits kTorsoYaw{-40, 40, 23, 413};
inline constexpr detail::Limits kTorsoPitch{-25, 29, 380, 184};
inline constexpr detail::Limits kTorsoRoll{-36, 36, 285, 208};
inline constexpr detail::Limits kHip1{-180, 180, 135, 210};
inline constexpr detail::Limits kHip2{-46, 67, 135, 210};
inline constexpr detail::Limits kHip3{-17, 72, 357, 88};
inline constexpr detail::Limits kKnee{0, 88, 337, 94};
inline constexpr detail::Limits kAnklePitch{-51.5, 45, 121, 200};
inline constexpr detail::Limits kAnkleRoll{-57, 57, 84, 386};

/// Model file text of the fixture. Root frame sits at the midpoint of the hip centres.
inline std::string model_text()
{
    using namespace detail;
    std::string out;
    out += "# Approximate RH5 humanoid (serialized tree). Generated by hddp::rh5::model_text().\n";
    out += "# Units: m, kg, rad, N m.\n";
    // bodies
    const double torso_len = kHeadJointHeight - kBodyJointHeight;
    out += body("pelvis", 4.8, 0.5 * (kBodyJointHeight - kHipHeight), kBodyJointHeight - kHipHeight);
    for (const std::string side : {"left", "right"})
    {
        out += massless(side + "_hip1_link");
        out += massless(side + "_hip2_link");
        out += body(side + "_thigh", 6.2, -0.5 * kThigh, kThigh);
        out += body(side + "_shank", 2.3, -0.5 * kShank, kShank);
        out += massless(side + "_ankle_link");
        out += body(side + "_foot_link", 1.3, -0.5 * kAnkleHeight, kAnkleHeight);
    }
    out += massless("torso_link1");
    out += massless("torso_link2");
    {
        // torso cylinder with the head lumped in as a point mass above the head joint
        Inertia torso{21.0, Vec3(0, 0, 0.5 * torso_len), Mat3::Zero()};
        const double r2 = kLinkRadius * kLinkRadius;
        torso.rot.diagonal() << 21.0 * (3 * r2 + torso_len * torso_len) / 12.0, 21.0 * (3 * r2 + torso_len * torso_len) / 12.0,
            0.5 * 21.0 * r2;
        const Inertia merged = add_point_mass(torso, 3.3, Vec3(0, 0, torso_len + 0.1));
        out += "body torso mass=" + fmt17(merged.mass) + " com=" + fmt_list({0.0, 0.0, merged.com.z()}) +
               " inertia=" + fmt_list({merged.rot(0, 0), merged.rot(1, 1), merged.rot(2, 2), 0.0, 0.0, 0.0}) + "\n";
    }
    for (const std::string side : {"left", "right"})
    {
        out += massless(side + "_shoulder1_link");
        out += massless(side + "_shoulder2_link");
        out += body(side + "_upper_arm", 3.6, -0.5 * kUpperArm, kUpperArm);
        out += body(side + "_forearm", 3.3, -0.5 * kForearm, kForearm);
    }

    // joints
    out += "joint root type=free parent=world child=pelvis\n";
    for (const std::string side : {"left", "right"})
    {
        const double s = side == "left" ? 1.0 : -1.0;
        const Vec3 zero = Vec3::Zero();
        out += joint(side + "_hip1", "pelvis", side + "_hip1_link", Vec3(0, 0, s), Vec3(0, s * 0.5 * kHipSpacing, 0),
                     Vec3(s * deg(kHipTilt), 0, 0), kHip1);
        out += joint(side + "_hip2", side + "_hip1_link", side + "_hip2_link", Vec3(s, 0, 0), zero,
                     Vec3(-s * deg(kHipTilt), 0, 0), kHip2);
        out += joint(side + "_hip3", side + "_hip2_link", side + "_thigh", Vec3(0, -1, 0), zero, zero, kHip3);
        out += joint(side + "_knee", side + "_thigh", side + "_shank", Vec3(0, 1, 0), Vec3(0, 0, -kThigh), zero, kKnee);
        out += joint(side + "_ankle_pitch", side + "_shank", side + "_ankle_link", Vec3(0, -1, 0), Vec3(0, 0, -kShank), zero,
                     kAnklePitch);
        out += joint(side + "_ankle_roll", side + "_ankle_link", side + "_foot_link", Vec3(s, 0, 0), zero, zero, kAnkleRoll);
    }
    const double bj = kBodyJointHeight - kHipHeight;
    out += joint("torso_pitch", "pelvis", "torso_link1", Vec3(0, 1, 0), Vec3(0, 0, bj), Vec3::Zero(), kTorsoPitch);
    out += joint("torso_roll", "torso_link1", "torso_link2", Vec3(1, 0, 0), Vec3::Zero(), Vec3::Zero(), kTorsoRoll);
    out += joint("torso_yaw", "torso_link2", "torso", Vec3(0, 0, 1), Vec3::Zero(), Vec3::Zero(), kTorsoYaw);
    for (const std::string side : {"left", "right"})
    {
        const double s = side == "left" ? 1.0 : -1.0;
        const Vec3 zero = Vec3::Zero();
        out += joint(side + "_shoulder1", "torso", side + "_shoulder1_link", Vec3(0, 1, 0),
                     Vec3(0, s * 0.5 * kShoulderSpacing, kShoulderHeight - kBodyJointHeight), Vec3(0, 0, -s * deg(kShoulderTilt)),
                     kShoulder1);
        out += joint(side + "_shoulder2", side + "_shoulder1_link", side + "_shoulder2_link", Vec3(s, 0, 0), zero,
                     Vec3(0, 0, s * deg(kShoulderTilt)), kShoulder2);
        out += joint(side + "_shoulder3", side + "_shoulder2_link", side + "_upper_arm", Vec3(0, 0, s), zero, zero, kShoulder3);
        out += joint(side + "_elbow", side + "_upper_arm", side + "_forearm", Vec3(0, 1, 0), Vec3(0, 0, -kUpperArm), zero, kElbow);
    }

    // frames
    const double hx = 0.5 * kFootLength, hy = 0.5 * kFootWidth;
    for (const std::string side : {"left", "right"})
    {
        const std::string foot = side + "_foot";
        const std::string link = side + "_foot_link";
        out += frame(foot, link, Vec3(0, 0, -kAnkleHeight));
        out += frame(foot + "_fl", link, Vec3(hx, hy, -kAnkleHeight));
        out += frame(foot + "_fr", link, Vec3(hx, -hy, -kAnkleHeight));
        out += frame(foot + "_rl", link, Vec3(-hx, hy, -kAnkleHeight));
        out += frame(foot + "_rr", link, Vec3(-hx, -hy, -kAnkleHeight));
        out += frame(side + "_hip", side + "_hip1_link", Vec3::Zero());
        out += frame(side + "_knee", side + "_shank", Vec3::Zero());
        out += frame(side + "_ankle", link, Vec3::Zero());
        out += frame(side + "_hand", side + "_forearm", Vec3(0, 0, -kForearm));
    }
    out += frame("torso_frame", "torso", Vec3::Zero());
    return out;
}

inline RobotModel model() { return parse_model_string(model_text(), "rh5"); }

/// Symmetric flat-footed stance: hip flexion theta, knee 2 theta, ankle pitch theta,
/// everything else at zero, base placed so that both soles touch z = 0.
inline State standing_state(const RobotModel& m, double theta = deg(20.0))
{
    VecX q = VecX::Zero(m.nq);
    q[3] = 1.0;
    for (const std::string side : {"left", "right"})
    {
        q[m.joints[m.joint_id(side + "_hip3")].q_index] = theta;
        q[m.joints[m.joint_id(side + "_knee")].q_index] = 2.0 * theta;
        q[m.joints[m.joint_id(side + "_ankle_pitch")].q_index] = theta;
    }
    const auto pl = forward_kinematics(m, q);
    const Vec3 sole = pl.frames[m.frame_id("left_foot")].p;
    q[0] = -sole.x();
    q[2] = -sole.z();
    return {q, VecX::Zero(m.nv)};
}

/// Frame names used by the gait builder.
inline const std::string kLeftFoot = "left_foot";
inline const std::string kRightFoot = "right_foot";
inline const std::vector<std::string> kHands = {"left_hand", "right_hand"};

}  // namespace hddp::rh5
