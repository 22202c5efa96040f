#pragma once

// Spatial algebra on SE(3). Motion vectors are (linear, angular), force
// vectors are (force, torque), both expressed in the frame they belong to.

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "hddp/dual.hpp"

namespace hddp
{

template <typename S>
using Vec3T = Eigen::Matrix<S, 3, 1>;
template <typename S>
using Mat3T = Eigen::Matrix<S, 3, 3>;
template <typename S>
using Vec6T = Eigen::Matrix<S, 6, 1>;
template <typename S>
using VecXT = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline constexpr double kGravity = 9.81;

template <typename S>
Mat3T<S> skew(const Vec3T<S>& w)
{
    Mat3T<S> m;
    m << S(0), -w.z(), w.y(), w.z(), S(0), -w.x(), -w.y(), w.x(), S(0);
    return m;
}

/// Rotation by angle about a unit axis (Rodrigues).
template <typename S>
Mat3T<S> axis_angle(const Vec3& axis, const S& angle)
{
    using std::cos;
    using std::sin;
    const Mat3T<S> k = skew<S>(axis.template cast<S>());
    return Mat3T<S>::Identity() + sin(angle) * k + (S(1) - cos(angle)) * (k * k);
}

/// Rigid transform aMb: maps coordinates in frame b to frame a.
template <typename S>
struct SE3T
{
    Mat3T<S> R = Mat3T<S>::Identity();
    Vec3T<S> p = Vec3T<S>::Zero();

    static SE3T Identity() { return {}; }

    SE3T operator*(const SE3T& o) const { return {R * o.R, R * o.p + p}; }
    SE3T inverse() const { return {R.transpose(), -(R.transpose() * p)}; }
    Vec3T<S> act_point(const Vec3T<S>& x) const { return R * x + p; }

    /// Motion vector expressed in b -> expressed in a.
    Vec6T<S> act_motion(const Vec6T<S>& m) const
    {
        Vec6T<S> out;
        const Vec3T<S> w = R * m.template tail<3>();
        out.template head<3>() = R * m.template head<3>() + p.cross(w);
        out.template tail<3>() = w;
        return out;
    }
    /// Motion vector expressed in a -> expressed in b.
    Vec6T<S> act_inv_motion(const Vec6T<S>& m) const
    {
        Vec6T<S> out;
        const Vec3T<S> w = m.template tail<3>();
        out.template head<3>() = R.transpose() * (m.template head<3>() - p.cross(w));
        out.template tail<3>() = R.transpose() * w;
        return out;
    }
    Vec6T<S> act_force(const Vec6T<S>& f) const
    {
        Vec6T<S> out;
        const Vec3T<S> fa = R * f.template head<3>();
        out.template head<3>() = fa;
        out.template tail<3>() = R * f.template tail<3>() + p.cross(fa);
        return out;
    }
    Vec6T<S> act_inv_force(const Vec6T<S>& f) const
    {
        Vec6T<S> out;
        const Vec3T<S> fa = f.template head<3>();
        out.template head<3>() = R.transpose() * fa;
        out.template tail<3>() = R.transpose() * (f.template tail<3>() - p.cross(fa));
        return out;
    }

    /// 6x6 motion action matrix.
    Eigen::Matrix<S, 6, 6> action() const
    {
        Eigen::Matrix<S, 6, 6> X = Eigen::Matrix<S, 6, 6>::Zero();
        X.template topLeftCorner<3, 3>() = R;
        X.template topRightCorner<3, 3>() = skew<S>(p) * R;
        X.template bottomRightCorner<3, 3>() = R;
        return X;
    }

    template <typename T>
    SE3T<T> cast() const
    {
        return {R.template cast<T>(), p.template cast<T>()};
    }
};

using SE3 = SE3T<double>;

template <typename S>
Vec6T<S> motion_cross_motion(const Vec6T<S>& a, const Vec6T<S>& b)
{
    Vec6T<S> out;
    const Vec3T<S> va = a.template head<3>(), wa = a.template tail<3>();
    const Vec3T<S> vb = b.template head<3>(), wb = b.template tail<3>();
    out.template head<3>() = wa.cross(vb) + va.cross(wb);
    out.template tail<3>() = wa.cross(wb);
    return out;
}

template <typename S>
Vec6T<S> motion_cross_force(const Vec6T<S>& m, const Vec6T<S>& f)
{
    Vec6T<S> out;
    const Vec3T<S> v = m.template head<3>(), w = m.template tail<3>();
    const Vec3T<S> fl = f.template head<3>(), n = f.template tail<3>();
    out.template head<3>() = w.cross(fl);
    out.template tail<3>() = w.cross(n) + v.cross(fl);
    return out;
}

/// Rigid-body inertia about the body origin: mass, centre of mass and
/// rotational inertia about the centre of mass.
struct Inertia
{
    double mass = 0.0;
    Vec3 com = Vec3::Zero();
    Mat3 rot = Mat3::Zero();

    template <typename S>
    Vec6T<S> apply(const Vec6T<S>& m) const
    {
        const Vec3T<S> c = com.template cast<S>();
        const Vec3T<S> v = m.template head<3>(), w = m.template tail<3>();
        Vec6T<S> f;
        const Vec3T<S> lin = S(mass) * (v - c.cross(w));
        f.template head<3>() = lin;
        f.template tail<3>() = rot.template cast<S>() * w + c.cross(lin);
        return f;
    }

    Mat6 matrix() const
    {
        Mat6 I = Mat6::Zero();
        const Mat3 cx = skew<double>(com);
        I.topLeftCorner<3, 3>() = mass * Mat3::Identity();
        I.topRightCorner<3, 3>() = -mass * cx;
        I.bottomLeftCorner<3, 3>() = mass * cx;
        I.bottomRightCorner<3, 3>() = rot - mass * cx * cx;
        return I;
    }

    /// Express an inertia given in frame b in frame a (aMb).
    static Mat6 transform(const SE3& aMb, const Mat6& Ib)
    {
        const Mat6 X = aMb.inverse().action();  // motion a -> b
        return X.transpose() * Ib * X;
    }
};

/// Point mass lumped into an inertia at a body-frame offset.
inline Inertia add_point_mass(const Inertia& in, double m, const Vec3& at)
{
    if (m <= 0.0) return in;
    Inertia out;
    out.mass = in.mass + m;
    out.com = (in.mass * in.com + m * at) / out.mass;
    const Vec3 d1 = in.com - out.com, d2 = at - out.com;
    auto parallel = [](double mass, const Vec3& d) { return mass * (d.squaredNorm() * Mat3::Identity() - d * d.transpose()); };
    out.rot = in.rot + parallel(in.mass, d1) + parallel(m, d2);
    return out;
}

// ---------------------------------------------------------------- SO(3)

inline Mat3 so3_exp(const Vec3& w)
{
    const double th = w.norm();
    if (th < 1e-12) return Mat3::Identity() + skew<double>(w);
    return Eigen::AngleAxisd(th, w / th).toRotationMatrix();
}

inline Vec3 so3_log(const Mat3& R)
{
    const Eigen::AngleAxisd aa(R);
    double th = aa.angle();
    Vec3 ax = aa.axis();
    if (th > M_PI)
    {
        th = 2.0 * M_PI - th;
        ax = -ax;
    }
    return th * ax;
}

/// Right Jacobian of SO(3): exp(w + dw) ~= exp(w) exp(Jr(w) dw).
inline Mat3 so3_right_jacobian(const Vec3& w)
{
    const double th = w.norm();
    const Mat3 W = skew<double>(w);
    if (th < 1e-6) return Mat3::Identity() - 0.5 * W + W * W / 6.0;
    const double th2 = th * th;
    return Mat3::Identity() - (1.0 - std::cos(th)) / th2 * W + (th - std::sin(th)) / (th2 * th) * W * W;
}

inline Mat3 so3_right_jacobian_inv(const Vec3& w)
{
    const double th = w.norm();
    const Mat3 W = skew<double>(w);
    if (th < 1e-6) return Mat3::Identity() + 0.5 * W + W * W / 12.0;
    const double th2 = th * th;
    const double c = 1.0 / th2 - (1.0 + std::cos(th)) / (2.0 * th * std::sin(th));
    return Mat3::Identity() + 0.5 * W + c * W * W;
}

/// Roll-pitch-yaw (fixed axes XYZ): R = Rz(y) Ry(p) Rx(r).
inline Mat3 rpy_matrix(const Vec3& rpy)
{
    return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
            Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
        .toRotationMatrix();
}

/// 6D log of a transform, decoupled: (translation, rotation log).
inline Vec6 log6_decoupled(const SE3& M)
{
    Vec6 r;
    r.head<3>() = M.p;
    r.tail<3>() = so3_log(M.R);
    return r;
}

}  // namespace hddp
