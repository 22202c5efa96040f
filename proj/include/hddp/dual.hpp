#pragma once

// Forward-mode dual number (one tangent direction). Used to differentiate the
// templated rigid-body recursions exactly, one input direction per pass.

#include <cmath>
#include <ostream>

#include <Eigen/Core>

namespace hddp
{

struct Dual
{
    double v = 0.0;  // value
    double d = 0.0;  // derivative

    constexpr Dual() = default;
    constexpr Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)
    constexpr Dual(double value, double deriv) : v(value), d(deriv) {}

    Dual& operator+=(const Dual& o)
    {
        v += o.v;
        d += o.d;
        return *this;
    }
    Dual& operator-=(const Dual& o)
    {
        v -= o.v;
        d -= o.d;
        return *this;
    }
    Dual& operator*=(const Dual& o)
    {
        d = d * o.v + v * o.d;
        v *= o.v;
        return *this;
    }
    Dual& operator/=(const Dual& o)
    {
        d = (d * o.v - v * o.d) / (o.v * o.v);
        v /= o.v;
        return *this;
    }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
inline Dual operator+(const Dual& a) { return a; }

inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
inline bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
inline bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }
inline bool operator==(const Dual& a, const Dual& b) { return a.v == b.v && a.d == b.d; }
inline bool operator!=(const Dual& a, const Dual& b) { return !(a == b); }

inline Dual sin(const Dual& a) { return {std::sin(a.v), a.d * std::cos(a.v)}; }
inline Dual cos(const Dual& a) { return {std::cos(a.v), -a.d * std::sin(a.v)}; }
inline Dual sqrt(const Dual& a)
{
    const double s = std::sqrt(a.v);
    return {s, s > 0.0 ? a.d / (2.0 * s) : 0.0};
}
inline Dual abs(const Dual& a) { return a.v < 0.0 ? -a : a; }
inline Dual exp(const Dual& a)
{
    const double e = std::exp(a.v);
    return {e, a.d * e};
}
inline Dual atan2(const Dual& y, const Dual& x)
{
    const double r2 = x.v * x.v + y.v * y.v;
    return {std::atan2(y.v, x.v), (x.v * y.d - y.v * x.d) / r2};
}
inline bool isfinite(const Dual& a) { return std::isfinite(a.v) && std::isfinite(a.d); }

inline std::ostream& operator<<(std::ostream& os, const Dual& a) { return os << a.v << "+" << a.d << "e"; }

/// Value part, overloaded so templated code can extract a double from either scalar type.
inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }
inline double deriv_of(double) { return 0.0; }
inline double deriv_of(const Dual& x) { return x.d; }

}  // namespace hddp

namespace Eigen
{
template <>
struct NumTraits<hddp::Dual> : NumTraits<double>
{
    using Real = hddp::Dual;
    using NonInteger = hddp::Dual;
    using Nested = hddp::Dual;
    using Literal = hddp::Dual;
    enum
    {
        IsComplex = 0,
        IsInteger = 0,
        IsSigned = 1,
        RequireInitialization = 1,
        ReadCost = 2,
        AddCost = 2,
        MulCost = 3
    };
};
}  // namespace Eigen
