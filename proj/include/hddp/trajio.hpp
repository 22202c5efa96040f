#pragma once

// Trajectory files and their dense interpolation.
//
// A file is UTF-8 CSV. Metadata lines start with '#' and hold key=value
// pairs; then one column-name line and one row per time-grid knot:
//
//   t, q0..q(nq-1), v0..v(nv-1), u0..u(nu-1),
//   <frame>_fx,_fy,_fz,_tx,_ty,_tz per contact frame, contacts
//
// `contacts` is a bit mask over the contact frames (bit i = frame i in
// contact). The final row carries the terminal state only; its control,
// wrench and mask fields are empty. Impulse knots occupy no row: the row at
// a touch-down time holds the post-impact state.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hddp/gaitplan.hpp"
#include "hddp/hash.hpp"
#include "hddp/solver.hpp"
#include "hddp/state.hpp"

namespace hddp
{

/// Hash recorded in trajectory headers: the canonical text of the base model
/// with the hand payload attached.
inline std::string model_hash(const RobotModel& m) { return git_blob_hash(write_model(m)); }

struct TrajectoryFile
{
    std::string model_hash;
    double knot_dt = 0.0;
    double payload_kg = 0.0;
    int nq = 0, nv = 0, nu = 0;
    std::vector<std::string> contact_frames;

    std::vector<double> t;                    // N + 1
    std::vector<VecX> q, v;                   // N + 1
    std::vector<VecX> u;                      // N
    std::vector<std::vector<Vec6>> wrenches;  // N x contact_frames (zero when not in contact)
    std::vector<unsigned> contacts;           // N masks

    int horizon() const { return static_cast<int>(u.size()); }
    double total_time() const { return t.empty() ? 0.0 : t.back() - t.front(); }
    bool in_contact(int k, std::size_t frame) const { return (contacts[k] >> frame) & 1u; }

    State state(int k) const { return {q[k], v[k]}; }
    std::vector<VecX> stacked_states() const
    {
        std::vector<VecX> xs;
        for (std::size_t k = 0; k < q.size(); ++k)
        {
            VecX x(nq + nv);
            x << q[k], v[k];
            xs.push_back(x);
        }
        return xs;
    }

    bool operator==(const TrajectoryFile&) const = default;
};

/// Time-grid trajectory of a solved gait problem. `hash_model` is the model
/// the hash is taken of (base model plus payload).
inline TrajectoryFile make_trajectory(const GaitProblem& g, const Solution& sol, const RobotModel& hash_model)
{
    const int N = g.problem.horizon();
    if (static_cast<int>(sol.xs.size()) != N + 1 || static_cast<int>(sol.us.size()) != N)
        throw DimensionError("make_trajectory: solution does not match the problem");
    const RobotModel& m = *g.model;
    TrajectoryFile f;
    f.model_hash = model_hash(hash_model);
    f.knot_dt = g.spec.knot_dt;
    f.payload_kg = g.spec.payload_kg;
    f.nq = m.nq, f.nv = m.nv, f.nu = m.nu;
    f.contact_frames = g.contact_frames;
    for (int k = 0; k < N; ++k)
    {
        const KnotInfo& info = g.knots[k];
        if (info.impulse) continue;
        f.t.push_back(info.time);
        f.q.push_back(sol.xs[k].head(m.nq));
        f.v.push_back(sol.xs[k].tail(m.nv));
        f.u.push_back(sol.us[k]);
        std::vector<Vec6> w(f.contact_frames.size(), Vec6::Zero());
        unsigned mask = 0;
        for (std::size_t c = 0; c < info.contacts.size(); ++c)
        {
            const auto it = std::find(f.contact_frames.begin(), f.contact_frames.end(), info.contacts[c]);
            const auto i = static_cast<std::size_t>(it - f.contact_frames.begin());
            mask |= 1u << i;
            if (k < static_cast<int>(sol.wrenches.size()) && c < sol.wrenches[k].size()) w[i] = sol.wrenches[k][c];
        }
        f.wrenches.push_back(std::move(w));
        f.contacts.push_back(mask);
    }
    f.t.push_back(g.spec.total_time);
    f.q.push_back(sol.xs[N].head(m.nq));
    f.v.push_back(sol.xs[N].tail(m.nv));
    return f;
}

namespace detail
{
inline std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : s)
    {
        if (c == sep)
        {
            out.push_back(cur);
            cur.clear();
        }
        else
            cur.push_back(c);
    }
    out.push_back(cur);
    return out;
}

inline std::string join(const std::vector<std::string>& xs, char sep)
{
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i)
    {
        if (i) s.push_back(sep);
        s += xs[i];
    }
    return s;
}

inline std::vector<std::string> trajectory_columns(const TrajectoryFile& f)
{
    std::vector<std::string> c{"t"};
    for (int i = 0; i < f.nq; ++i) c.push_back("q" + std::to_string(i));
    for (int i = 0; i < f.nv; ++i) c.push_back("v" + std::to_string(i));
    for (int i = 0; i < f.nu; ++i) c.push_back("u" + std::to_string(i));
    for (const auto& name : f.contact_frames)
        for (const char* a : {"fx", "fy", "fz", "tx", "ty", "tz"}) c.push_back(name + "_" + a);
    c.push_back("contacts");
    return c;
}
}  // namespace detail

/// Byte-stable text: 17 significant digits everywhere.
inline std::string format_trajectory(const TrajectoryFile& f)
{
    using detail::fmt17;
    const int N = f.horizon();
    if (static_cast<int>(f.t.size()) != N + 1 || static_cast<int>(f.q.size()) != N + 1 || static_cast<int>(f.v.size()) != N + 1 ||
        static_cast<int>(f.wrenches.size()) != N || static_cast<int>(f.contacts.size()) != N)
        throw DimensionError("format_trajectory: inconsistent row counts");
    std::string out = "# hddp trajectory 1\n";
    out += "# model_hash=" + f.model_hash + "\n";
    out += "# knot_dt=" + fmt17(f.knot_dt) + "\n";
    out += "# N=" + std::to_string(N) + "\n";
    out += "# nq=" + std::to_string(f.nq) + "\n";
    out += "# nv=" + std::to_string(f.nv) + "\n";
    out += "# nu=" + std::to_string(f.nu) + "\n";
    out += "# contact_frames=" + detail::join(f.contact_frames, ',') + "\n";
    out += "# payload_kg=" + fmt17(f.payload_kg) + "\n";
    out += detail::join(detail::trajectory_columns(f), ',') + "\n";
    const std::size_t nw = 6 * f.contact_frames.size();
    for (int k = 0; k <= N; ++k)
    {
        std::string row = fmt17(f.t[k]);
        for (int i = 0; i < f.nq; ++i) row += ',' + fmt17(f.q[k][i]);
        for (int i = 0; i < f.nv; ++i) row += ',' + fmt17(f.v[k][i]);
        if (k < N)
        {
            for (int i = 0; i < f.nu; ++i) row += ',' + fmt17(f.u[k][i]);
            for (const auto& w : f.wrenches[k])
                for (int i = 0; i < 6; ++i) row += ',' + fmt17(w[i]);
            row += ',' + std::to_string(f.contacts[k]);
        }
        else
            row += std::string(f.nu + nw + 1, ',');
        out += row + "\n";
    }
    return out;
}

inline void write_trajectory(const TrajectoryFile& f, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << format_trajectory(f);
    if (!out) throw std::runtime_error(path + ": write failed");
}

inline TrajectoryFile parse_trajectory(std::istream& in, const std::string& file = "<trajectory>")
{
    TrajectoryFile f;
    std::string line;
    int lineno = 0, N = -1;
    bool have_columns = false;
    auto number = [&](const std::string& s) -> double
    {
        char* end = nullptr;
        const double x = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size()) throw ParseError(file, lineno, "'" + s + "' is not a number");
        return x;
    };
    auto integer = [&](const std::string& s) -> long
    {
        char* end = nullptr;
        const long x = std::strtol(s.c_str(), &end, 10);
        if (s.empty() || end != s.c_str() + s.size() || x < 0) throw ParseError(file, lineno, "'" + s + "' is not a count");
        return x;
    };
    bool seen_magic = false;
    while (std::getline(in, line))
    {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#')
        {
            if (have_columns) throw ParseError(file, lineno, "metadata after the column line");
            std::string body = line.substr(1);
            if (!body.empty() && body[0] == ' ') body.erase(0, 1);
            if (!seen_magic)
            {
                if (body != "hddp trajectory 1") throw ParseError(file, lineno, "not a trajectory file (missing '# hddp trajectory 1')");
                seen_magic = true;
                continue;
            }
            const auto eq = body.find('=');
            if (eq == std::string::npos) throw ParseError(file, lineno, "expected key=value");
            const std::string key = body.substr(0, eq), val = body.substr(eq + 1);
            if (key == "model_hash")
                f.model_hash = val;
            else if (key == "knot_dt")
                f.knot_dt = number(val);
            else if (key == "N")
                N = static_cast<int>(integer(val));
            else if (key == "nq")
                f.nq = static_cast<int>(integer(val));
            else if (key == "nv")
                f.nv = static_cast<int>(integer(val));
            else if (key == "nu")
                f.nu = static_cast<int>(integer(val));
            else if (key == "contact_frames")
                f.contact_frames = val.empty() ? std::vector<std::string>{} : detail::split(val, ',');
            else if (key == "payload_kg")
                f.payload_kg = number(val);
            else
                throw ParseError(file, lineno, "unknown metadata key '" + key + "'");
            continue;
        }
        if (!seen_magic) throw ParseError(file, lineno, "not a trajectory file (missing '# hddp trajectory 1')");
        if (!have_columns)
        {
            if (N < 0) throw ParseError(file, lineno, "metadata lacks N");
            if (f.contact_frames.size() > 32) throw ParseError(file, lineno, "more than 32 contact frames");
            if (line != detail::join(detail::trajectory_columns(f), ','))
                throw ParseError(file, lineno, "column line does not match the metadata");
            have_columns = true;
            continue;
        }
        const auto cells = detail::split(line, ',');
        const std::size_t nw = 6 * f.contact_frames.size();
        const std::size_t width = 1 + f.nq + f.nv + f.nu + nw + 1;
        if (cells.size() != width)
            throw ParseError(file, lineno, "row has " + std::to_string(cells.size()) + " fields, expected " + std::to_string(width));
        const int k = static_cast<int>(f.t.size());
        if (k > N) throw ParseError(file, lineno, "more rows than N + 1");
        std::size_t c = 0;
        f.t.push_back(number(cells[c++]));
        if (k > 0 && !(f.t[k] > f.t[k - 1])) throw ParseError(file, lineno, "times are not strictly increasing");
        VecX q(f.nq), v(f.nv);
        for (int i = 0; i < f.nq; ++i) q[i] = number(cells[c++]);
        for (int i = 0; i < f.nv; ++i) v[i] = number(cells[c++]);
        f.q.push_back(q);
        f.v.push_back(v);
        if (k < N)
        {
            VecX u(f.nu);
            for (int i = 0; i < f.nu; ++i) u[i] = number(cells[c++]);
            std::vector<Vec6> w(f.contact_frames.size());
            for (auto& wi : w)
                for (int i = 0; i < 6; ++i) wi[i] = number(cells[c++]);
            f.u.push_back(u);
            f.wrenches.push_back(std::move(w));
            f.contacts.push_back(static_cast<unsigned>(integer(cells[c++])));
        }
        else
            for (; c < cells.size(); ++c)
                if (!cells[c].empty()) throw ParseError(file, lineno, "final row must leave control, wrench and contact fields empty");
    }
    if (!have_columns) throw ParseError(file, lineno, "no column line");
    if (static_cast<int>(f.t.size()) != N + 1)
        throw ParseError(file, lineno, "expected " + std::to_string(N + 1) + " state rows, found " + std::to_string(f.t.size()));
    return f;
}

inline TrajectoryFile read_trajectory(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path, 0, "cannot open trajectory file");
    return parse_trajectory(in, path);
}

/// Throws HashMismatchError unless the trajectory was made for `m`.
inline void check_model_hash(const TrajectoryFile& f, const RobotModel& m)
{
    const std::string h = model_hash(m);
    if (h != f.model_hash) throw HashMismatchError(f.model_hash, h);
    if (m.nq != f.nq || m.nv != f.nv || m.nu != f.nu) throw DimensionError("trajectory dimensions differ from the model");
}

// ---------------------------------------------------------------------------
// Interpolation

/// How controls are filled in between knots.
enum class ControlInterpolation
{
    Linear,        // u_k to u_{k+1} across each interval, u_{N-1} held over the last
    ZeroOrderHold  // u_k over [t_k, t_{k+1}), as applied by the planner
};

inline std::string to_string(ControlInterpolation c) { return c == ControlInterpolation::Linear ? "linear" : "zoh"; }

struct InterpolatedTrajectory
{
    double rate = 1000.0;
    std::vector<double> t;
    std::vector<VecX> q, v, u;
    std::vector<unsigned> contacts;
    std::vector<int> knot_index;  // sample index of each knot time

    std::size_t size() const { return t.size(); }
    State state(std::size_t i) const { return {q[i], v[i]}; }
};

/// Cubic Hermite basis on [0, 1]: p(s) = h00 p0 + h10 m0 + h01 p1 + h11 m1.
struct HermiteBasis
{
    double h00, h10, h01, h11;     // values
    double d00, d10, d01, d11;     // d/ds
};

inline HermiteBasis hermite_basis(double s)
{
    const double s2 = s * s, s3 = s2 * s;
    return {2 * s3 - 3 * s2 + 1, s3 - 2 * s2 + s, -2 * s3 + 3 * s2, s3 - s2,
            6 * s2 - 6 * s, 3 * s2 - 4 * s + 1, -6 * s2 + 6 * s, 3 * s2 - 2 * s};
}

namespace detail
{
/// Sample on segment j at local parameter s in [0, 1].
inline void hermite_sample(const TrajectoryFile& f, int j, double s, VecX& q, VecX& v)
{
    const double h = f.t[j + 1] - f.t[j];
    const HermiteBasis b = hermite_basis(s);
    const VecX &q0 = f.q[j], &q1 = f.q[j + 1], &v0 = f.v[j], &v1 = f.v[j + 1];
    q.resize(f.nq);
    v.resize(f.nv);
    const bool floating = f.nq == f.nv + 1 && f.nq >= 7;
    const int jq = floating ? 7 : 0, jv = floating ? 6 : 0;
    for (int i = 0; i < f.nq - jq; ++i)
    {
        const double p0 = q0[jq + i], p1 = q1[jq + i], m0 = h * v0[jv + i], m1 = h * v1[jv + i];
        q[jq + i] = p0 + b.h01 * (p1 - p0) + b.h10 * m0 + b.h11 * m1;
        v[jv + i] = (b.d01 * (p1 - p0) + b.d10 * m0 + b.d11 * m1) / h;
    }
    if (!floating) return;
    const Eigen::Quaterniond qa(q0[3], q0[4], q0[5], q0[6]), qb(q1[3], q1[4], q1[5], q1[6]);
    const Mat3 Ra = qa.normalized().toRotationMatrix(), Rb = qb.normalized().toRotationMatrix();
    // position: world-frame Hermite, tangents from base-frame linear velocity
    const Vec3 pa = q0.head<3>(), pb = q1.head<3>();
    const Vec3 ma = h * (Ra * v0.head<3>()), mb = h * (Rb * v1.head<3>());
    const Vec3 p = pa + b.h01 * (pb - pa) + b.h10 * ma + b.h11 * mb;
    const Vec3 pdot = (b.d01 * (pb - pa) + b.d10 * ma + b.d11 * mb) / h;
    // orientation: R(s) = Ra exp(r(s)) with r a Hermite curve in the tangent at Ra
    const Vec3 phi = so3_log(Ra.transpose() * Rb);
    const Vec3 ra = h * v0.segment<3>(3), rb = h * (so3_right_jacobian_inv(phi) * v1.segment<3>(3));
    const Vec3 r = b.h10 * ra + b.h01 * phi + b.h11 * rb;
    const Vec3 rdot = (b.d10 * ra + b.d01 * phi + b.d11 * rb) / h;
    const Mat3 R = Ra * so3_exp(r);
    Eigen::Quaterniond quat(R);
    quat.normalize();
    if (quat.coeffs().dot(qa.coeffs()) < 0.0) quat.coeffs() *= -1.0;
    q.head<3>() = p;
    q[3] = quat.w(), q[4] = quat.x(), q[5] = quat.y(), q[6] = quat.z();
    v.head<3>() = R.transpose() * pdot;
    v.segment<3>(3) = so3_right_jacobian(r) * rdot;
}
}  // namespace detail

/// Dense samples at `rate` Hz. Positions and velocities follow a clamped
/// cubic Hermite spline through the knot states; controls follow `controls`.
/// Samples at knot times return the
/// knot values exactly.
inline InterpolatedTrajectory interpolate(const TrajectoryFile& f, double rate = 1000.0,
                                          ControlInterpolation controls = ControlInterpolation::Linear)
{
    if (f.t.size() < 2) throw std::invalid_argument("interpolate: need at least two knots");
    if (!(rate > 0.0)) throw std::invalid_argument("interpolate: rate must be > 0");
    const double T = f.total_time();
    if (!(T > 0.0)) throw std::invalid_argument("interpolate: degenerate horizon");
    const long n = std::lround(T * rate);
    if (n < 1) throw std::invalid_argument("interpolate: horizon shorter than one sample");
    InterpolatedTrajectory out;
    out.rate = rate;
    const int N = f.horizon();
    int j = 0;
    for (long i = 0; i <= n; ++i)
    {
        const double t = i == n ? f.t.back() : f.t.front() + static_cast<double>(i) / rate;
        while (j < N - 1 && t >= f.t[j + 1] - 1e-9) ++j;
        const double h = f.t[j + 1] - f.t[j];
        double s = (t - f.t[j]) / h;
        VecX q, v;
        if (std::abs(t - f.t[j]) < 1e-9)
        {
            q = f.q[j], v = f.v[j], s = 0.0;
            out.knot_index.push_back(static_cast<int>(i));
        }
        else if (std::abs(t - f.t[j + 1]) < 1e-9)
        {
            q = f.q[j + 1], v = f.v[j + 1], s = 1.0;
            if (j + 1 == N) out.knot_index.push_back(static_cast<int>(i));
        }
        else
            detail::hermite_sample(f, j, std::clamp(s, 0.0, 1.0), q, v);
        const VecX u = controls == ControlInterpolation::Linear && j + 1 < N ? VecX(f.u[j] + s * (f.u[j + 1] - f.u[j])) : f.u[j];
        out.t.push_back(t);
        out.q.push_back(std::move(q));
        out.v.push_back(std::move(v));
        out.u.push_back(u);
        out.contacts.push_back(f.contacts[j]);
    }
    return out;
}

/// Dense samples as CSV: t, q, v, u, contacts.
inline std::string format_samples(const InterpolatedTrajectory& s)
{
    using detail::fmt17;
    std::string out = "t";
    const Eigen::Index nq = s.q.empty() ? 0 : s.q[0].size(), nv = s.v.empty() ? 0 : s.v[0].size(), nu = s.u.empty() ? 0 : s.u[0].size();
    for (Eigen::Index i = 0; i < nq; ++i) out += ",q" + std::to_string(i);
    for (Eigen::Index i = 0; i < nv; ++i) out += ",v" + std::to_string(i);
    for (Eigen::Index i = 0; i < nu; ++i) out += ",u" + std::to_string(i);
    out += ",contacts\n";
    for (std::size_t k = 0; k < s.size(); ++k)
    {
        out += fmt17(s.t[k]);
        for (Eigen::Index i = 0; i < nq; ++i) out += ',' + fmt17(s.q[k][i]);
        for (Eigen::Index i = 0; i < nv; ++i) out += ',' + fmt17(s.v[k][i]);
        for (Eigen::Index i = 0; i < nu; ++i) out += ',' + fmt17(s.u[k][i]);
        out += ',' + std::to_string(s.contacts[k]) + '\n';
    }
    return out;
}

}  // namespace hddp
