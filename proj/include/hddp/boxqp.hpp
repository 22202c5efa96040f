#pragma once

// Box-constrained quadratic program
//   min 1/2 x^T H x + q^T x   s.t.  lb <= x <= ub
// by projected Newton: Newton steps on the free subspace, a projected
// Armijo line search, and the clamped set recomputed every iteration.

#include <Eigen/Cholesky>
#include <vector>

#include "hddp/errors.hpp"
#include "hddp/spatial.hpp"

namespace hddp
{

struct BoxQpOptions
{
    int max_iters = 25;
    double tol = 1e-9;  // projected-gradient infinity norm
    double armijo = 0.1;
    double step_factor = 0.6;
    double min_step = 1e-22;
};

struct BoxQpResult
{
    VecX x;
    std::vector<bool> free;  // per coordinate, after the last iteration
    MatX Hff_inv;            // inverse of H on the free block (free-ordered)
    int iterations = 0;
    bool ok = false;  // false when the free block is not positive definite
};

inline double boxqp_value(const MatX& H, const VecX& q, const VecX& x) { return 0.5 * x.dot(H * x) + q.dot(x); }

inline VecX clamp_box(const VecX& x, const VecX& lb, const VecX& ub) { return x.cwiseMax(lb).cwiseMin(ub); }

inline BoxQpResult boxqp(const MatX& H, const VecX& q, const VecX& lb, const VecX& ub, const VecX& x0, const BoxQpOptions& opt = {})
{
    const Eigen::Index n = q.size();
    if (H.rows() != n || H.cols() != n || lb.size() != n || ub.size() != n || x0.size() != n)
        throw DimensionError("boxqp: dimension mismatch");
    BoxQpResult r;
    r.x = clamp_box(x0, lb, ub);
    r.free.assign(n, true);
    if (n == 0)
    {
        r.ok = true;
        return r;
    }

    std::vector<Eigen::Index> idx;
    MatX Hff;
    Eigen::LLT<MatX> llt;
    auto factor_free = [&]()
    {
        idx.clear();
        for (Eigen::Index i = 0; i < n; ++i)
            if (r.free[i]) idx.push_back(i);
        const auto nf = static_cast<Eigen::Index>(idx.size());
        Hff.resize(nf, nf);
        for (Eigen::Index a = 0; a < nf; ++a)
            for (Eigen::Index b = 0; b < nf; ++b) Hff(a, b) = H(idx[a], idx[b]);
        if (nf == 0) return true;
        llt.compute(Hff);
        return llt.info() == Eigen::Success;
    };
    auto update_free = [&](const VecX& g)
    {
        for (Eigen::Index i = 0; i < n; ++i)
            r.free[i] = !((r.x[i] <= lb[i] && g[i] > 0.0) || (r.x[i] >= ub[i] && g[i] < 0.0));
    };

    double value = boxqp_value(H, q, r.x);
    for (r.iterations = 0; r.iterations < opt.max_iters; ++r.iterations)
    {
        const VecX g = q + H * r.x;
        update_free(g);
        if (!factor_free()) return r;
        const auto nf = static_cast<Eigen::Index>(idx.size());
        if (nf == 0) break;
        double gnorm = 0.0;
        for (auto i : idx) gnorm = std::max(gnorm, std::abs(g[i]));
        if (gnorm < opt.tol) break;

        // Newton step on the free block with clamped coordinates held fixed.
        VecX gf(nf), xf(nf);
        for (Eigen::Index a = 0; a < nf; ++a)
        {
            gf[a] = g[idx[a]];
            xf[a] = r.x[idx[a]];
        }
        const VecX stepf = -llt.solve(gf);
        VecX dx = VecX::Zero(n);
        for (Eigen::Index a = 0; a < nf; ++a) dx[idx[a]] = stepf[a];
        const double sdotg = dx.dot(g);
        if (sdotg >= 0.0) break;

        double step = 1.0, vnew = value;
        VecX xnew;
        for (;;)
        {
            xnew = clamp_box(r.x + step * dx, lb, ub);
            vnew = boxqp_value(H, q, xnew);
            if ((vnew - value) / (step * sdotg) >= opt.armijo) break;
            step *= opt.step_factor;
            if (step < opt.min_step) break;
        }
        if (step < opt.min_step) break;
        r.x = xnew;
        value = vnew;
    }
    update_free(q + H * r.x);
    if (!factor_free()) return r;
    // Exact minimizer on the final free set, kept when it stays feasible.
    if (!idx.empty())
    {
        const auto nf = static_cast<Eigen::Index>(idx.size());
        VecX xc = r.x;
        for (auto i : idx) xc[i] = 0.0;
        const VecX gc = q + H * xc;
        VecX gf(nf);
        for (Eigen::Index a = 0; a < nf; ++a) gf[a] = gc[idx[a]];
        const VecX xf = -llt.solve(gf);
        bool feasible = true;
        for (Eigen::Index a = 0; a < nf; ++a)
            if (!(xf[a] >= lb[idx[a]] && xf[a] <= ub[idx[a]])) feasible = false;
        if (feasible)
            for (Eigen::Index a = 0; a < nf; ++a) r.x[idx[a]] = xf[a];
    }
    r.Hff_inv = idx.empty() ? MatX(0, 0) : MatX(llt.solve(MatX::Identity(Hff.rows(), Hff.rows())));
    r.ok = true;
    return r;
}

}  // namespace hddp
