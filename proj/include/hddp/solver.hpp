#pragma once

// Box-FDDP: feasibility-driven differential dynamic programming with
// box-constrained controls.
//
// The iterate (xs, us) may have gaps between f(xs[k], us[k]) and xs[k+1].
// The backward pass builds the value function around the iterate with the
// gaps folded into the value gradient; the forward pass rolls the nonlinear
// dynamics out and shrinks every gap by the factor (1 - alpha).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "hddp/boxqp.hpp"
#include "hddp/problem.hpp"

namespace hddp
{

struct SolverOptions
{
    int max_iters = 500;
    double tol = 1e-9;       // on |Delta_1|
    double gap_tol = 1e-9;   // on the gap infinity norm
    double reg_init = 1e-9;
    double reg_min = 1e-9;
    double reg_max = 1e9;
    double reg_factor = 10.0;
    // Step-size aware schedule; zero keeps the plain /10 on every acceptance.
    double reg_decrease_alpha = 0.0;  // accepted steps shorter than this keep mu
    double reg_increase_alpha = 0.0;  // accepted steps at or below this raise mu
    double alpha_min = 1.0 / 1024.0;
    double acceptance_ratio = 0.1;
    double accept_increase_ratio = 2.0;  // tolerated increase over a predicted increase
    double grad_accept = 1e-12;          // any finite step is taken once |Delta_1| is below this
    int threads = 0;                     // 0: hardware concurrency
    BoxQpOptions qp;
    bool verbose = false;
};

struct IterationLog
{
    int iter = 0;
    double cost = 0.0;       // after the iteration
    double gap = 0.0;        // gap infinity norm after the iteration
    double delta1 = 0.0;     // first-order model coefficient
    double delta2 = 0.0;     // second-order model coefficient
    double alpha = 0.0;      // accepted step (0 when rejected)
    double reg = 0.0;        // regularization used by the backward pass
    double expected = 0.0;   // model change at alpha
    double actual = 0.0;     // cost change at alpha
    bool accepted = false;
};

enum class SolverStatus
{
    Converged,
    MaxIterations,
    LineSearchFailed,
    BackwardPassFailed
};

inline const char* to_string(SolverStatus s)
{
    switch (s)
    {
        case SolverStatus::Converged: return "converged";
        case SolverStatus::MaxIterations: return "max_iterations";
        case SolverStatus::LineSearchFailed: return "line_search_failed";
        case SolverStatus::BackwardPassFailed: return "backward_pass_failed";
    }
    return "?";
}

struct Solution
{
    std::vector<VecX> xs;  // N + 1
    std::vector<VecX> us;  // N
    std::vector<std::vector<Vec6>> wrenches;  // N, per active contact
    std::vector<VecX> k;   // feedforward
    std::vector<MatX> K;   // feedback, nu x ndx
    int iterations = 0;
    double cost = 0.0;
    double stop = 0.0;     // |Delta_1| at the last backward pass
    double gap = 0.0;
    SolverStatus status = SolverStatus::MaxIterations;
    std::vector<IterationLog> log;

    bool converged() const { return status == SolverStatus::Converged; }
};

/// alpha Delta_1 + 1/2 alpha^2 Delta_2 (negative values predict a decrease).
inline double expected_improvement(double delta1, double delta2, double alpha) { return alpha * delta1 + 0.5 * alpha * alpha * delta2; }

class BoxFddp
{
   public:
    explicit BoxFddp(const ShootingProblem& problem, SolverOptions opt = {}) : p_(problem), opt_(std::move(opt))
    {
        p_.validate();
        N_ = p_.horizon();
        data_.resize(N_ + 1);
        Vx_.resize(N_ + 1);
        Vxx_.resize(N_ + 1);
        kff_.resize(N_);
        K_.resize(N_);
        fbar_.resize(N_ + 1);
        dfwd_.resize(N_ + 1);
        for (int k = 0; k < N_; ++k)
        {
            kff_[k] = VecX::Zero(p_.running[k]->nu());
            K_[k] = MatX::Zero(p_.running[k]->nu(), p_.running[k]->ndx());
        }
    }

    /// Run the solver from a warm start; empty vectors select x0 / zero controls.
    Solution solve(std::vector<VecX> xs_init = {}, std::vector<VecX> us_init = {})
    {
        init(std::move(xs_init), std::move(us_init));
        reg_ = opt_.reg_init;
        Solution sol;
        calc_all(true);
        for (int it = 0; it < opt_.max_iters; ++it)
        {
            IterationLog L;
            L.iter = it;
            // Backward pass, raising the regularization until it succeeds.
            bool ok = false;
            while (!(ok = backward_pass()))
            {
                if (reg_ >= opt_.reg_max) break;
                reg_ = std::min(reg_ * opt_.reg_factor, opt_.reg_max);
            }
            if (!ok)
            {
                sol.status = SolverStatus::BackwardPassFailed;
                break;
            }
            L.reg = reg_;
            expected_coefficients(L.delta1, L.delta2);
            sol.stop = std::abs(L.delta1);
            if (sol.stop < opt_.tol && gap_ <= opt_.gap_tol)
            {
                // Take the last full step when it does not raise the cost; it
                // removes the bias of the regularization floor.
                const double cost_try = forward_pass(1.0);
                if (cost_try <= cost_)
                {
                    L.alpha = 1.0;
                    L.expected = expected_improvement(L.delta1, L.delta2, 1.0);
                    L.actual = cost_try - cost_;
                    L.accepted = true;
                    xs_ = xs_try_;
                    us_ = us_try_;
                    calc_all(false);
                    L.cost = cost_;
                    L.gap = gap_;
                    sol.log.push_back(L);
                }
                sol.status = SolverStatus::Converged;
                break;
            }

            bool accepted = false;
            for (double alpha = 1.0; alpha >= opt_.alpha_min * (1.0 - 1e-12); alpha *= 0.5)
            {
                const double cost_try = forward_pass(alpha);
                const double expected = expected_improvement(L.delta1, L.delta2, alpha);
                const double actual = cost_try - cost_;
                if (!std::isfinite(cost_try)) continue;
                bool accept;
                if (expected <= 0.0)
                    accept = std::abs(L.delta1) < opt_.grad_accept || -actual > opt_.acceptance_ratio * -expected;
                else
                    accept = actual < opt_.accept_increase_ratio * expected;
                if (accept)
                {
                    xs_ = xs_try_;
                    us_ = us_try_;
                    calc_all(true);
                    L.alpha = alpha;
                    L.expected = expected;
                    L.actual = actual;
                    accepted = true;
                    break;
                }
            }
            L.accepted = accepted;
            if (accepted)
            {
                if (L.alpha <= opt_.reg_increase_alpha)
                    reg_ = std::min(reg_ * opt_.reg_factor, opt_.reg_max);
                else if (L.alpha >= opt_.reg_decrease_alpha)
                    reg_ = std::max(reg_ / opt_.reg_factor, opt_.reg_min);
            }
            else
            {
                if (reg_ >= opt_.reg_max)
                {
                    L.cost = cost_;
                    L.gap = gap_;
                    sol.log.push_back(L);
                    sol.status = SolverStatus::LineSearchFailed;
                    break;
                }
                reg_ = std::min(reg_ * opt_.reg_factor, opt_.reg_max);
            }
            L.cost = cost_;
            L.gap = gap_;
            sol.log.push_back(L);
            if (opt_.verbose)
                std::fprintf(stderr, "iter %4d  cost %.6e  gap %.2e  d1 %.2e  alpha %.4g  reg %.1e\n", it, cost_, gap_, L.delta1,
                             L.alpha, L.reg);
        }
        sol.iterations = static_cast<int>(sol.log.size());
        sol.xs = xs_;
        sol.us = us_;
        sol.k = kff_;
        sol.K = K_;
        sol.cost = cost_;
        sol.gap = gap_;
        for (int k = 0; k < N_; ++k) sol.wrenches.push_back(data_[k].wrenches);
        return sol;
    }

    // Low-level access for tests and diagnostics.

    void init(std::vector<VecX> xs, std::vector<VecX> us)
    {
        if (xs.empty()) xs.assign(N_ + 1, p_.x0);
        if (us.empty())
            for (int k = 0; k < N_; ++k) us.push_back(VecX::Zero(p_.running[k]->nu()));
        if (static_cast<int>(xs.size()) != N_ + 1 || static_cast<int>(us.size()) != N_)
            throw DimensionError("solver: warm start has wrong length");
        for (int k = 0; k < N_; ++k)
        {
            const auto& m = *p_.running[k];
            if (xs[k].size() != m.nx() || us[k].size() != m.nu()) throw DimensionError("solver: warm start has wrong dimension");
            us[k] = clamp_box(us[k], m.lower_bound(), m.upper_bound());
        }
        if (xs[N_].size() != p_.terminal->nx()) throw DimensionError("solver: warm start has wrong dimension");
        xs_ = std::move(xs);
        us_ = std::move(us);
    }

    /// Evaluate all knots at the current iterate; refreshes cost and gaps.
    void calc_all(bool derivatives)
    {
        const int threads = opt_.threads > 0 ? opt_.threads : std::max(1u, std::thread::hardware_concurrency());
        auto work = [&](int k)
        {
            if (k < N_)
                p_.running[k]->calc(data_[k], xs_[k], us_[k], derivatives);
            else
                p_.terminal->calc(data_[k], xs_[k], VecX::Zero(p_.terminal->nu()), derivatives);
        };
        if (threads <= 1 || N_ < 4)
            for (int k = 0; k <= N_; ++k) work(k);
        else
        {
            std::vector<std::thread> pool;
            std::exception_ptr err;
            std::mutex mu;
            for (int t = 0; t < threads; ++t)
                pool.emplace_back(
                    [&, t]()
                    {
                        try
                        {
                            for (int k = t; k <= N_; k += threads) work(k);
                        }
                        catch (...)
                        {
                            std::lock_guard<std::mutex> g(mu);
                            err = std::current_exception();
                        }
                    });
            for (auto& th : pool) th.join();
            if (err) std::rethrow_exception(err);
        }
        cost_ = 0.0;
        for (int k = 0; k <= N_; ++k) cost_ += data_[k].cost;
        const ActionModel& m0 = N_ > 0 ? *p_.running[0] : *p_.terminal;
        fbar_[0] = m0.difference(xs_[0], p_.x0);
        dfwd_[0] = m0.difference(p_.x0, xs_[0]);
        gap_ = dfwd_[0].size() ? dfwd_[0].cwiseAbs().maxCoeff() : 0.0;
        for (int k = 0; k < N_; ++k)
        {
            fbar_[k + 1] = p_.running[k]->difference(xs_[k + 1], data_[k].next);
            dfwd_[k + 1] = p_.running[k]->difference(data_[k].next, xs_[k + 1]);
            if (dfwd_[k + 1].size()) gap_ = std::max(gap_, dfwd_[k + 1].cwiseAbs().maxCoeff());
        }
    }

    /// Riccati sweep with box-QP control subproblems. False if a Quu block
    /// is not positive definite at the current regularization.
    bool backward_pass()
    {
        Vxx_[N_] = data_[N_].Lxx;
        Vx_[N_] = data_[N_].Lx + Vxx_[N_] * fbar_[N_];
        for (int k = N_ - 1; k >= 0; --k)
        {
            const ActionData& d = data_[k];
            const ActionModel& m = *p_.running[k];
            const MatX FxTV = d.Fx.transpose() * Vxx_[k + 1];
            const VecX Qx = d.Lx + d.Fx.transpose() * Vx_[k + 1];
            const MatX Qxx = d.Lxx + FxTV * d.Fx;
            if (m.has_controls())
            {
                const VecX Qu = d.Lu + d.Fu.transpose() * Vx_[k + 1];
                const MatX Qxu = d.Lxu + FxTV * d.Fu;
                MatX Quu = d.Luu + d.Fu.transpose() * Vxx_[k + 1] * d.Fu;
                Quu = 0.5 * (Quu + Quu.transpose());
                MatX Quu_r = Quu;
                Quu_r.diagonal().array() += reg_;
                const BoxQpResult qp = boxqp(Quu_r, Qu, m.lower_bound() - us_[k], m.upper_bound() - us_[k], kff_[k], opt_.qp);
                if (!qp.ok) return false;
                kff_[k] = qp.x;
                K_[k].setZero();
                // Feedback only on free controls strictly inside the box: a
                // control resting on a bound would be clamped by K dx for any
                // step size and the rollout would leave the local model.
                std::vector<Eigen::Index> idx;
                bool dropped = false;
                for (Eigen::Index i = 0; i < Qu.size(); ++i)
                {
                    if (!qp.free[i]) continue;
                    const double u = us_[k][i], lb = m.lower_bound()[i], ub = m.upper_bound()[i];
                    const double tol = 1e-12 * std::max(1.0, std::max(std::abs(lb), std::abs(ub)));
                    if (u <= lb + tol || u >= ub - tol)
                        dropped = true;
                    else
                        idx.push_back(i);
                }
                if (!idx.empty())
                {
                    MatX Qux_f(idx.size(), Qxx.rows());
                    for (std::size_t a = 0; a < idx.size(); ++a) Qux_f.row(a) = Qxu.col(idx[a]).transpose();
                    MatX Kf;
                    if (!dropped)
                        Kf = -qp.Hff_inv * Qux_f;
                    else
                    {
                        MatX H(idx.size(), idx.size());
                        for (std::size_t a = 0; a < idx.size(); ++a)
                            for (std::size_t b = 0; b < idx.size(); ++b) H(a, b) = Quu_r(idx[a], idx[b]);
                        const Eigen::LLT<MatX> llt(H);
                        if (llt.info() != Eigen::Success) return false;
                        Kf = -llt.solve(Qux_f);
                    }
                    for (std::size_t a = 0; a < idx.size(); ++a) K_[k].row(idx[a]) = Kf.row(a);
                }
                const MatX& K = K_[k];
                const VecX& kk = kff_[k];
                const MatX QxuK = Qxu * K;
                VecX Vx = Qx + K.transpose() * (Quu * kk + Qu) + Qxu * kk;
                MatX Vxx = Qxx + K.transpose() * Quu * K + QxuK + QxuK.transpose();
                Vxx_[k] = 0.5 * (Vxx + Vxx.transpose());
                Vx_[k] = Vx + Vxx_[k] * fbar_[k];
            }
            else
            {
                kff_[k].setZero();
                K_[k].setZero();
                Vxx_[k] = 0.5 * (Qxx + Qxx.transpose());
                Vx_[k] = Qx + Vxx_[k] * fbar_[k];
            }
            if (!Vx_[k].allFinite() || !Vxx_[k].allFinite()) return false;
        }
        return true;
    }

    /// Coefficients of the quadratic model of the cost change along the
    /// step, from a linear rollout of the local model at alpha = 1.
    void expected_coefficients(double& d1, double& d2) const
    {
        d1 = d2 = 0.0;
        VecX dx = fbar_[0];
        for (int k = 0; k < N_; ++k)
        {
            const ActionData& d = data_[k];
            const VecX du = p_.running[k]->has_controls() ? VecX(kff_[k] + K_[k] * dx) : VecX(VecX::Zero(d.Lu.size()));
            d1 += d.Lx.dot(dx) + d.Lu.dot(du);
            d2 += dx.dot(d.Lxx * dx) + 2.0 * dx.dot(d.Lxu * du) + du.dot(d.Luu * du);
            dx = d.Fx * dx + d.Fu * du + fbar_[k + 1];
        }
        d1 += data_[N_].Lx.dot(dx);
        d2 += dx.dot(data_[N_].Lxx * dx);
    }

    /// Nonlinear rollout at step alpha into xs_try_/us_try_. Returns the
    /// total cost, or +inf if the rollout blew up.
    double forward_pass(double alpha)
    {
        xs_try_.resize(N_ + 1);
        us_try_.resize(N_);
        const ActionModel& m0 = N_ > 0 ? *p_.running[0] : *p_.terminal;
        xs_try_[0] = alpha == 1.0 ? VecX(p_.x0) : m0.integrate(p_.x0, (1.0 - alpha) * dfwd_[0]);
        double cost = 0.0;
        ActionData d;
        try
        {
            for (int k = 0; k < N_; ++k)
            {
                const ActionModel& m = *p_.running[k];
                if (m.has_controls())
                    us_try_[k] = clamp_box(us_[k] + alpha * kff_[k] + K_[k] * m.difference(xs_[k], xs_try_[k]), m.lower_bound(),
                                           m.upper_bound());
                else
                    us_try_[k] = us_[k];
                m.calc(d, xs_try_[k], us_try_[k], false);
                if (!d.next.allFinite() || !std::isfinite(d.cost)) return std::numeric_limits<double>::infinity();
                cost += d.cost;
                xs_try_[k + 1] = alpha == 1.0 ? d.next : m.integrate(d.next, (1.0 - alpha) * dfwd_[k + 1]);
            }
            p_.terminal->calc(d, xs_try_[N_], VecX::Zero(p_.terminal->nu()), false);
        }
        catch (const std::exception&)
        {
            return std::numeric_limits<double>::infinity();
        }
        cost += d.cost;
        return std::isfinite(cost) ? cost : std::numeric_limits<double>::infinity();
    }

    double cost() const { return cost_; }
    double gap() const { return gap_; }
    double regularization() const { return reg_; }
    const std::vector<VecX>& xs() const { return xs_; }
    const std::vector<VecX>& us() const { return us_; }
    const std::vector<VecX>& xs_try() const { return xs_try_; }
    const std::vector<VecX>& us_try() const { return us_try_; }
    const std::vector<VecX>& feedforward() const { return kff_; }
    const std::vector<MatX>& feedback() const { return K_; }
    const std::vector<ActionData>& data() const { return data_; }

   private:
    ShootingProblem p_;
    SolverOptions opt_;
    int N_ = 0;
    std::vector<VecX> xs_, us_, xs_try_, us_try_;
    std::vector<ActionData> data_;
    std::vector<VecX> Vx_, kff_, fbar_, dfwd_;
    std::vector<MatX> Vxx_, K_;
    double cost_ = 0.0, gap_ = 0.0, reg_ = 1e-9;
};

inline Solution solve(const ShootingProblem& problem, std::vector<VecX> xs_init = {}, std::vector<VecX> us_init = {},
                      const SolverOptions& opt = {})
{
    BoxFddp s(problem, opt);
    return s.solve(std::move(xs_init), std::move(us_init));
}

}  // namespace hddp
