#pragma once

// Optimal-control problems in shooting form.
//
// An ActionModel maps (x, u) to the next state and a stage cost. States are
// stored as plain vectors; the model supplies the retraction and difference
// of its state manifold. RobotKnot is the action model of one knot of a
// whole-body trajectory (contact dynamics, impulse or terminal).

#include <cmath>
#include <memory>
#include <vector>

#include "hddp/costs.hpp"

namespace hddp
{

struct ActionData
{
    VecX next;
    double cost = 0.0;
    MatX Fx, Fu;
    VecX Lx, Lu;
    MatX Lxx, Lxu, Luu;
    std::vector<Vec6> wrenches;  // contact wrenches (impulses at impulse knots)
};

class ActionModel
{
   public:
    virtual ~ActionModel() = default;

    virtual int nx() const = 0;
    virtual int ndx() const = 0;
    virtual int nu() const = 0;

    /// False for knots whose control has no effect (impulse, terminal).
    virtual bool has_controls() const { return nu() > 0; }

    virtual VecX integrate(const VecX& x, const VecX& dx) const = 0;
    /// Tangent vector taking x0 to x1.
    virtual VecX difference(const VecX& x0, const VecX& x1) const = 0;

    /// Next state and cost; with `derivatives` also Fx, Fu and the cost blocks.
    virtual void calc(ActionData& d, const VecX& x, const VecX& u, bool derivatives) const = 0;

    virtual VecX lower_bound() const { return VecX::Constant(nu(), -std::numeric_limits<double>::infinity()); }
    virtual VecX upper_bound() const { return VecX::Constant(nu(), std::numeric_limits<double>::infinity()); }
};

using ActionModelPtr = std::shared_ptr<const ActionModel>;

/// Running knots 0..N-1 plus a terminal model evaluated with no control.
struct ShootingProblem
{
    VecX x0;
    std::vector<ActionModelPtr> running;
    ActionModelPtr terminal;

    int horizon() const { return static_cast<int>(running.size()); }

    void validate() const
    {
        if (!terminal) throw std::invalid_argument("shooting problem: terminal model missing");
        if (x0.size() != terminal->nx()) throw DimensionError("shooting problem: initial state has wrong dimension");
        for (const auto& r : running)
        {
            if (!r) throw std::invalid_argument("shooting problem: null running model");
            if (r->nx() != terminal->nx() || r->ndx() != terminal->ndx())
                throw DimensionError("shooting problem: knot state dimensions differ");
        }
    }
};

inline State unstack(const RobotModel& m, const VecX& x) { return {x.head(m.nq), x.tail(m.nv)}; }

/// One knot of a whole-body problem.
struct RobotKnot : ActionModel
{
    std::shared_ptr<const RobotModel> model;
    double dt = 0.0;
    ContactSet contacts;
    std::vector<CostTerm> costs;
    VecX u_lower, u_upper;
    bool is_impulse = false;
    bool is_terminal = false;
    ContactOptions options;

    RobotKnot() = default;
    explicit RobotKnot(std::shared_ptr<const RobotModel> m) : model(std::move(m))
    {
        u_lower = -model->effort_limits();
        u_upper = model->effort_limits();
    }

    void validate() const
    {
        if (!model) throw std::invalid_argument("knot: model missing");
        if (!is_impulse && !is_terminal && !(dt > 0.0)) throw std::invalid_argument("knot: running knots need dt > 0");
        if (u_lower.size() != model->nu || u_upper.size() != model->nu) throw DimensionError("knot: control bounds have wrong dimension");
        for (int i = 0; i < model->nu; ++i)
            if (u_lower[i] > u_upper[i]) throw std::invalid_argument("knot: control lower bound exceeds upper bound");
        if (is_impulse)
            for (const auto& c : costs)
                if (c.kind == CostKind::ControlReg || c.uses_wrench())
                    throw std::invalid_argument("knot: impulse knots carry no control or wrench cost");
        validate_contacts(*model, contacts);
    }

    int nx() const override { return model->nq + model->nv; }
    int ndx() const override { return 2 * model->nv; }
    int nu() const override { return model->nu; }
    bool has_controls() const override { return !is_impulse && !is_terminal && model->nu > 0; }

    VecX integrate(const VecX& x, const VecX& dx) const override { return hddp::integrate(unstack(*model, x), dx).stacked(); }
    VecX difference(const VecX& x0, const VecX& x1) const override
    {
        return state_difference(unstack(*model, x0), unstack(*model, x1));
    }
    VecX lower_bound() const override { return has_controls() ? u_lower : VecX(VecX::Zero(nu())); }
    VecX upper_bound() const override { return has_controls() ? u_upper : VecX(VecX::Zero(nu())); }

    void calc(ActionData& d, const VecX& x, const VecX& u, bool derivatives) const override
    {
        const RobotModel& m = *model;
        const int nv = m.nv, ndx = 2 * nv, nu = m.nu;
        const State s = unstack(m, x);
        const Kinematics kin = forward_kinematics_data(m, s.q);
        const MatX Sw = world_subspaces(m, kin);
        const VecX u_eff = has_controls() ? u : VecX(VecX::Zero(nu));

        if (is_terminal)
        {
            d.next = x;
            d.wrenches.clear();
            const NodeContext ctx{m, s, u_eff, kin, Sw};
            store_cost(d, compose_node_cost(costs, ctx), 1.0);
            if (derivatives)
            {
                d.Fx = MatX::Identity(ndx, ndx);
                d.Fu = MatX::Zero(ndx, nu);
            }
            return;
        }

        if (is_impulse)
        {
            ImpulseData id;
            impulse_dynamics(m, s, contacts, id);
            d.next = State(s.q, id.result.v_plus).stacked();
            d.wrenches = id.result.impulses;
            const NodeContext ctx{m, s, u_eff, kin, Sw};
            store_cost(d, compose_node_cost(costs, ctx), 1.0);
            if (derivatives)
            {
                const ImpulseDerivatives D = impulse_dynamics_derivatives(m, s, contacts, id);
                d.Fx = MatX::Zero(ndx, ndx);
                d.Fx.topLeftCorner(nv, nv).setIdentity();
                d.Fx.bottomRows(nv) = D.dvplus_dx;
                d.Fu = MatX::Zero(ndx, nu);
            }
            return;
        }

        ContactDynamicsData cd;
        contact_forward_dynamics(m, s, contacts, u_eff, cd, options);
        const VecX& a = cd.result.vdot;
        const VecX v1 = s.v + a * dt;
        d.next = State(integrate_configuration(s.q, v1 * dt), v1).stacked();
        d.wrenches = cd.result.wrenches;

        ContactDynamicsDerivatives D;
        if (derivatives)
            D = contact_dynamics_derivatives(m, s, contacts, cd, options);
        else
        {
            D.dlambda_dx = MatX::Zero(6 * contacts.size(), ndx);
            D.dlambda_du = MatX::Zero(6 * contacts.size(), nu);
        }
        NodeContext ctx{m, s, u_eff, kin, Sw, &contacts, &d.wrenches, &D.dlambda_dx, &D.dlambda_du};
        store_cost(d, compose_node_cost(costs, ctx), dt);
        if (!derivatives) return;

        // v' = v + a dt,  q' = q (+) v' dt
        MatX dv1_dx = dt * D.da_dx;
        dv1_dx.rightCols(nv) += MatX::Identity(nv, nv);
        const MatX dv1_du = dt * D.da_du;
        const IntegrateJacobians IJ = integrate_jacobians(v1 * dt);
        d.Fx.resize(ndx, ndx);
        d.Fx.topRows(nv) = dt * IJ.dw * dv1_dx;
        d.Fx.topLeftCorner(nv, nv) += IJ.dq;
        d.Fx.bottomRows(nv) = dv1_dx;
        d.Fu.resize(ndx, nu);
        d.Fu.topRows(nv) = dt * IJ.dw * dv1_du;
        d.Fu.bottomRows(nv) = dv1_du;
    }

   private:
    static void store_cost(ActionData& d, CostEvaluation c, double scale)
    {
        c *= scale;
        d.cost = c.value;
        d.Lx = std::move(c.Lx);
        d.Lu = std::move(c.Lu);
        d.Lxx = std::move(c.Lxx);
        d.Lxu = std::move(c.Lxu);
        d.Luu = std::move(c.Luu);
    }
};

using RobotKnotPtr = std::shared_ptr<RobotKnot>;

/// Plain forward rollout of a control sequence.
inline std::vector<VecX> rollout(const ShootingProblem& p, const std::vector<VecX>& us)
{
    if (static_cast<int>(us.size()) != p.horizon()) throw DimensionError("rollout: control sequence has wrong length");
    std::vector<VecX> xs{p.x0};
    ActionData d;
    for (int k = 0; k < p.horizon(); ++k)
    {
        p.running[k]->calc(d, xs.back(), us[k], false);
        xs.push_back(d.next);
    }
    return xs;
}

}  // namespace hddp
