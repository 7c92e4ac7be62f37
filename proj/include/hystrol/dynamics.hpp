#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "hystrol/core.hpp"
#include "hystrol/discretization.hpp"
#include "hystrol/hysteresis.hpp"
#include "hystrol/model.hpp"

namespace hystrol {

// Everything a forward/backward solve needs, assembled once.
struct System {
    SpatialGrid grid;
    DiffusionOperator op;
    ScalarProjection S;
    ControlInjector B;
    std::shared_ptr<NonlinearityModel> model;
    HysteresisBounds bounds;
    PenaltyFunction penalty{HysteresisBounds{}};

    double apply_S(const Field& y) const { return hystrol::apply_S(y, S, op); }
};

struct ControlTrajectory {
    TimeGrid grid;
    std::vector<std::vector<double>> u;  // one snapshot per time sample

    static ControlTrajectory zero(const TimeGrid& grid, std::size_t dim) {
        ControlTrajectory c;
        c.grid = grid;
        c.u.assign(static_cast<std::size_t>(grid.samples()), std::vector<double>(dim, 0.0));
        return c;
    }

    void validate(std::size_t dim) const {
        grid.validate();
        if (u.size() != static_cast<std::size_t>(grid.samples()))
            throw InvalidInput("control trajectory does not match the time grid");
        for (const auto& s : u)
            if (s.size() != dim) throw InvalidInput("control snapshot has wrong shape");
    }
};

// space-time control inner product (trapezoid in time)
inline double control_dot(const System& sys, const ControlTrajectory& a,
                          const ControlTrajectory& b) {
    if (a.grid != b.grid) throw InvalidInput("control trajectories on different grids");
    double s = 0.0;
    for (int n = 0; n <= a.grid.N; ++n)
        s += a.grid.weight(n) * sys.B.dot(a.u[static_cast<std::size_t>(n)],
                                          b.u[static_cast<std::size_t>(n)], sys.op);
    return s;
}

inline double control_norm(const System& sys, const ControlTrajectory& u) {
    return std::sqrt(std::max(0.0, control_dot(sys, u, u)));
}

inline ControlTrajectory control_axpy(const ControlTrajectory& x, double alpha,
                                      const ControlTrajectory& y) {
    if (x.grid != y.grid) throw InvalidInput("control trajectories on different grids");
    ControlTrajectory out = x;
    for (std::size_t n = 0; n < out.u.size(); ++n)
        for (std::size_t k = 0; k < out.u[n].size(); ++k) out.u[n][k] += alpha * y.u[n][k];
    return out;
}

enum class ForwardKind { exact_stop, regularized };

struct StateTrajectory {
    TimeGrid grid;
    std::vector<Field> y;    // one stacked field per sample
    std::vector<double> z;   // hysteresis memory
    std::vector<double> Sy;  // cached scalar projection of y
    ForwardKind kind = ForwardKind::exact_stop;
    double eps = 0.0;  // only meaningful for the regularized kind

    ScalarTrajectory z_trajectory() const {
        ScalarTrajectory out = ScalarTrajectory::uniform(grid);
        out.v = z;
        return out;
    }
    ScalarTrajectory Sy_trajectory() const {
        ScalarTrajectory out = ScalarTrajectory::uniform(grid);
        out.v = Sy;
        return out;
    }
};

namespace detail {

template <typename ZStep>
StateTrajectory run_forward(const System& sys, const ControlTrajectory& u, const TimeGrid& grid,
                            ZStep&& z_step) {
    u.validate(sys.B.dim());
    if (u.grid != grid) throw InvalidInput("control grid does not match requested time grid");
    const double dt = grid.dt();
    const ImplicitDiffusionSolver solver(sys.op, dt);

    StateTrajectory traj;
    traj.grid = grid;
    traj.y.assign(static_cast<std::size_t>(grid.samples()), Field(sys.grid.dof(), 0.0));
    traj.z.assign(static_cast<std::size_t>(grid.samples()), sys.bounds.z0);
    traj.Sy.assign(static_cast<std::size_t>(grid.samples()), 0.0);

    Field reaction, injected, rhs;
    for (int n = 0; n < grid.N; ++n) {
        const std::size_t i = static_cast<std::size_t>(n);
        z_step.reaction(traj.y[i], traj.z[i], reaction);
        sys.B.inject(u.u[i + 1], sys.op, injected);
        rhs = traj.y[i];
        for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] += dt * (reaction[k] + injected[k]);
        solver.solve(rhs, traj.y[i + 1]);
        if (has_nan(traj.y[i + 1]))
            throw NumericalFailure("forward solve produced a non-finite field", i);
        traj.Sy[i + 1] = sys.apply_S(traj.y[i + 1]);
        traj.z[i + 1] = z_step.advance(traj.z[i], traj.Sy[i + 1] - traj.Sy[i], dt, i);
        if (!std::isfinite(traj.z[i + 1]))
            throw NumericalFailure("forward solve produced a non-finite memory state", i);
    }
    return traj;
}

}  // namespace detail

// State system with the exact discrete stop: IMEX step
//   (I + dt A) y_{n+1} = y_n + dt (f(y_n, z_n) + B u_{n+1}),
//   z_{n+1} = clamp(z_n + S y_{n+1} - S y_n).
inline StateTrajectory solve_state(const System& sys, const ControlTrajectory& u,
                                   const TimeGrid& grid) {
    struct Step {
        const System& sys;
        void reaction(const Field& y, double z, Field& out) const {
            sys.model->eval(sys.grid, y, z, out);
        }
        double advance(double z, double dSy, double, std::size_t) const {
            return sys.bounds.clamp(z + dSy);
        }
    };
    StateTrajectory traj = detail::run_forward(sys, u, grid, Step{sys});
    traj.kind = ForwardKind::exact_stop;
    return traj;
}

// Regularized system: same IMEX step with f_eps, the memory advanced by the
// implicit penalty update of the regularized stop.
inline StateTrajectory solve_state_regularized(const System& sys, const ControlTrajectory& u,
                                               const TimeGrid& grid, double eps) {
    if (!(eps > 0.0)) throw InvalidInput("regularized solve requires eps > 0");
    struct Step {
        const System& sys;
        double eps;
        void reaction(const Field& y, double z, Field& out) const {
            sys.model->eval_reg(sys.grid, y, z, eps, out);
        }
        double advance(double z, double dSy, double dt, std::size_t step) const {
            return detail::reg_stop_step(z + dSy, dt / eps, sys.penalty, step);
        }
    };
    StateTrajectory traj = detail::run_forward(sys, u, grid, Step{sys, eps});
    traj.kind = ForwardKind::regularized;
    traj.eps = eps;
    return traj;
}

struct LinearizedTrajectory {
    TimeGrid grid;
    std::vector<Field> zeta;
    std::vector<double> zeta_z;
    std::vector<double> Szeta;
};

// Derivative system of the regularized solve along the base trajectory:
// coefficients of f_eps frozen at (y_n, z_n), memory direction stepped
// implicitly against the penalty curvature at z_{n+1}. Linear in h.
inline LinearizedTrajectory solve_linearized_regularized(const System& sys,
                                                         const StateTrajectory& base,
                                                         const ControlTrajectory& h, double eps) {
    if (base.kind != ForwardKind::regularized || base.eps != eps)
        throw InvalidInput("base trajectory was not produced by the regularized solver at this eps");
    h.validate(sys.B.dim());
    if (h.grid != base.grid) throw InvalidInput("direction grid does not match base grid");
    const TimeGrid& grid = base.grid;
    const double dt = grid.dt();
    const ImplicitDiffusionSolver solver(sys.op, dt);

    LinearizedTrajectory lin;
    lin.grid = grid;
    lin.zeta.assign(static_cast<std::size_t>(grid.samples()), Field(sys.grid.dof(), 0.0));
    lin.zeta_z.assign(static_cast<std::size_t>(grid.samples()), 0.0);
    lin.Szeta.assign(static_cast<std::size_t>(grid.samples()), 0.0);

    Field dy_term, dz_term, injected, rhs;
    for (int n = 0; n < grid.N; ++n) {
        const std::size_t i = static_cast<std::size_t>(n);
        sys.model->dy_apply_reg(sys.grid, base.y[i], base.z[i], lin.zeta[i], eps, dy_term);
        sys.model->dz_field_reg(sys.grid, base.y[i], base.z[i], eps, dz_term);
        sys.B.inject(h.u[i + 1], sys.op, injected);
        rhs = lin.zeta[i];
        for (std::size_t k = 0; k < rhs.size(); ++k)
            rhs[k] += dt * (dy_term[k] + dz_term[k] * lin.zeta_z[i] + injected[k]);
        solver.solve(rhs, lin.zeta[i + 1]);
        if (has_nan(lin.zeta[i + 1]))
            throw NumericalFailure("linearized solve produced a non-finite field", i);
        lin.Szeta[i + 1] = sys.apply_S(lin.zeta[i + 1]);
        const double c = lin.zeta_z[i] + lin.Szeta[i + 1] - lin.Szeta[i];
        lin.zeta_z[i + 1] = c / (1.0 + (dt / eps) * sys.penalty.curv(base.z[i + 1]));
    }
    return lin;
}

// Hadamard directional derivative of the non-smooth solve: the penalty
// curvature is replaced by the clamp-derivative recursion on the pre-clamp
// values of the base run. Positively homogeneous in h.
inline LinearizedTrajectory solve_linearized_nonsmooth(const System& sys,
                                                       const StateTrajectory& base,
                                                       const ControlTrajectory& h,
                                                       double kink_tol = -1.0) {
    if (base.kind != ForwardKind::exact_stop)
        throw InvalidInput("base trajectory was not produced by the exact-stop solver");
    h.validate(sys.B.dim());
    if (h.grid != base.grid) throw InvalidInput("direction grid does not match base grid");
    if (kink_tol < 0.0) kink_tol = sys.bounds.default_kink_tol();
    const TimeGrid& grid = base.grid;
    const double dt = grid.dt();
    const ImplicitDiffusionSolver solver(sys.op, dt);
    const HysteresisBounds& bnd = sys.bounds;

    LinearizedTrajectory lin;
    lin.grid = grid;
    lin.zeta.assign(static_cast<std::size_t>(grid.samples()), Field(sys.grid.dof(), 0.0));
    lin.zeta_z.assign(static_cast<std::size_t>(grid.samples()), 0.0);
    lin.Szeta.assign(static_cast<std::size_t>(grid.samples()), 0.0);

    Field deriv, injected, rhs;
    for (int n = 0; n < grid.N; ++n) {
        const std::size_t i = static_cast<std::size_t>(n);
        sys.model->dir_deriv(sys.grid, base.y[i], base.z[i], lin.zeta[i], lin.zeta_z[i], deriv);
        sys.B.inject(h.u[i + 1], sys.op, injected);
        rhs = lin.zeta[i];
        for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] += dt * (deriv[k] + injected[k]);
        solver.solve(rhs, lin.zeta[i + 1]);
        if (has_nan(lin.zeta[i + 1]))
            throw NumericalFailure("linearized solve produced a non-finite field", i);
        lin.Szeta[i + 1] = sys.apply_S(lin.zeta[i + 1]);

        const double s = base.z[i] + (base.Sy[i + 1] - base.Sy[i]);
        const double c = lin.zeta_z[i] + lin.Szeta[i + 1] - lin.Szeta[i];
        double next;
        if (s > bnd.b + kink_tol || s < bnd.a - kink_tol)
            next = 0.0;
        else if (std::abs(s - bnd.b) <= kink_tol)
            next = std::min(c, 0.0);
        else if (std::abs(s - bnd.a) <= kink_tol)
            next = std::max(c, 0.0);
        else
            next = c;
        lin.zeta_z[i + 1] = next;
    }
    return lin;
}

using TargetTrajectory = std::vector<Field>;  // desired state, one field per sample

inline void require_target(const TargetTrajectory& yd, const TimeGrid& grid, std::size_t dof) {
    if (yd.size() != static_cast<std::size_t>(grid.samples()))
        throw InvalidInput("target trajectory does not match the time grid");
    for (const Field& f : yd)
        if (f.size() != dof) throw InvalidInput("target field size mismatch");
}

// J(y, u) = 1/2 ||y - y_d||^2 + kappa/2 ||u||^2, trapezoid in time and
// mass-weighted in space.
inline double cost_eval(const System& sys, const std::vector<Field>& y, const TimeGrid& grid,
                        const ControlTrajectory& u, const TargetTrajectory& yd, double kappa) {
    require_target(yd, grid, sys.grid.dof());
    if (y.size() != static_cast<std::size_t>(grid.samples()))
        throw InvalidInput("state trajectory does not match the time grid");
    u.validate(sys.B.dim());
    if (u.grid != grid) throw InvalidInput("control grid mismatch in cost");

    double misfit = 0.0, ctrl = 0.0;
    Field diff(sys.grid.dof());
    for (int n = 0; n <= grid.N; ++n) {
        const std::size_t i = static_cast<std::size_t>(n);
        for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = y[i][k] - yd[i][k];
        misfit += grid.weight(n) * sys.op.dot_mass(diff, diff);
        ctrl += grid.weight(n) * sys.B.dot(u.u[i], u.u[i], sys.op);
    }
    return 0.5 * misfit + 0.5 * kappa * ctrl;
}

inline double cost_eval(const System& sys, const StateTrajectory& state,
                        const ControlTrajectory& u, const TargetTrajectory& yd, double kappa) {
    return cost_eval(sys, state.y, state.grid, u, yd, kappa);
}

// J_reg adds the proximal anchor 1/2 ||u - u_ref||^2.
inline double reg_cost_eval(const System& sys, const StateTrajectory& state,
                            const ControlTrajectory& u, const TargetTrajectory& yd, double kappa,
                            const ControlTrajectory& u_ref) {
    const ControlTrajectory d = control_axpy(u, -1.0, u_ref);
    const double prox = control_dot(sys, d, d);
    return cost_eval(sys, state.y, state.grid, u, yd, kappa) + 0.5 * prox;
}

struct BoundAuditEntry {
    double eps = 0.0;
    double dissipation = 0.0;     // int |dz/dt|^2 dt
    double penalty_peak = 0.0;    // sup_t (1/eps) Psi(z(t))
    double audited = 0.0;         // sum of the two
    double bound = 0.0;           // c (1 + ||u||)^2 with c fitted at the largest eps
    bool within_bound = true;
};

struct BoundAuditReport {
    double control_norm = 0.0;
    double fitted_c = 0.0;
    std::vector<BoundAuditEntry> entries;
    bool all_within = true;
};

// Audits the uniform-in-eps energy bound: the quantity
//   int |dz_eps|^2 dt + sup_t (1/eps) Psi(z_eps)
// must stay below c (1 + ||u||)^2 with c fitted at the largest eps,
// with 10% headroom at the smaller ones.
inline BoundAuditReport bound_audit(const System& sys,
                                    const std::vector<StateTrajectory>& states,
                                    const ControlTrajectory& u, double slack = 0.10) {
    if (states.empty()) throw InvalidInput("bound audit needs at least one trajectory");
    BoundAuditReport report;
    report.control_norm = control_norm(sys, u);
    const double scale = (1.0 + report.control_norm) * (1.0 + report.control_norm);

    for (const StateTrajectory& st : states) {
        if (st.kind != ForwardKind::regularized)
            throw InvalidInput("bound audit expects regularized trajectories");
        BoundAuditEntry e;
        e.eps = st.eps;
        const double dt = st.grid.dt();
        for (int n = 0; n < st.grid.N; ++n) {
            const double dz = st.z[static_cast<std::size_t>(n) + 1] - st.z[static_cast<std::size_t>(n)];
            e.dissipation += (dz / dt) * (dz / dt) * dt;
        }
        for (double zv : st.z)
            e.penalty_peak = std::max(e.penalty_peak, sys.penalty.value(zv) / st.eps);
        e.audited = e.dissipation + e.penalty_peak;
        report.entries.push_back(e);
    }
    // fit c at the largest eps in the batch
    std::size_t ref = 0;
    for (std::size_t i = 1; i < report.entries.size(); ++i)
        if (report.entries[i].eps > report.entries[ref].eps) ref = i;
    report.fitted_c = report.entries[ref].audited / scale;
    for (BoundAuditEntry& e : report.entries) {
        e.bound = report.fitted_c * scale * (1.0 + slack) + 1e-14;
        e.within_bound = e.audited <= e.bound;
        report.all_within = report.all_within && e.within_bound;
    }
    return report;
}

}  // namespace hystrol
