#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hystrol/core.hpp"
#include "hystrol/dynamics.hpp"

namespace hystrol {

struct AdjointTrajectory {
    TimeGrid grid;
    std::vector<Field> p;
    std::vector<double> q;
    double eps = 0.0;
};

// Backward solve of the coupled adjoint pair (p, q) for the regularized
// problem, terminal data p(T) = q(T) = 0. Backward Euler in reverse time:
// the diffusion part of the p-equation and the stiff (1/eps) Psi'' term of
// the q-equation are implicit, every other coupling explicit. All adjoints
// are taken in the mass inner product; rep(.) denotes the representer of a
// scalar functional there, so S itself is represented by the weight field w.
inline AdjointTrajectory solve_adjoint_regularized(const System& sys, const StateTrajectory& base,
                                                   const std::vector<Field>& residual,
                                                   double eps) {
    if (base.kind != ForwardKind::regularized || base.eps != eps)
        throw InvalidInput("adjoint needs a regularized base trajectory at the same eps");
    if (residual.size() != static_cast<std::size_t>(base.grid.samples()))
        throw InvalidInput("residual trajectory does not match the base grid");
    const TimeGrid& grid = base.grid;
    const double dt = grid.dt();
    const ImplicitDiffusionSolver solver(sys.op, dt);
    const Field Aw = sys.op.apply(sys.S.w);

    AdjointTrajectory adj;
    adj.grid = grid;
    adj.eps = eps;
    adj.p.assign(static_cast<std::size_t>(grid.samples()), Field(sys.grid.dof(), 0.0));
    adj.q.assign(static_cast<std::size_t>(grid.samples()), 0.0);

    Field fy_adj_p, fy_adj_w, dz, rhs;
    for (int n = grid.N - 1; n >= 0; --n) {
        const std::size_t i = static_cast<std::size_t>(n);
        const Field& y = base.y[i];
        const double z = base.z[i];
        // p first, using q_{n+1}: (I + dt A) p_n =
        //   p_{n+1} + dt [ (df/dy)^* p_{n+1} + q_{n+1} rep(S(-A + df/dy)) + residual_n ]
        sys.model->dy_adjoint_reg(sys.grid, y, z, adj.p[i + 1], eps, fy_adj_p);
        sys.model->dy_adjoint_reg(sys.grid, y, z, sys.S.w, eps, fy_adj_w);
        rhs = adj.p[i + 1];
        const double qn1 = adj.q[i + 1];
        for (std::size_t k = 0; k < rhs.size(); ++k)
            rhs[k] += dt * (fy_adj_p[k] + qn1 * (fy_adj_w[k] - Aw[k]) + residual[i][k]);
        solver.solve(rhs, adj.p[i]);
        if (has_nan(adj.p[i]))
            throw NumericalFailure("adjoint solve produced a non-finite field", i);
        // then q, implicit in the stiff penalty term, with the fresh p_n:
        sys.model->dz_field_reg(sys.grid, y, z, eps, dz);
        const double src = sys.op.dot_mass(adj.p[i], dz) + sys.apply_S(dz) * qn1;
        adj.q[i] = (qn1 + dt * src) / (1.0 + (dt / eps) * sys.penalty.curv(z));
        if (!std::isfinite(adj.q[i]))
            throw NumericalFailure("adjoint solve produced a non-finite multiplier", i);
    }
    return adj;
}

// <nu, zeta(h)> computed through the linearized solve (left route) against
// <p + S q, h> through the adjoint solve (right route). Returns the gap
// relative to max(|left|, |right|, floor) with the floor raised to the
// Cauchy-Schwarz scale ||nu|| ||zeta(h)|| of the pairing, so a pair that
// happens to be nearly orthogonal does not read as an inconsistency. First
// order in dt by construction.
inline double verify_adjoint_identity(const System& sys, const ControlTrajectory& u, double eps,
                                      const ControlTrajectory& h, const std::vector<Field>& nu,
                                      double floor = 1e-14) {
    const StateTrajectory base = solve_state_regularized(sys, u, u.grid, eps);
    const LinearizedTrajectory lin = solve_linearized_regularized(sys, base, h, eps);
    double left = 0.0, nu_sq = 0.0, zeta_sq = 0.0;
    for (int n = 0; n <= u.grid.N; ++n) {
        const std::size_t i = static_cast<std::size_t>(n);
        left += u.grid.weight(n) * sys.op.dot_mass(nu[i], lin.zeta[i]);
        nu_sq += u.grid.weight(n) * sys.op.dot_mass(nu[i], nu[i]);
        zeta_sq += u.grid.weight(n) * sys.op.dot_mass(lin.zeta[i], lin.zeta[i]);
    }
    floor = std::max(floor, std::sqrt(nu_sq * zeta_sq));
    const AdjointTrajectory adj = solve_adjoint_regularized(sys, base, nu, eps);
    double right = 0.0;
    Field rep(sys.grid.dof());
    for (int n = 0; n <= u.grid.N; ++n) {
        const std::size_t i = static_cast<std::size_t>(n);
        for (std::size_t k = 0; k < rep.size(); ++k)
            rep[k] = adj.p[i][k] + adj.q[i] * sys.S.w[k];
        right += u.grid.weight(n) * sys.B.dot(sys.B.restrict_adjoint(rep, sys.op), h.u[i], sys.op);
    }
    return std::abs(left - right) / std::max({std::abs(left), std::abs(right), floor});
}

// Reduced gradient of J (prox_weight = 0) or J_reg (prox_weight = 1) at u:
//   grad_n = kappa u_n + prox (u_n - u_ref_n) + B^*(p_n + q_n w).
// The backward pass here differs from solve_adjoint_regularized in two ways
// that matter for descent quality, both aligned with the discrete derivative
// of the forward scheme rather than with the continuous equations:
//  - endpoint bookkeeping matches the trapezoid cost quadrature (the terminal
//    misfit enters the recursion start at half weight and is paired back with
//    weight dt / tau_N); otherwise the gradient carries an O(dt^1.5) bias at
//    t = T that floors the reachable gradient norm and stalls Armijo;
//  - the q-coupled stiff terms are taken at the new level through a scalar
//    elimination, and the z-source pairs the previous-level p.
// The pairing is dropped at n = 0 because u_0 never enters the forward
// dynamics; that component is purely the control cost.
struct ReducedGradientResult {
    ControlTrajectory grad;
    StateTrajectory state;  // regularized forward solve at u
    double cost_reg = 0.0;  // J_reg (or J when prox_weight = 0)
    double cost_plain = 0.0;
};

inline ReducedGradientResult reduced_gradient(const System& sys, const ControlTrajectory& u,
                                              double eps, const TargetTrajectory& yd, double kappa,
                                              double prox_weight = 0.0,
                                              const ControlTrajectory* u_ref = nullptr) {
    if (prox_weight != 0.0 && u_ref == nullptr)
        throw InvalidInput("proximal gradient needs the anchor control");
    require_target(yd, u.grid, sys.grid.dof());

    ReducedGradientResult res;
    res.state = solve_state_regularized(sys, u, u.grid, eps);
    const StateTrajectory& base = res.state;
    const TimeGrid& grid = u.grid;
    const double dt = grid.dt();
    const ImplicitDiffusionSolver solver(sys.op, dt);
    const Field Aw = sys.op.apply(sys.S.w);
    const int N = grid.N;

    auto residual_at = [&](int n, Field& out) {
        const std::size_t i = static_cast<std::size_t>(n);
        out.resize(sys.grid.dof());
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = base.y[i][k] - yd[i][k];
    };

    std::vector<Field> p(static_cast<std::size_t>(grid.samples()), Field(sys.grid.dof(), 0.0));
    std::vector<double> q(static_cast<std::size_t>(grid.samples()), 0.0);
    Field r, rhs, fy_adj_p, fy_adj_w, dz, EAw;
    residual_at(N, r);
    for (double& v : r) v *= 0.5 * dt;  // trapezoid weight of the terminal sample
    solver.solve(r, p[static_cast<std::size_t>(N)]);
    solver.solve(Aw, EAw);  // for the coupled (p, q) elimination below

    Field Ep;
    for (int n = N - 1; n >= 0; --n) {
        const std::size_t i = static_cast<std::size_t>(n);
        const Field& y = base.y[i];
        const double z = base.z[i];
        residual_at(n, r);
        sys.model->dy_adjoint_reg(sys.grid, y, z, p[i + 1], eps, fy_adj_p);
        sys.model->dy_adjoint_reg(sys.grid, y, z, sys.S.w, eps, fy_adj_w);
        sys.model->dz_field_reg(sys.grid, y, z, eps, dz);
        // the q-coupled part of the p-equation is taken at the new level,
        // p_n = E b - dt q_n E A w; eliminating p_n from the q-update gives a
        // scalar equation, so the stiff pair stays implicit at no extra cost
        rhs = p[i + 1];
        const double qn1 = q[i + 1];
        for (std::size_t k = 0; k < rhs.size(); ++k)
            rhs[k] += dt * (fy_adj_p[k] + qn1 * fy_adj_w[k] + r[k]);
        solver.solve(rhs, Ep);
        const double src_free = sys.op.dot_mass(p[i + 1], dz) + sys.apply_S(dz) * qn1;
        const double coupling = dt * sys.op.dot_mass(EAw, dz);
        const double denom = 1.0 + (dt / eps) * sys.penalty.curv(z) + dt * coupling;
        q[i] = (qn1 + dt * src_free) / denom;
        p[i] = Ep;
        for (std::size_t k = 0; k < p[i].size(); ++k) p[i][k] -= dt * q[i] * EAw[k];
        if (has_nan(p[i]) || !std::isfinite(q[i]))
            throw NumericalFailure("gradient pass produced a non-finite field", i);
    }

    res.grad = ControlTrajectory::zero(grid, sys.B.dim());
    Field rep(sys.grid.dof());
    for (int n = 0; n <= N; ++n) {
        const std::size_t i = static_cast<std::size_t>(n);
        std::vector<double>& g = res.grad.u[i];
        if (n >= 1) {
            const double scale = dt / grid.weight(n);  // 2 at the terminal sample
            for (std::size_t k = 0; k < rep.size(); ++k)
                rep[k] = scale * (p[i][k] + q[i] * sys.S.w[k]);
            g = sys.B.restrict_adjoint(rep, sys.op);
        }
        for (std::size_t k = 0; k < g.size(); ++k) {
            g[k] += kappa * u.u[i][k];
            if (prox_weight != 0.0) g[k] += prox_weight * (u.u[i][k] - u_ref->u[i][k]);
        }
    }
    res.cost_plain = cost_eval(sys, res.state, u, yd, kappa);
    res.cost_reg = res.cost_plain;
    if (prox_weight != 0.0) {
        const ControlTrajectory d = control_axpy(u, -1.0, *u_ref);
        res.cost_reg += 0.5 * prox_weight * control_dot(sys, d, d);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Limit diagnostics: partition of [0, T], the measure density, and the audit
// quantities that should collapse along the eps schedule.

enum class IntervalKind { interior, boundary_a, boundary_b };

inline std::string to_string(IntervalKind k) {
    switch (k) {
        case IntervalKind::interior: return "I0";
        case IntervalKind::boundary_a: return "Ia";
        default: return "Ib";
    }
}

struct PartitionInterval {
    IntervalKind kind = IntervalKind::interior;
    int first = 0;  // sample indices, inclusive
    int last = 0;
    double t_begin = 0.0;
    double t_end = 0.0;
};

struct SwitchingTime {
    double t = 0.0;
    int sample = 0;
    bool into_boundary = true;  // (0,d) when true, (d,0) otherwise
};

struct EpsDiagnostics {
    double eps = 0.0;
    double complementarity = 0.0;   // int_{I_d} |d/dt P[Sy]| |q_eps| dt
    double mu_mass_outside = 0.0;   // |d mu_eps| mass at distance > delta from I_d
    double sup_q_interior = 0.0;    // sup |q_eps| over interiors of maximal I_d intervals
    double q_terminal = 0.0;        // q_eps(T), must be exactly zero
    int jump_violations = 0;        // reverse-time |q| increases away from transitions
};

struct PartitionReport {
    std::vector<PartitionInterval> intervals;
    std::vector<SwitchingTime> switching_times;
    double tol_z = 0.0;
    // audits, filled by limit_diagnostics
    bool regularity_ok = false;
    double min_abs_Sydot_on_boundary = 0.0;
    std::vector<EpsDiagnostics> per_eps;
};

// Classifies every sample of z by distance to the bounds and merges maximal
// intervals; transitions between interior and boundary intervals become
// switching times.
inline PartitionReport partition_times(const std::vector<double>& z, const TimeGrid& grid,
                                       const HysteresisBounds& bounds, double tol_z) {
    if (z.size() != static_cast<std::size_t>(grid.samples()))
        throw InvalidInput("partition: memory trajectory does not match the grid");
    PartitionReport report;
    report.tol_z = tol_z;
    auto classify = [&](double zv) {
        if (std::abs(zv - bounds.a) <= tol_z) return IntervalKind::boundary_a;
        if (std::abs(zv - bounds.b) <= tol_z) return IntervalKind::boundary_b;
        return IntervalKind::interior;
    };
    int start = 0;
    IntervalKind kind = classify(z[0]);
    for (int n = 1; n <= grid.N + 1; ++n) {
        const bool flush = (n > grid.N) || classify(z[static_cast<std::size_t>(n)]) != kind;
        if (!flush) continue;
        report.intervals.push_back(
            {kind, start, n - 1, grid.time(start), grid.time(n - 1)});
        if (n <= grid.N) {
            const IntervalKind next = classify(z[static_cast<std::size_t>(n)]);
            const bool enters_boundary = next != IntervalKind::interior;
            if (enters_boundary != (kind != IntervalKind::interior))
                report.switching_times.push_back({grid.time(n), n, enters_boundary});
            start = n;
            kind = next;
        }
    }
    return report;
}

inline double default_partition_tol(double eps_min, double sup_Sydot) {
    return std::max(10.0 * std::sqrt(eps_min * std::max(sup_Sydot, 0.0) / 12.0), 1e-6);
}

struct MeasureDensity {
    TimeGrid grid;
    double eps = 0.0;
    std::vector<double> density;           // (1/eps) Psi''(z_eps) q_eps per sample
    std::vector<double> interval_integral; // trapezoid integral per partition interval
    double total_integral = 0.0;
    double total_abs = 0.0;
};

// Samples d mu_eps = (1/eps) Psi''(z_eps) q_eps and integrates it over the
// maximal partition intervals.
inline MeasureDensity mu_density(const System& sys, const AdjointTrajectory& adj,
                                 const StateTrajectory& base, double eps,
                                 const PartitionReport& partition) {
    if (base.kind != ForwardKind::regularized || base.eps != eps || adj.eps != eps)
        throw InvalidInput("mu density: eps mismatch between state and adjoint");
    MeasureDensity md;
    md.grid = adj.grid;
    md.eps = eps;
    md.density.resize(static_cast<std::size_t>(adj.grid.samples()));
    for (int n = 0; n <= adj.grid.N; ++n) {
        const std::size_t i = static_cast<std::size_t>(n);
        md.density[i] = sys.penalty.curv(base.z[i]) * adj.q[i] / eps;
    }
    auto integrate = [&](int first, int last) {
        double s = 0.0;
        for (int n = first; n < last; ++n) {
            const std::size_t i = static_cast<std::size_t>(n);
            s += 0.5 * (md.density[i] + md.density[i + 1]) * adj.grid.dt();
        }
        return s;
    };
    for (const PartitionInterval& iv : partition.intervals)
        md.interval_integral.push_back(integrate(iv.first, iv.last));
    md.total_integral = integrate(0, adj.grid.N);
    for (int n = 0; n <= adj.grid.N; ++n)
        md.total_abs += adj.grid.weight(n) * std::abs(md.density[static_cast<std::size_t>(n)]);
    return md;
}

struct LimitDiagnosticsOptions {
    // delta: distance from I_d for the mass audit; must dominate the exit
    // tail of the widest boundary layer in the schedule, which relaxes back
    // into [a, b] over an O(sqrt(eps)) window after a (d,0) switch
    double support_margin = 0.05;
    double interior_margin = 0.05;  // trim at each end of a maximal I_d interval
    // reverse-time |q| increase that counts as a jump; <= 0 picks
    // 0.2 sup|q| per adjoint, well above any smooth per-step growth
    double jump_threshold = 0.0;
    double regularity_threshold = 1e-3;
    bool regularity_check = true;
};

// Audits the adjoint limit structure across an eps schedule against a fixed
// partition (detected from the exact-stop reference run):
//   (i)  complementarity  int_{I_d} |d/dt P[Sy]| |q_eps| dt
//   (ii) d mu mass at distance > delta from I_d
//   (iii) sup |q_eps| over trimmed interiors of maximal I_d intervals
//   (iv) reverse-time jump audit of |q_eps|
//   (v)  q_eps(T) recorded verbatim (must be exactly zero).
inline PartitionReport limit_diagnostics(const System& sys, const StateTrajectory& reference,
                                         const std::vector<StateTrajectory>& states,
                                         const std::vector<AdjointTrajectory>& adjoints,
                                         PartitionReport partition,
                                         const LimitDiagnosticsOptions& opt = {}) {
    if (states.size() != adjoints.size())
        throw InvalidInput("limit diagnostics: need one adjoint per state");
    const TimeGrid& grid = reference.grid;
    const double dt = grid.dt();

    // |d/dt P[S y]| of the reference trajectory; the play accumulates the
    // overflow, so its increments vanish off the active boundary.
    const ScalarTrajectory play = play_apply(reference.Sy_trajectory(), sys.bounds);
    std::vector<double> play_rate(static_cast<std::size_t>(grid.samples()), 0.0);
    for (int n = 1; n <= grid.N; ++n)
        play_rate[static_cast<std::size_t>(n)] =
            (play.v[static_cast<std::size_t>(n)] - play.v[static_cast<std::size_t>(n - 1)]) / dt;

    std::vector<char> on_boundary(static_cast<std::size_t>(grid.samples()), 0);
    std::vector<char> near_boundary(static_cast<std::size_t>(grid.samples()), 0);
    const int margin_steps = std::max(1, static_cast<int>(opt.support_margin / dt));
    for (const PartitionInterval& iv : partition.intervals) {
        if (iv.kind == IntervalKind::interior) continue;
        for (int n = iv.first; n <= iv.last; ++n) on_boundary[static_cast<std::size_t>(n)] = 1;
        for (int n = std::max(0, iv.first - margin_steps);
             n <= std::min(grid.N, iv.last + margin_steps); ++n)
            near_boundary[static_cast<std::size_t>(n)] = 1;
    }

    // regularity surrogate: min |S dy/dt| over I_d of the reference state
    double min_rate = std::numeric_limits<double>::infinity();
    bool any_boundary = false;
    for (int n = 1; n <= grid.N; ++n)
        if (on_boundary[static_cast<std::size_t>(n)]) {
            any_boundary = true;
            min_rate = std::min(min_rate,
                                std::abs(reference.Sy[static_cast<std::size_t>(n)] -
                                         reference.Sy[static_cast<std::size_t>(n - 1)]) /
                                    dt);
        }
    partition.min_abs_Sydot_on_boundary = any_boundary ? min_rate : 0.0;
    partition.regularity_ok =
        !opt.regularity_check || !any_boundary || min_rate >= opt.regularity_threshold;

    const int trim = std::max(1, static_cast<int>(opt.interior_margin / dt));
    for (std::size_t s = 0; s < states.size(); ++s) {
        const StateTrajectory& st = states[s];
        const AdjointTrajectory& adj = adjoints[s];
        EpsDiagnostics diag;
        diag.eps = adj.eps;
        diag.q_terminal = adj.q[static_cast<std::size_t>(grid.N)];

        for (int n = 0; n <= grid.N; ++n) {
            const std::size_t i = static_cast<std::size_t>(n);
            if (on_boundary[i])
                diag.complementarity += grid.weight(n) * std::abs(play_rate[i]) * std::abs(adj.q[i]);
            if (!near_boundary[i])
                diag.mu_mass_outside +=
                    grid.weight(n) * std::abs(sys.penalty.curv(st.z[i]) * adj.q[i] / adj.eps);
        }
        for (const PartitionInterval& iv : partition.intervals) {
            if (iv.kind == IntervalKind::interior) continue;
            for (int n = iv.first + trim; n <= iv.last - trim; ++n)
                diag.sup_q_interior =
                    std::max(diag.sup_q_interior, std::abs(adj.q[static_cast<std::size_t>(n)]));
        }
        // reverse time runs from n = N down to 0; a one-step increase of |q|
        // beyond the threshold is a jump and may only sit next to a partition
        // transition
        double jump_tol = opt.jump_threshold;
        if (jump_tol <= 0.0) jump_tol = 0.2 * sup_norm(adj.q) + 1e-30;
        for (int n = grid.N; n >= 1; --n) {
            const double rise = std::abs(adj.q[static_cast<std::size_t>(n - 1)]) -
                                std::abs(adj.q[static_cast<std::size_t>(n)]);
            if (rise <= jump_tol) continue;
            bool near_switch = false;
            for (const SwitchingTime& sw : partition.switching_times)
                if (std::abs(n - sw.sample) <= margin_steps) near_switch = true;
            if (!near_switch) ++diag.jump_violations;
        }
        partition.per_eps.push_back(diag);
    }
    return partition;
}

}  // namespace hystrol
