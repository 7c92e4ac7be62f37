#pragma once

#include <algorithm>
#include <cmath>

#include "hystrol/core.hpp"

namespace hystrol {

// Memory bounds [a, b] and initial memory z0 of the scalar stop operator.
struct HysteresisBounds {
    double a = -1.0;
    double b = 1.0;
    double z0 = 0.0;

    void validate() const {
        if (!(a < b)) throw InvalidInput("hysteresis bounds require a < b");
        if (z0 < a || z0 > b) throw InvalidInput("initial memory z0 outside [a, b]");
    }

    double clamp(double x) const { return std::min(b, std::max(a, x)); }

    double default_kink_tol() const {
        return 1e-12 * std::max({std::abs(a), std::abs(b), 1.0});
    }
};

// Convex penalty vanishing on [a, b]: quartic ramp of width 2 glued to a
// linear tail on each side. Turning points sit at a-2 and b+2, so
// psi'' <= 12 everywhere and psi'' is globally Lipschitz.
struct PenaltyFunction {
    HysteresisBounds bounds;

    explicit PenaltyFunction(HysteresisBounds bnds = {}) : bounds(bnds) { bounds.validate(); }

    double a1() const { return bounds.a - 2.0; }
    double b1() const { return bounds.b + 2.0; }

    // curvature cap and the slope bound |psi'(x)| <= m1 |x - a|
    static constexpr double m1 = 12.0;
    static constexpr double m2 = 12.0;

    double value(double x) const {
        const double s = excess(x);
        if (s <= 0.0) return 0.0;
        if (s <= 2.0) return s * s * s * (4.0 - s);
        return 16.0 * (s - 1.0);
    }

    double grad(double x) const {
        const double s = excess(x);
        if (s <= 0.0) return 0.0;
        double g;
        if (s <= 2.0)
            g = 4.0 * s * s * (3.0 - s);
        else
            g = 16.0;
        return x > bounds.b ? g : -g;
    }

    double curv(double x) const {
        const double s = excess(x);
        if (s <= 0.0 || s > 2.0) return 0.0;
        return 12.0 * s * (2.0 - s);
    }

private:
    // distance past the dead zone, measured outward
    double excess(double x) const {
        if (x > bounds.b) return x - bounds.b;
        if (x < bounds.a) return bounds.a - x;
        return 0.0;
    }
};

inline double psi_eval(double x, const PenaltyFunction& P) { return P.value(x); }
inline double psi_grad(double x, const PenaltyFunction& P) { return P.grad(x); }
inline double psi_curv(double x, const PenaltyFunction& P) { return P.curv(x); }

// Exact time-discrete scalar stop: per-step catch-up
//   z_{n+1} = clamp(z_n + (v_{n+1} - v_n), a, b),
// which solves the one-step variational inequality exactly and keeps the
// 2-Lipschitz estimate without discretization slack.
inline ScalarTrajectory stop_apply(const ScalarTrajectory& v, const HysteresisBounds& bounds) {
    v.validate();
    bounds.validate();
    ScalarTrajectory z;
    z.t = v.t;
    z.v.resize(v.v.size());
    z.v[0] = bounds.z0;
    for (std::size_t i = 0; i + 1 < v.v.size(); ++i)
        z.v[i + 1] = bounds.clamp(z.v[i] + (v.v[i + 1] - v.v[i]));
    return z;
}

// Play operator P = Id - W; accumulates the overflow past the bounds.
inline ScalarTrajectory play_apply(const ScalarTrajectory& v, const HysteresisBounds& bounds) {
    ScalarTrajectory z = stop_apply(v, bounds);
    for (std::size_t i = 0; i < z.v.size(); ++i) z.v[i] = v.v[i] - z.v[i];
    return z;
}

// Directional derivative of the discrete stop at v in direction h.
// Positively homogeneous and Lipschitz in h. kink_tol separates true
// boundary contact from rounding; s is the pre-clamp value of the step.
inline ScalarTrajectory stop_directional_derivative(const ScalarTrajectory& v,
                                                    const ScalarTrajectory& h,
                                                    const HysteresisBounds& bounds,
                                                    double kink_tol = -1.0) {
    v.validate();
    h.validate();
    require_same_grid(v, h);
    bounds.validate();
    if (kink_tol < 0.0) kink_tol = bounds.default_kink_tol();

    ScalarTrajectory zeta;
    zeta.t = v.t;
    zeta.v.assign(v.v.size(), 0.0);
    double z = bounds.z0;
    for (std::size_t i = 0; i + 1 < v.v.size(); ++i) {
        const double s = z + (v.v[i + 1] - v.v[i]);
        const double c = zeta.v[i] + (h.v[i + 1] - h.v[i]);
        double next;
        if (s > bounds.b + kink_tol || s < bounds.a - kink_tol)
            next = 0.0;
        else if (std::abs(s - bounds.b) <= kink_tol)
            next = std::min(c, 0.0);
        else if (std::abs(s - bounds.a) <= kink_tol)
            next = std::max(c, 0.0);
        else
            next = c;
        zeta.v[i + 1] = next;
        z = bounds.clamp(s);
    }
    return zeta;
}

namespace detail {

// One implicit step of the penalty ODE:
//   x + (dt/eps) psi'(x) = w,   w = z_prev + dv.
// The left side is strictly increasing, so the root is unique. Newton with a
// bisection safeguard on the bracket; absolute residual below 1e-12.
inline double reg_stop_step(double w, double dt_over_eps, const PenaltyFunction& P,
                            std::size_t step) {
    if (w >= P.bounds.a && w <= P.bounds.b) return w;  // psi'(w) = 0, fixed point

    double lo, hi;
    if (w > P.bounds.b) {
        lo = P.bounds.b;
        hi = w;
    } else {
        lo = w;
        hi = P.bounds.a;
    }
    auto g = [&](double x) { return x + dt_over_eps * P.grad(x) - w; };

    double x = w;
    for (int it = 0; it < 50; ++it) {
        const double gx = g(x);
        if (std::abs(gx) <= 1e-12) return x;
        const double dgx = 1.0 + dt_over_eps * P.curv(x);
        double next = x - gx / dgx;
        if (gx > 0.0)
            hi = x;
        else
            lo = x;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        x = next;
    }
    if (std::abs(g(x)) <= 1e-12) return x;
    throw NumericalFailure("regularized stop: Newton did not converge", step);
}

}  // namespace detail

// Regularized stop Z_eps: backward-Euler steps of
//   dz - dv = -(1/eps) psi'(z),  z(0) = z0.
inline ScalarTrajectory reg_stop_apply(const ScalarTrajectory& v, double eps,
                                       const PenaltyFunction& P) {
    v.validate();
    if (!(eps > 0.0)) throw InvalidInput("regularized stop requires eps > 0");
    ScalarTrajectory z;
    z.t = v.t;
    z.v.resize(v.v.size());
    z.v[0] = P.bounds.z0;
    for (std::size_t i = 0; i + 1 < v.v.size(); ++i) {
        const double dt = v.t[i + 1] - v.t[i];
        const double w = z.v[i] + (v.v[i + 1] - v.v[i]);
        z.v[i + 1] = detail::reg_stop_step(w, dt / eps, P, i);
    }
    return z;
}

// Derivative of Z_eps at v in direction h, given z = Z_eps(v): implicit Euler
// for zeta' = h' - (1/eps) psi''(z) zeta, zeta(0) = 0. Linear in h and equal
// to the limit of difference quotients of reg_stop_apply.
inline ScalarTrajectory reg_stop_derivative(const ScalarTrajectory& v, const ScalarTrajectory& h,
                                            double eps, const PenaltyFunction& P,
                                            const ScalarTrajectory& z) {
    v.validate();
    h.validate();
    require_same_grid(v, h);
    require_same_grid(v, z);
    if (!(eps > 0.0)) throw InvalidInput("regularized stop derivative requires eps > 0");

    ScalarTrajectory zeta;
    zeta.t = v.t;
    zeta.v.assign(v.v.size(), 0.0);
    for (std::size_t i = 0; i + 1 < v.v.size(); ++i) {
        const double dt = v.t[i + 1] - v.t[i];
        const double c = zeta.v[i] + (h.v[i + 1] - h.v[i]);
        zeta.v[i + 1] = c / (1.0 + (dt / eps) * P.curv(z.v[i + 1]));
    }
    return zeta;
}

}  // namespace hystrol
