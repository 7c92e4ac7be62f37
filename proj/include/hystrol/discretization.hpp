#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hystrol/core.hpp"

namespace hystrol {

enum class BoundaryKind { dirichlet, neumann };

inline std::string to_string(BoundaryKind k) {
    return k == BoundaryKind::dirichlet ? "dirichlet" : "neumann";
}

// End conditions per component, [left, right].
struct ComponentBoundaryConfig {
    std::vector<BoundaryKind> left;
    std::vector<BoundaryKind> right;

    void validate(int m) const {
        if (static_cast<int>(left.size()) != m || static_cast<int>(right.size()) != m)
            throw InvalidInput("boundary config does not cover all components");
    }

    static ComponentBoundaryConfig all(int m, BoundaryKind k) {
        return {std::vector<BoundaryKind>(static_cast<std::size_t>(m), k),
                std::vector<BoundaryKind>(static_cast<std::size_t>(m), k)};
    }
};

// Uniform 1D grid: n interior nodes per component, m components, domain (0, length).
struct SpatialGrid {
    int n = 64;
    int m = 2;
    double length = 1.0;

    double h() const { return length / (n + 1); }
    std::size_t dof() const { return static_cast<std::size_t>(n) * static_cast<std::size_t>(m); }
    std::size_t index(int comp, int node) const {
        return static_cast<std::size_t>(comp) * static_cast<std::size_t>(n) +
               static_cast<std::size_t>(node);
    }
    double node_x(int node) const { return h() * (node + 1); }

    void validate() const {
        if (n < 1 || m < 1) throw InvalidInput("grid needs n >= 1 and m >= 1");
        if (!(length > 0.0)) throw InvalidInput("domain length must be positive");
    }
};

struct Tridiagonal {
    std::vector<double> lower;  // size n-1
    std::vector<double> diag;   // size n
    std::vector<double> upper;  // size n-1

    void apply(const double* x, double* y) const {
        const std::size_t n = diag.size();
        for (std::size_t i = 0; i < n; ++i) {
            double s = diag[i] * x[i];
            if (i > 0) s += lower[i - 1] * x[i - 1];
            if (i + 1 < n) s += upper[i] * x[i + 1];
            y[i] = s;
        }
    }
};

// Thomas factorization, reused across time steps. No pivoting: the matrices
// we factor (I + dt A) are strictly diagonally dominant.
struct TridiagonalFactor {
    std::vector<double> inv_diag;
    std::vector<double> lower;
    std::vector<double> upper;

    static TridiagonalFactor factorize(const Tridiagonal& A) {
        const std::size_t n = A.diag.size();
        TridiagonalFactor f;
        f.inv_diag.resize(n);
        f.lower = A.lower;
        f.upper = A.upper;
        double d = A.diag[0];
        if (d == 0.0) throw NumericalFailure("tridiagonal factorization breakdown", 0);
        f.inv_diag[0] = 1.0 / d;
        for (std::size_t i = 1; i < n; ++i) {
            const double l = A.lower[i - 1] * f.inv_diag[i - 1];
            f.lower[i - 1] = l;
            d = A.diag[i] - l * A.upper[i - 1];
            if (d == 0.0) throw NumericalFailure("tridiagonal factorization breakdown", i);
            f.inv_diag[i] = 1.0 / d;
        }
        return f;
    }

    void solve(const double* rhs, double* x) const {
        const std::size_t n = inv_diag.size();
        x[0] = rhs[0];
        for (std::size_t i = 1; i < n; ++i) x[i] = rhs[i] - lower[i - 1] * x[i - 1];
        x[n - 1] *= inv_diag[n - 1];
        for (std::size_t i = n - 1; i-- > 0;) x[i] = (x[i] - upper[i] * x[i + 1]) * inv_diag[i];
    }
};

// Block-diagonal finite-difference diffusion operator on the stacked field,
// one second-difference tridiagonal block per component. Neumann ends use
// ghost-node reflection. Symmetric positive semidefinite in the (lumped)
// mass inner product; definite as soon as a Dirichlet end is present.
struct DiffusionOperator {
    SpatialGrid grid;
    std::vector<double> coefficients;
    ComponentBoundaryConfig bc;
    std::vector<Tridiagonal> blocks;
    std::vector<double> mass;  // per-node quadrature weight, uniform h

    void apply(const Field& x, Field& y) const {
        check_size(x);
        y.resize(grid.dof());
        for (int j = 0; j < grid.m; ++j)
            blocks[static_cast<std::size_t>(j)].apply(x.data() + grid.index(j, 0),
                                                      y.data() + grid.index(j, 0));
    }

    Field apply(const Field& x) const {
        Field y;
        apply(x, y);
        return y;
    }

    double dot_mass(const Field& x, const Field& y) const {
        check_size(x);
        check_size(y);
        double s = 0.0;
        for (int j = 0; j < grid.m; ++j)
            for (int i = 0; i < grid.n; ++i) {
                const std::size_t k = grid.index(j, i);
                s += mass[static_cast<std::size_t>(i)] * x[k] * y[k];
            }
        return s;
    }

    double norm_mass(const Field& x) const { return std::sqrt(dot_mass(x, x)); }

    void check_size(const Field& x) const {
        if (x.size() != grid.dof()) throw InvalidInput("field size does not match grid");
    }
};

inline DiffusionOperator assemble_diffusion(const SpatialGrid& grid,
                                            const std::vector<double>& coefficients,
                                            const ComponentBoundaryConfig& bc) {
    grid.validate();
    bc.validate(grid.m);
    if (static_cast<int>(coefficients.size()) != grid.m)
        throw InvalidInput("need one diffusion coefficient per component");
    for (double d : coefficients)
        if (!(d > 0.0)) throw InvalidInput("diffusion coefficients must be positive");

    DiffusionOperator op;
    op.grid = grid;
    op.coefficients = coefficients;
    op.bc = bc;
    op.mass.assign(static_cast<std::size_t>(grid.n), grid.h());
    op.blocks.resize(static_cast<std::size_t>(grid.m));
    const double h2 = grid.h() * grid.h();
    for (int j = 0; j < grid.m; ++j) {
        const double s = coefficients[static_cast<std::size_t>(j)] / h2;
        Tridiagonal& B = op.blocks[static_cast<std::size_t>(j)];
        const std::size_t n = static_cast<std::size_t>(grid.n);
        B.diag.assign(n, 2.0 * s);
        B.lower.assign(n - 1, -s);
        B.upper.assign(n - 1, -s);
        if (bc.left[static_cast<std::size_t>(j)] == BoundaryKind::neumann) B.diag[0] = s;
        if (bc.right[static_cast<std::size_t>(j)] == BoundaryKind::neumann) B.diag[n - 1] = s;
        if (n == 1) {
            // single node: diag already accumulated both end contributions
            double d = 0.0;
            if (bc.left[static_cast<std::size_t>(j)] == BoundaryKind::dirichlet) d += s;
            if (bc.right[static_cast<std::size_t>(j)] == BoundaryKind::dirichlet) d += s;
            B.diag[0] = d;
        }
    }
    return op;
}

// Factorized (I + dt A), one Thomas factorization per component.
struct ImplicitDiffusionSolver {
    std::vector<TridiagonalFactor> factors;
    const DiffusionOperator* op = nullptr;

    ImplicitDiffusionSolver() = default;
    ImplicitDiffusionSolver(const DiffusionOperator& A, double dt) : op(&A) {
        factors.reserve(A.blocks.size());
        for (const Tridiagonal& B : A.blocks) {
            Tridiagonal M = B;
            for (double& l : M.lower) l *= dt;
            for (double& u : M.upper) u *= dt;
            for (double& d : M.diag) d = 1.0 + dt * d;
            factors.push_back(TridiagonalFactor::factorize(M));
        }
    }

    void solve(const Field& rhs, Field& x) const {
        x.resize(op->grid.dof());
        for (int j = 0; j < op->grid.m; ++j)
            factors[static_cast<std::size_t>(j)].solve(rhs.data() + op->grid.index(j, 0),
                                                       x.data() + op->grid.index(j, 0));
    }
};

// Scalar projection S y = <w, y>_mass with a mean-value-like weight. The
// default weight is 1 across the domain with a smooth cubic cut-off over the
// two cells next to each Dirichlet end, normalized so that S(1) = 1.
struct ScalarProjection {
    Field w;

    void validate(const SpatialGrid& grid) const {
        if (w.size() != grid.dof()) throw InvalidInput("projection weight size mismatch");
    }
};

inline ScalarProjection make_mean_value_projection(const DiffusionOperator& op) {
    const SpatialGrid& g = op.grid;
    ScalarProjection S;
    S.w.assign(g.dof(), 1.0);
    auto smoothstep = [](double r) {
        r = std::clamp(r, 0.0, 1.0);
        return r * r * (3.0 - 2.0 * r);
    };
    const double ramp = 2.0 * g.h();
    for (int j = 0; j < g.m; ++j) {
        for (int i = 0; i < g.n; ++i) {
            double w = 1.0;
            if (op.bc.left[static_cast<std::size_t>(j)] == BoundaryKind::dirichlet)
                w *= smoothstep(g.node_x(i) / ramp);
            if (op.bc.right[static_cast<std::size_t>(j)] == BoundaryKind::dirichlet)
                w *= smoothstep((g.length - g.node_x(i)) / ramp);
            S.w[g.index(j, i)] = w;
        }
    }
    Field ones(g.dof(), 1.0);
    double total = op.dot_mass(S.w, ones);
    if (!(total > 0.0)) throw InvalidInput("projection weight degenerate");
    for (double& w : S.w) w /= total;
    return S;
}

inline double apply_S(const Field& y, const ScalarProjection& S, const DiffusionOperator& op) {
    if (y.size() != S.w.size()) throw InvalidInput("apply_S: size mismatch");
    return op.dot_mass(S.w, y);
}

enum class ControlCase { distributed, boundary };

inline std::string to_string(ControlCase c) {
    return c == ControlCase::distributed ? "distributed" : "boundary";
}

struct BoundaryTarget {
    int component = 0;
    bool left_end = true;
};

// Control injection B and its mass-inner-product adjoint B^*.
//  - distributed: the control is a full stacked field; B is the identity
//    against the mass pairing, so B^* is plain restriction.
//  - boundary: one scalar per targeted Neumann end; the flux enters the end
//    node scaled by 1/h, and B^* evaluates the trace there with unit weight
//    (the 1D boundary measure is counting measure).
struct ControlInjector {
    ControlCase kind = ControlCase::distributed;
    SpatialGrid grid;
    std::vector<BoundaryTarget> targets;

    std::size_t dim() const {
        return kind == ControlCase::distributed ? grid.dof() : targets.size();
    }

    void inject(const std::vector<double>& u, const DiffusionOperator& op, Field& out) const {
        if (u.size() != dim()) throw InvalidInput("control snapshot has wrong shape");
        if (kind == ControlCase::distributed) {
            out = u;
            return;
        }
        out.assign(grid.dof(), 0.0);
        const double inv_h = 1.0 / grid.h();
        for (std::size_t k = 0; k < targets.size(); ++k) {
            const BoundaryTarget& tg = targets[k];
            const int node = tg.left_end ? 0 : grid.n - 1;
            out[grid.index(tg.component, node)] += u[k] * inv_h;
        }
        (void)op;
    }

    std::vector<double> restrict_adjoint(const Field& g, const DiffusionOperator& op) const {
        op.check_size(g);
        if (kind == ControlCase::distributed) return g;
        std::vector<double> u(targets.size());
        for (std::size_t k = 0; k < targets.size(); ++k) {
            const BoundaryTarget& tg = targets[k];
            const int node = tg.left_end ? 0 : grid.n - 1;
            u[k] = g[grid.index(tg.component, node)];
        }
        return u;
    }

    // control-space inner product of two snapshots
    double dot(const std::vector<double>& a, const std::vector<double>& b,
               const DiffusionOperator& op) const {
        if (a.size() != dim() || b.size() != dim())
            throw InvalidInput("control snapshot has wrong shape");
        if (kind == ControlCase::distributed) return op.dot_mass(a, b);
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
        return s;
    }
};

inline ControlInjector make_distributed_injector(const SpatialGrid& grid) {
    ControlInjector B;
    B.kind = ControlCase::distributed;
    B.grid = grid;
    return B;
}

inline ControlInjector make_boundary_injector(const SpatialGrid& grid,
                                              const ComponentBoundaryConfig& bc,
                                              std::vector<BoundaryTarget> targets = {}) {
    ControlInjector B;
    B.kind = ControlCase::boundary;
    B.grid = grid;
    if (targets.empty()) {
        for (int j = 0; j < grid.m; ++j) {
            if (bc.left[static_cast<std::size_t>(j)] == BoundaryKind::neumann)
                targets.push_back({j, true});
            if (bc.right[static_cast<std::size_t>(j)] == BoundaryKind::neumann)
                targets.push_back({j, false});
        }
    } else {
        for (const BoundaryTarget& tg : targets) {
            if (tg.component < 0 || tg.component >= grid.m)
                throw InvalidInput("boundary target component out of range");
            const BoundaryKind k = tg.left_end ? bc.left[static_cast<std::size_t>(tg.component)]
                                               : bc.right[static_cast<std::size_t>(tg.component)];
            if (k != BoundaryKind::neumann)
                throw InvalidInput("boundary control targets a Dirichlet end");
        }
    }
    if (targets.empty())
        throw InvalidInput("boundary control needs at least one Neumann end");
    B.targets = std::move(targets);
    return B;
}

}  // namespace hystrol
