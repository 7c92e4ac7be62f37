#include <catch_amalgamated.hpp>

#include <cmath>

#include "hystrol/discretization.hpp"
#include "hystrol/rng.hpp"

using namespace hystrol;

namespace {

Field random_field(Rng& rng, std::size_t dof) { return rng.field(dof, 1.0); }

}  // namespace

TEST_CASE("diffusion assembly: textbook stencil with Dirichlet ends") {
    const SpatialGrid grid{3, 1, 1.0};
    const auto op = assemble_diffusion(grid, {1.0},
                                       ComponentBoundaryConfig::all(1, BoundaryKind::dirichlet));
    const double s = 1.0 / (grid.h() * grid.h());
    REQUIRE(grid.h() == Catch::Approx(0.25));
    const Tridiagonal& B = op.blocks[0];
    CHECK(B.diag[0] == Catch::Approx(2.0 * s));
    CHECK(B.diag[1] == Catch::Approx(2.0 * s));
    CHECK(B.diag[2] == Catch::Approx(2.0 * s));
    CHECK(B.lower[0] == Catch::Approx(-s));
    CHECK(B.upper[1] == Catch::Approx(-s));
}

TEST_CASE("diffusion assembly: pure Neumann rows sum to zero") {
    const SpatialGrid grid{16, 2, 1.0};
    const auto op = assemble_diffusion(grid, {0.7, 1.3},
                                       ComponentBoundaryConfig::all(2, BoundaryKind::neumann));
    const Field ones(grid.dof(), 1.0);
    const Field Aones = op.apply(ones);
    for (double v : Aones) CHECK(std::abs(v) <= 1e-12);
}

TEST_CASE("diffusion operator: symmetric in the mass inner product") {
    const SpatialGrid grid{24, 2, 1.0};
    ComponentBoundaryConfig bc;
    bc.left = {BoundaryKind::dirichlet, BoundaryKind::neumann};
    bc.right = {BoundaryKind::neumann, BoundaryKind::neumann};
    const auto op = assemble_diffusion(grid, {0.5, 2.0}, bc);
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Field x = random_field(rng, grid.dof());
        const Field y = random_field(rng, grid.dof());
        const double lhs = op.dot_mass(op.apply(x), y);
        const double rhs = op.dot_mass(x, op.apply(y));
        CHECK(lhs == Catch::Approx(rhs).epsilon(1e-12).margin(1e-12));
    }
}

TEST_CASE("implicit step is a contraction: spectral radius of (I + dt A)^{-1} <= 1") {
    const SpatialGrid grid{12, 1, 1.0};
    for (BoundaryKind kind : {BoundaryKind::dirichlet, BoundaryKind::neumann}) {
        const auto op = assemble_diffusion(grid, {1.0}, ComponentBoundaryConfig::all(1, kind));
        const ImplicitDiffusionSolver solver(op, 0.05);
        Rng rng(5);
        Field x = random_field(rng, grid.dof());
        double norm = 0.0;
        for (int it = 0; it < 200; ++it) {
            Field y;
            solver.solve(x, y);
            norm = op.norm_mass(y) / op.norm_mass(x);
            x = y;
            const double nx = op.norm_mass(x);
            for (double& v : x) v /= nx;
        }
        CHECK(norm <= 1.0 + 1e-12);
    }
}

TEST_CASE("implicit solver inverts I + dt A") {
    const SpatialGrid grid{32, 2, 1.0};
    ComponentBoundaryConfig bc;
    bc.left = {BoundaryKind::dirichlet, BoundaryKind::neumann};
    bc.right = {BoundaryKind::dirichlet, BoundaryKind::dirichlet};
    const auto op = assemble_diffusion(grid, {1.0, 0.3}, bc);
    const double dt = 0.01;
    const ImplicitDiffusionSolver solver(op, dt);
    Rng rng(7);
    const Field rhs = random_field(rng, grid.dof());
    Field x;
    solver.solve(rhs, x);
    const Field Ax = op.apply(x);
    for (std::size_t k = 0; k < rhs.size(); ++k)
        CHECK(x[k] + dt * Ax[k] == Catch::Approx(rhs[k]).epsilon(1e-12).margin(1e-12));
}

TEST_CASE("scalar projection: normalized on constants, brute-force quadrature") {
    const SpatialGrid grid{40, 2, 1.0};
    ComponentBoundaryConfig bc;
    bc.left = {BoundaryKind::dirichlet, BoundaryKind::neumann};
    bc.right = {BoundaryKind::neumann, BoundaryKind::dirichlet};
    const auto op = assemble_diffusion(grid, {1.0, 1.0}, bc);
    const auto S = make_mean_value_projection(op);

    const Field c7(grid.dof(), 7.0);
    CHECK(apply_S(c7, S, op) == Catch::Approx(7.0).epsilon(1e-13));
    const Field zero(grid.dof(), 0.0);
    CHECK(apply_S(zero, S, op) == 0.0);

    // weight dips in the cells adjacent to Dirichlet ends
    CHECK(S.w[grid.index(0, 0)] < S.w[grid.index(0, grid.n / 2)]);
    CHECK(S.w[grid.index(1, grid.n - 1)] < S.w[grid.index(1, grid.n / 2)]);

    Rng rng(9);
    const Field y = random_field(rng, grid.dof());
    double brute = 0.0;
    for (int j = 0; j < grid.m; ++j)
        for (int i = 0; i < grid.n; ++i)
            brute += grid.h() * S.w[grid.index(j, i)] * y[grid.index(j, i)];
    CHECK(apply_S(y, S, op) == Catch::Approx(brute).epsilon(1e-13).margin(1e-15));
}

TEST_CASE("scalar projection: linear with operator norm ||w||_mass") {
    const SpatialGrid grid{24, 2, 1.0};
    const auto op = assemble_diffusion(grid, {1.0, 1.0},
                                       ComponentBoundaryConfig::all(2, BoundaryKind::neumann));
    const auto S = make_mean_value_projection(op);
    const double wnorm = op.norm_mass(S.w);
    Rng rng(11);
    double best = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        Field y = random_field(rng, grid.dof());
        const double ny = op.norm_mass(y);
        best = std::max(best, std::abs(apply_S(y, S, op)) / ny);
        CHECK(std::abs(apply_S(y, S, op)) <= wnorm * ny + 1e-12);
    }
    // the bound is attained at y = w
    CHECK(apply_S(S.w, S, op) == Catch::Approx(wnorm * wnorm).epsilon(1e-12));
    CHECK(best <= wnorm + 1e-12);
}

TEST_CASE("control injectors: exact adjointness in the discrete pairings") {
    const SpatialGrid grid{20, 2, 1.0};
    ComponentBoundaryConfig bc;
    bc.left = {BoundaryKind::dirichlet, BoundaryKind::neumann};
    bc.right = {BoundaryKind::neumann, BoundaryKind::neumann};
    const auto op = assemble_diffusion(grid, {1.0, 1.0}, bc);
    Rng rng(13);

    SECTION("distributed: inject then restrict is the identity") {
        const auto B = make_distributed_injector(grid);
        const std::vector<double> u = rng.field(B.dim(), 1.0);
        Field f;
        B.inject(u, op, f);
        const std::vector<double> back = B.restrict_adjoint(f, op);
        for (std::size_t k = 0; k < u.size(); ++k) CHECK(back[k] == u[k]);
    }

    SECTION("adjoint identity over random pairs") {
        for (bool distributed : {true, false}) {
            const ControlInjector B = distributed ? make_distributed_injector(grid)
                                                  : make_boundary_injector(grid, bc);
            for (int trial = 0; trial < 100; ++trial) {
                const std::vector<double> u = rng.field(B.dim(), 2.0);
                const Field g = rng.field(grid.dof(), 2.0);
                Field Bu;
                B.inject(u, op, Bu);
                const double lhs = op.dot_mass(Bu, g);
                const double rhs = B.dot(u, B.restrict_adjoint(g, op), op);
                const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-30});
                CHECK(std::abs(lhs - rhs) / scale <= 1e-13);
            }
        }
    }

    SECTION("boundary restriction evaluates the trace") {
        const auto B = make_boundary_injector(grid, bc);
        REQUIRE(B.dim() == 3);  // 0:right, 1:left, 1:right
        const Field g = rng.field(grid.dof(), 1.0);
        const std::vector<double> r = B.restrict_adjoint(g, op);
        CHECK(r[0] == g[grid.index(0, grid.n - 1)]);
        CHECK(r[1] == g[grid.index(1, 0)]);
        CHECK(r[2] == g[grid.index(1, grid.n - 1)]);
    }
}

TEST_CASE("discretization error paths") {
    const SpatialGrid grid{8, 1, 1.0};
    CHECK_THROWS_AS(
        assemble_diffusion(grid, {-1.0}, ComponentBoundaryConfig::all(1, BoundaryKind::neumann)),
        InvalidInput);
    CHECK_THROWS_AS(
        assemble_diffusion(grid, {1.0, 1.0},
                           ComponentBoundaryConfig::all(1, BoundaryKind::neumann)),
        InvalidInput);
    const auto op =
        assemble_diffusion(grid, {1.0}, ComponentBoundaryConfig::all(1, BoundaryKind::dirichlet));
    const auto S = make_mean_value_projection(op);
    Field wrong(3, 0.0);
    CHECK_THROWS_AS(apply_S(wrong, S, op), InvalidInput);
    // boundary control on an all-Dirichlet domain has no admissible end
    CHECK_THROWS_AS(
        make_boundary_injector(grid, ComponentBoundaryConfig::all(1, BoundaryKind::dirichlet)),
        InvalidInput);
    const auto B = make_distributed_injector(grid);
    std::vector<double> bad(2, 0.0);
    Field out;
    CHECK_THROWS_AS(B.inject(bad, op, out), InvalidInput);
}
