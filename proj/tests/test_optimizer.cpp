#include <catch_amalgamated.hpp>

#include <cmath>

#include "hystrol/optimizer.hpp"
#include "hystrol/rng.hpp"
#include "lq_oracle.hpp"
#include "test_helpers.hpp"

using namespace hystrol;
using hystrol::testing::lq_normal_equations;
using hystrol::testing::make_system;
using hystrol::testing::SystemOptions;
using hystrol::testing::zero_target;

namespace {

TargetTrajectory scaled_sine_target(const System& sys, const TimeGrid& grid, double amp) {
    return make_target("sine-ramp", sys.grid, grid,
                       std::vector<double>(static_cast<std::size_t>(sys.grid.m), amp), 0.4);
}

OptimizerConfig small_config() {
    OptimizerConfig cfg;
    cfg.kappa = 1e-2;
    cfg.eps_schedule = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
    cfg.max_iters = 400;
    cfg.grad_tol = 2e-5;
    return cfg;
}

}  // namespace

TEST_CASE("optimizer: zero problem is solved by the zero control") {
    SystemOptions o;
    o.model = "zero";
    const System sys = make_system(o);
    const TimeGrid grid{1.0, 100};
    OptimizerConfig cfg = small_config();
    const ControlTrajectory init = ControlTrajectory::zero(grid, sys.B.dim());
    const MinimizeResult res =
        minimize_regularized(sys, zero_target(sys, grid), 1e-2, init, cfg, 1.0, &init);
    CHECK(res.status == MinimizeStatus::converged);
    CHECK(res.cost_reg == 0.0);
    CHECK(control_norm(sys, res.u) == 0.0);
}

TEST_CASE("optimizer: accepted objective values never increase") {
    const System sys = make_system();
    const TimeGrid grid{1.0, 200};
    OptimizerConfig cfg = small_config();
    cfg.max_iters = 25;
    cfg.grad_tol = 1e-12;  // force a full run
    const ControlTrajectory init = ControlTrajectory::zero(grid, sys.B.dim());
    const MinimizeResult res = minimize_regularized(
        sys, scaled_sine_target(sys, grid, 0.5), 1e-2, init, cfg, 0.0, nullptr);
    REQUIRE(res.accepted_costs.size() > 3);
    for (std::size_t i = 1; i < res.accepted_costs.size(); ++i)
        CHECK(res.accepted_costs[i] <= res.accepted_costs[i - 1]);
}

TEST_CASE("optimizer: projection is idempotent and respects the box") {
    const System sys = make_system();
    const TimeGrid grid{1.0, 40};
    Rng rng(51);
    const ControlTrajectory u = rng.control(grid, sys.B.dim(), 3.0);
    const std::optional<ControlBox> box = ControlBox{-0.5, 0.75};
    const ControlTrajectory p1 = project_control(u, box);
    const ControlTrajectory p2 = project_control(p1, box);
    for (std::size_t nn = 0; nn < p1.u.size(); ++nn)
        for (std::size_t k = 0; k < p1.u[nn].size(); ++k) {
            CHECK(p1.u[nn][k] >= -0.5);
            CHECK(p1.u[nn][k] <= 0.75);
            CHECK(p2.u[nn][k] == p1.u[nn][k]);
        }
}

TEST_CASE("optimizer: matches the dense normal-equations solution on the LQ problem") {
    SystemOptions o;
    o.model = "zero";
    o.m = 1;
    o.n = 8;
    o.gains = {0.0};
    const System sys = make_system(o);
    const TimeGrid grid{1.0, 60};
    const double kappa = 1.0, eps = 1e-2;
    const TargetTrajectory yd = scaled_sine_target(sys, grid, 0.05);

    OptimizerConfig cfg;
    cfg.kappa = kappa;
    cfg.eps_schedule = {eps};
    cfg.max_iters = 600;
    cfg.grad_tol = 1e-6;
    const ControlTrajectory init = ControlTrajectory::zero(grid, sys.B.dim());
    const MinimizeResult res = minimize_regularized(sys, yd, eps, init, cfg, 0.0, nullptr);
    REQUIRE(res.status == MinimizeStatus::converged);

    const ControlTrajectory exact = lq_normal_equations(sys, grid, yd, kappa, eps);
    const double dist = control_norm(sys, control_axpy(res.u, -1.0, exact));
    CHECK(dist <= 10.0 * cfg.grad_tol);

    // the oracle minimizer is stationary for the reduced gradient as well
    const ReducedGradientResult gr = reduced_gradient(sys, exact, eps, yd, kappa, 0.0, nullptr);
    CHECK(control_norm(sys, gr.grad) <= 10.0 * cfg.grad_tol);
}

TEST_CASE("optimizer: box-constrained run stays feasible and stationary") {
    SystemOptions o;
    o.model = "zero";
    o.m = 1;
    o.n = 8;
    o.gains = {0.0};
    const System sys = make_system(o);
    const TimeGrid grid{1.0, 60};
    OptimizerConfig cfg;
    cfg.kappa = 0.05;
    cfg.eps_schedule = {1e-2};
    cfg.max_iters = 800;
    cfg.grad_tol = 1e-6;
    cfg.box = ControlBox{-0.02, 0.02};  // active at the optimum
    const TargetTrajectory yd = scaled_sine_target(sys, grid, 0.5);
    const ControlTrajectory init = ControlTrajectory::zero(grid, sys.B.dim());
    const MinimizeResult res = minimize_regularized(sys, yd, 1e-2, init, cfg, 0.0, nullptr);
    REQUIRE(res.status == MinimizeStatus::converged);
    double hi = 0.0;
    for (const auto& snap : res.u.u)
        for (double x : snap) {
            CHECK(x >= -0.02 - 1e-15);
            CHECK(x <= 0.02 + 1e-15);
            hi = std::max(hi, x);
        }
    CHECK(hi == Catch::Approx(0.02));  // the bound binds
}

TEST_CASE("continuation: drift and Cauchy distances shrink along the schedule") {
    const System sys = make_system();  // smooth model with hysteresis feedback
    const TimeGrid grid{1.0, 400};
    OptimizerConfig cfg = small_config();
    // the optimize-then-discretize gradient carries an O(dt) bias, so the
    // reachable gradient norm has a floor around 2e-5 at this resolution
    cfg.grad_tol = 5e-5;
    const TargetTrajectory yd = scaled_sine_target(sys, grid, 1.1);  // saturating
    const ControlTrajectory init = ControlTrajectory::zero(grid, sys.B.dim());
    const ContinuationReport rep = epsilon_continuation(sys, yd, init, cfg);
    REQUIRE(rep.levels.size() == cfg.eps_schedule.size());
    CHECK(rep.all_converged);

    const std::size_t L = rep.levels.size();
    for (std::size_t k = L - 2; k < L; ++k) {
        CHECK(rep.levels[k].stop_drift <= rep.levels[k - 1].stop_drift + 1e-15);
        CHECK(rep.levels[k].dist_prev <= rep.levels[k - 1].dist_prev + 1e-15);
    }
    CHECK(rep.final_grad_norm <= cfg.grad_tol);

    // stationarity of the limit condition, probed at the smallest eps
    const double resid = stationarity_residual(sys, yd, rep.u_final,
                                               cfg.eps_schedule.back(), cfg.kappa);
    CHECK(resid <= 10.0 * cfg.grad_tol);

    // warm starts never lose to a cold start on the final plain cost
    const ContinuationReport cold = epsilon_continuation(sys, yd, init, cfg, false);
    CHECK(rep.final_cost <= cold.final_cost * 1.01 + 1e-12);
}

TEST_CASE("stationarity residual: zero problem gives zero") {
    SystemOptions o;
    o.model = "zero";
    const System sys = make_system(o);
    const TimeGrid grid{1.0, 80};
    const ControlTrajectory u0 = ControlTrajectory::zero(grid, sys.B.dim());
    CHECK(stationarity_residual(sys, zero_target(sys, grid), u0, 1e-3, 1e-2) == 0.0);
}

TEST_CASE("value scan: r = 0 reproduces the unperturbed optimum, box monotonicity") {
    SystemOptions o;
    o.model = "zero";
    o.m = 1;
    o.n = 8;
    o.gains = {0.0};
    const System sys = make_system(o);
    const TimeGrid grid{1.0, 60};
    OptimizerConfig cfg;
    cfg.kappa = 0.5;
    cfg.eps_schedule = {1e-2};
    cfg.max_iters = 600;
    cfg.grad_tol = 1e-7;
    cfg.box = ControlBox{-0.5, 0.5};
    const TargetTrajectory yd = scaled_sine_target(sys, grid, 0.2);
    const ControlTrajectory init = ControlTrajectory::zero(grid, sys.B.dim());

    // unperturbed reference through the plain minimizer
    MinimizeResult ref = minimize_regularized(sys, yd, 1e-2, init, cfg, 0.0, nullptr);
    REQUIRE(ref.status == MinimizeStatus::converged);

    Rng rng(53);
    ControlTrajectory dir = rng.control(grid, sys.B.dim(), 1.0);
    const double dn = control_norm(sys, dir);
    for (auto& snap : dir.u)
        for (double& x : snap) x /= dn;
    std::vector<ControlTrajectory> ray;
    for (int k = 0; k < 5; ++k)
        ray.push_back(control_axpy(ControlTrajectory::zero(grid, sys.B.dim()), 5e-3 * k, dir));

    const ValueScanReport scan = value_function_scan(sys, yd, ray, init, cfg);
    REQUIRE(scan.samples.size() == 5);
    for (const auto& s : scan.samples) CHECK(s.converged);
    CHECK(std::abs(scan.samples[0].value - ref.cost_plain) <=
          1e-6 * std::max(1.0, std::abs(ref.cost_plain)));

    // no jump beyond the empirical modulus over the ray
    for (std::size_t k = 1; k < scan.samples.size(); ++k) {
        const double step = control_norm(sys, control_axpy(ray[k], -1.0, ray[k - 1]));
        CHECK(std::abs(scan.samples[k].value - scan.samples[k - 1].value) <=
              scan.empirical_modulus * step + 1e-10);
    }

    // enlarging the box never increases v(0)
    OptimizerConfig wide = cfg;
    wide.box = ControlBox{-1.0, 1.0};
    const ValueScanReport scan0 = value_function_scan(sys, yd, {ray[0]}, init, cfg);
    const ValueScanReport scan_wide = value_function_scan(sys, yd, {ray[0]}, init, wide);
    CHECK(scan_wide.samples[0].value <= scan0.samples[0].value + 1e-10);
}

TEST_CASE("optimizer config validation") {
    OptimizerConfig cfg = small_config();
    cfg.eps_schedule = {1e-2, 1e-1};
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
    cfg = small_config();
    cfg.armijo_shrink = 1.5;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
    cfg = small_config();
    cfg.kappa = 0.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
    cfg = small_config();
    cfg.box = ControlBox{1.0, -1.0};
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}
