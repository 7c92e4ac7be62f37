#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hystrol/config.hpp"
#include "hystrol/core.hpp"
#include "hystrol/dynamics.hpp"
#include "hystrol/optimizer.hpp"

namespace hystrol {

// A fully assembled experiment: system, time grid, target and optimizer
// settings, all resolved from a config against the built-in registries.
struct Problem {
    System sys;
    TimeGrid grid;
    TargetTrajectory yd;
    OptimizerConfig opt;
    ExperimentConfig cfg;
};

namespace detail {

inline BoundaryKind parse_bc(const std::string& s) {
    if (s == "dirichlet") return BoundaryKind::dirichlet;
    if (s == "neumann") return BoundaryKind::neumann;
    throw InvalidInput("unknown boundary kind '" + s + "' (dirichlet | neumann)");
}

inline std::vector<BoundaryTarget> parse_targets(const std::vector<std::string>& tokens) {
    std::vector<BoundaryTarget> out;
    for (const std::string& tok : tokens) {
        const std::size_t colon = tok.find(':');
        if (colon == std::string::npos)
            throw InvalidInput("boundary target '" + tok + "' is not component:end");
        BoundaryTarget tg;
        tg.component = std::stoi(tok.substr(0, colon));
        const std::string end = tok.substr(colon + 1);
        if (end == "left") tg.left_end = true;
        else if (end == "right") tg.left_end = false;
        else throw InvalidInput("boundary target end must be left or right");
        out.push_back(tg);
    }
    return out;
}

}  // namespace detail

// Desired-state profiles. Amplitudes default to 1 per component.
inline TargetTrajectory make_target(const std::string& name, const SpatialGrid& grid,
                                    const TimeGrid& tg, std::vector<double> amplitude,
                                    double ramp_time) {
    if (amplitude.empty()) amplitude.assign(static_cast<std::size_t>(grid.m), 1.0);
    if (static_cast<int>(amplitude.size()) != grid.m)
        throw InvalidInput("target.amplitude needs one entry per component");

    TargetTrajectory yd(static_cast<std::size_t>(tg.samples()), Field(grid.dof(), 0.0));
    auto fill = [&](auto&& profile) {
        for (int n = 0; n <= tg.N; ++n) {
            Field& f = yd[static_cast<std::size_t>(n)];
            const double t = tg.time(n);
            for (int j = 0; j < grid.m; ++j)
                for (int i = 0; i < grid.n; ++i)
                    f[grid.index(j, i)] =
                        amplitude[static_cast<std::size_t>(j)] * profile(grid.node_x(i), t);
        }
    };
    const double pi = 3.14159265358979323846;
    if (name == "zero") {
        return yd;
    } else if (name == "sine-ramp") {
        // half-sine in space, saturating ramp in time
        fill([&](double x, double t) {
            const double ramp = ramp_time > 0.0 ? std::min(t / ramp_time, 1.0) : 1.0;
            return std::sin(pi * x / grid.length) * ramp;
        });
    } else if (name == "bump") {
        fill([&](double x, double) {
            const double r = (x - 0.5 * grid.length) / (0.25 * grid.length);
            return std::exp(-r * r);
        });
    } else if (name == "constant") {
        fill([](double, double) { return 1.0; });
    } else {
        throw InvalidInput("unknown target profile '" + name + "'");
    }
    return yd;
}

inline Problem build_problem(const ExperimentConfig& cfg) {
    cfg.validate();
    Problem pb;
    pb.cfg = cfg;

    pb.sys.grid = SpatialGrid{cfg.n, cfg.m, cfg.length};
    ComponentBoundaryConfig bc;
    for (const std::string& s : cfg.bc_left) bc.left.push_back(detail::parse_bc(s));
    for (const std::string& s : cfg.bc_right) bc.right.push_back(detail::parse_bc(s));
    pb.sys.op = assemble_diffusion(pb.sys.grid, cfg.diffusion, bc);
    pb.sys.S = make_mean_value_projection(pb.sys.op);
    pb.sys.bounds = HysteresisBounds{cfg.a, cfg.b, cfg.z0};
    pb.sys.penalty = PenaltyFunction(pb.sys.bounds);

    ModelSpec ms;
    ms.name = cfg.model_name;
    ms.coupling = cfg.model_coupling;
    ms.gains = cfg.model_gains;
    ms.kink_component = cfg.model_kink_component;
    pb.sys.model = make_model(ms, cfg.m);

    if (cfg.control_case == "distributed") {
        pb.sys.B = make_distributed_injector(pb.sys.grid);
    } else if (cfg.control_case == "boundary") {
        pb.sys.B = make_boundary_injector(pb.sys.grid, bc,
                                          detail::parse_targets(cfg.boundary_targets));
    } else {
        throw InvalidInput("unknown control case '" + cfg.control_case + "'");
    }

    pb.grid = TimeGrid{cfg.T, cfg.N};
    pb.yd = make_target(cfg.target_name, pb.sys.grid, pb.grid, cfg.target_amplitude,
                        cfg.target_ramp_time);

    pb.opt.kappa = cfg.kappa;
    pb.opt.eps_schedule = cfg.eps_schedule;
    pb.opt.max_iters = cfg.max_iters;
    pb.opt.armijo_init = cfg.armijo_init;
    pb.opt.armijo_shrink = cfg.armijo_shrink;
    pb.opt.armijo_c = cfg.armijo_c;
    pb.opt.max_backtracks = cfg.max_backtracks;
    pb.opt.grad_tol = cfg.grad_tol;
    if (cfg.box_lo) pb.opt.box = ControlBox{*cfg.box_lo, *cfg.box_hi};
    pb.opt.validate();
    return pb;
}

}  // namespace hystrol
