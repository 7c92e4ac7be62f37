#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hystrol/io.hpp"
#include "hystrol/problem.hpp"
#include "hystrol/rng.hpp"

namespace hystrol {

// Exit codes of the experiment runner. Every failure path maps to one of
// these and leaves a machine-readable failure.json in the output directory.
enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,
    exit_config_parse = 2,
    exit_registry_miss = 3,
    exit_numerical_failure = 4,
    exit_convergence_failure = 5,
    exit_io_error = 6,
};

namespace detail {

inline ControlTrajectory initial_control(const Problem& pb) {
    if (!pb.cfg.init_control_path.empty()) {
        ControlTrajectory u = load_control_binary(pb.cfg.init_control_path);
        u.validate(pb.sys.B.dim());
        if (u.grid != pb.grid)
            throw InvalidInput("checkpoint control grid does not match the configured grid");
        return u;
    }
    return ControlTrajectory::zero(pb.grid, pb.sys.B.dim());
}

inline void write_manifest(const std::filesystem::path& dir, const std::string& mode,
                           const ExperimentConfig& cfg, double wall_seconds) {
    char hash[20];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(fnv1a_hash(serialize_config(cfg))));
    json j;
    j["mode"] = mode;
    j["version"] = kVersion;
    j["config_hash"] = std::string(hash);
    j["seed"] = cfg.seed;
    j["wall_seconds"] = wall_seconds;
    write_text_file(dir / "manifest.json", j.dump(2) + "\n");
}

inline std::vector<double> diagnostics_schedule(const ExperimentConfig& cfg) {
    // the tail of the eps schedule drives the limit diagnostics
    const std::size_t k = std::min<std::size_t>(3, cfg.eps_schedule.size());
    return {cfg.eps_schedule.end() - static_cast<std::ptrdiff_t>(k), cfg.eps_schedule.end()};
}

}  // namespace detail

struct AdjointCheckReport {
    std::vector<double> residuals;
    std::vector<double> residuals_coarse;  // same pairs at N/2
    double max_residual = 0.0;
    double max_residual_coarse = 0.0;
    double refinement_factor = 0.0;  // coarse / fine, first order gives ~2
};

// Seeded random (h, nu) pairs through both routes of the adjoint identity,
// repeated on the halved grid to expose the first-order consistency rate.
inline AdjointCheckReport run_adjoint_check(const Problem& pb, double eps, int pairs,
                                            std::uint64_t seed) {
    AdjointCheckReport rep;
    const TimeGrid coarse{pb.grid.T, pb.grid.N / 2};
    for (int pass = 0; pass < 2; ++pass) {
        const TimeGrid& grid = pass == 0 ? pb.grid : coarse;
        Rng rng(seed);  // same draws, resampled on each grid
        const ControlTrajectory u = rng.control(grid, pb.sys.B.dim(), 0.5);
        for (int k = 0; k < pairs; ++k) {
            const ControlTrajectory h = rng.control(grid, pb.sys.B.dim(), 1.0);
            const std::vector<Field> nu = rng.field_trajectory(grid, pb.sys.grid.dof(), 1.0);
            const double r = verify_adjoint_identity(pb.sys, u, eps, h, nu);
            (pass == 0 ? rep.residuals : rep.residuals_coarse).push_back(r);
        }
    }
    for (double r : rep.residuals) rep.max_residual = std::max(rep.max_residual, r);
    for (double r : rep.residuals_coarse)
        rep.max_residual_coarse = std::max(rep.max_residual_coarse, r);
    rep.refinement_factor =
        rep.max_residual > 0.0 ? rep.max_residual_coarse / rep.max_residual : 0.0;
    return rep;
}

struct GradientCheckEntry {
    double fd = 0.0;
    double adjoint = 0.0;
    double rel_mismatch = 0.0;
};

struct GradientCheckReport {
    std::vector<GradientCheckEntry> directions;
    double max_mismatch = 0.0;
};

// Central finite differences of J_reg against the reduced gradient along
// seeded random unit directions.
inline GradientCheckReport run_gradient_check(const Problem& pb, double eps, int directions,
                                              std::uint64_t seed, double fd_step = 1e-5,
                                              const TimeGrid* grid_override = nullptr) {
    const TimeGrid grid = grid_override ? *grid_override : pb.grid;
    GradientCheckReport rep;
    Rng rng(seed);
    const ControlTrajectory u = rng.control(grid, pb.sys.B.dim(), 0.5);
    const ControlTrajectory u_ref = ControlTrajectory::zero(grid, pb.sys.B.dim());
    const TargetTrajectory yd =
        grid_override ? make_target(pb.cfg.target_name, pb.sys.grid, grid,
                                    pb.cfg.target_amplitude, pb.cfg.target_ramp_time)
                      : pb.yd;

    const ReducedGradientResult base =
        reduced_gradient(pb.sys, u, eps, yd, pb.opt.kappa, 1.0, &u_ref);
    for (int k = 0; k < directions; ++k) {
        ControlTrajectory h = rng.control(grid, pb.sys.B.dim(), 1.0);
        const double hn = control_norm(pb.sys, h);
        if (hn > 0.0)
            for (auto& snap : h.u)
                for (double& x : snap) x /= hn;

        GradientCheckEntry e;
        e.adjoint = control_dot(pb.sys, base.grad, h);
        auto cost_at = [&](double lam) {
            const ControlTrajectory trial = control_axpy(u, lam, h);
            const StateTrajectory st = solve_state_regularized(pb.sys, trial, grid, eps);
            return reg_cost_eval(pb.sys, st, trial, yd, pb.opt.kappa, u_ref);
        };
        e.fd = (cost_at(fd_step) - cost_at(-fd_step)) / (2.0 * fd_step);
        e.rel_mismatch = std::abs(e.fd - e.adjoint) / std::max(std::abs(e.fd), 1e-14);
        rep.directions.push_back(e);
        rep.max_mismatch = std::max(rep.max_mismatch, e.rel_mismatch);
    }
    return rep;
}

struct LimitDiagnosticsArtifacts {
    PartitionReport partition;
    std::vector<StateTrajectory> states;
    std::vector<AdjointTrajectory> adjoints;
    std::vector<MeasureDensity> densities;
    StateTrajectory reference;
};

// Forward exact-stop reference run, then per-eps regularized state + adjoint
// at the misfit residual, partitioned and audited.
inline LimitDiagnosticsArtifacts run_limit_diagnostics(const Problem& pb,
                                                       const ControlTrajectory& u,
                                                       const std::vector<double>& eps_list,
                                                       const LimitDiagnosticsOptions& opts = {}) {
    LimitDiagnosticsArtifacts art;
    art.reference = solve_state(pb.sys, u, pb.grid);

    // the reference comes from the exact stop, whose saturated samples sit on
    // the bounds bit-exactly, so the eps-scaled default tolerance would only
    // smear the partition; 1e-6 is the floor that default carries
    const double tol_z = 1e-6;
    art.partition = partition_times(art.reference.z, pb.grid, pb.sys.bounds, tol_z);

    for (double eps : eps_list) {
        StateTrajectory st = solve_state_regularized(pb.sys, u, pb.grid, eps);
        std::vector<Field> residual(static_cast<std::size_t>(pb.grid.samples()),
                                    Field(pb.sys.grid.dof(), 0.0));
        for (std::size_t i = 0; i < residual.size(); ++i)
            for (std::size_t k = 0; k < residual[i].size(); ++k)
                residual[i][k] = st.y[i][k] - pb.yd[i][k];
        AdjointTrajectory adj = solve_adjoint_regularized(pb.sys, st, residual, eps);
        art.densities.push_back(mu_density(pb.sys, adj, st, eps, art.partition));
        art.states.push_back(std::move(st));
        art.adjoints.push_back(std::move(adj));
    }
    art.partition =
        limit_diagnostics(pb.sys, art.reference, art.states, art.adjoints, art.partition, opts);
    return art;
}

// ---------------------------------------------------------------------------
// CLI pipelines. Each writes its artifacts (and a manifest) to `out`.

inline int run_pipeline(const std::string& mode, const ExperimentConfig& cfg,
                        const std::filesystem::path& out) {
    const auto t0 = std::chrono::steady_clock::now();
    std::filesystem::create_directories(out);
    Problem pb = build_problem(cfg);

    if (mode == "solve-forward" || mode == "solve-regularized") {
        const ControlTrajectory u = detail::initial_control(pb);
        if (mode == "solve-forward") {
            const StateTrajectory st = solve_state(pb.sys, u, pb.grid);
            write_state_csv(out / "state.csv", st);
            if (!cfg.snapshot_times.empty())
                write_snapshot_csv(out / "snapshots.csv", pb.sys.grid, st, cfg.snapshot_times);
        } else {
            std::vector<StateTrajectory> states;
            for (double eps : cfg.eps_schedule) {
                states.push_back(solve_state_regularized(pb.sys, u, pb.grid, eps));
                char name[64];
                std::snprintf(name, sizeof(name), "state_eps_%g.csv", eps);
                write_state_csv(out / name, states.back());
            }
            const BoundAuditReport audit = bound_audit(pb.sys, states, u);
            write_text_file(out / "bound_audit.json", to_json(audit).dump(2) + "\n");
        }
    } else if (mode == "adjoint-check") {
        const AdjointCheckReport rep =
            run_adjoint_check(pb, cfg.eps_schedule.back(), cfg.check_pairs, cfg.seed);
        json j;
        j["eps"] = cfg.eps_schedule.back();
        j["pairs"] = cfg.check_pairs;
        j["residuals"] = rep.residuals;
        j["residuals_coarse"] = rep.residuals_coarse;
        j["max_residual"] = rep.max_residual;
        j["max_residual_coarse"] = rep.max_residual_coarse;
        j["refinement_factor"] = rep.refinement_factor;
        write_text_file(out / "adjoint_check.json", j.dump(2) + "\n");
    } else if (mode == "gradient-check") {
        const GradientCheckReport rep =
            run_gradient_check(pb, cfg.eps_schedule.back(), cfg.check_directions, cfg.seed);
        json j;
        j["eps"] = cfg.eps_schedule.back();
        j["max_mismatch"] = rep.max_mismatch;
        j["directions"] = json::array();
        for (const GradientCheckEntry& e : rep.directions)
            j["directions"].push_back(
                {{"fd", e.fd}, {"adjoint", e.adjoint}, {"rel_mismatch", e.rel_mismatch}});
        write_text_file(out / "gradient_check.json", j.dump(2) + "\n");
    } else if (mode == "optimize") {
        const ControlTrajectory init = detail::initial_control(pb);
        const MinimizeResult res = minimize_regularized(
            pb.sys, pb.yd, pb.opt.eps_schedule.back(), init, pb.opt, 0.0, nullptr);
        json j;
        j["eps"] = pb.opt.eps_schedule.back();
        j["cost"] = res.cost_plain;
        j["grad_norm"] = res.grad_norm;
        j["iterations"] = res.iterations;
        j["status"] = to_string(res.status);
        j["accepted_costs"] = res.accepted_costs;
        write_text_file(out / "optimize.json", j.dump(2) + "\n");
        write_state_csv(out / "state.csv", res.state);
        save_control_binary(out / "control.bin", res.u);
        if (res.status == MinimizeStatus::line_search_failure) {
            write_failure(out, {"convergence-failure", "line search stalled",
                                exit_convergence_failure});
            return exit_convergence_failure;
        }
    } else if (mode == "continuation") {
        const ControlTrajectory init = detail::initial_control(pb);
        const ContinuationReport rep = epsilon_continuation(pb.sys, pb.yd, init, pb.opt);
        write_text_file(out / "continuation.json", to_json(rep).dump(2) + "\n");
        save_control_binary(out / "control.bin", rep.u_final);
        const StateTrajectory st =
            solve_state_regularized(pb.sys, rep.u_final, pb.grid, cfg.eps_schedule.back());
        write_state_csv(out / "state.csv", st);
    } else if (mode == "limit-diagnostics") {
        ControlTrajectory u = detail::initial_control(pb);
        if (cfg.init_control_path.empty()) {
            const ContinuationReport rep = epsilon_continuation(pb.sys, pb.yd, u, pb.opt);
            u = rep.u_final;
        }
        const LimitDiagnosticsArtifacts art =
            run_limit_diagnostics(pb, u, detail::diagnostics_schedule(cfg));
        write_text_file(out / "limit_diagnostics.json",
                        to_json(art.partition, pb.grid).dump(2) + "\n");
        for (std::size_t i = 0; i < art.adjoints.size(); ++i) {
            char name[64];
            std::snprintf(name, sizeof(name), "adjoint_eps_%g.csv", art.adjoints[i].eps);
            write_adjoint_csv(out / name, art.adjoints[i], art.densities[i], art.partition);
        }
    } else if (mode == "value-scan") {
        if (!pb.opt.box) throw InvalidInput("value-scan requires control.box_lo / box_hi");
        const ControlTrajectory init = detail::initial_control(pb);
        Rng rng(cfg.seed);
        ControlTrajectory dir = rng.control(pb.grid, pb.sys.B.dim(), 1.0);
        const double dn = control_norm(pb.sys, dir);
        if (dn > 0.0)
            for (auto& snap : dir.u)
                for (double& x : snap) x /= dn;
        std::vector<ControlTrajectory> ray;
        for (int k = 0; k < cfg.scan_samples; ++k)
            ray.push_back(control_axpy(ControlTrajectory::zero(pb.grid, pb.sys.B.dim()),
                                       cfg.scan_step * k, dir));
        const ValueScanReport rep = value_function_scan(pb.sys, pb.yd, ray, init, pb.opt);
        write_text_file(out / "value_scan.json", to_json(rep).dump(2) + "\n");
        write_value_scan_csv(out / "value_scan.csv", rep);
    } else {
        throw InvalidInput("unknown mode '" + mode + "'");
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail::write_manifest(out, mode, cfg, wall);
    return exit_ok;
}

}  // namespace hystrol
