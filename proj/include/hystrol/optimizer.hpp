#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "hystrol/adjoint.hpp"
#include "hystrol/core.hpp"
#include "hystrol/dynamics.hpp"

namespace hystrol {

struct ControlBox {
    double lo = -1.0;
    double hi = 1.0;

    void validate() const {
        if (!(lo < hi)) throw InvalidInput("control box requires lo < hi");
    }
};

struct OptimizerConfig {
    double kappa = 1e-2;
    std::vector<double> eps_schedule = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
    int max_iters = 80;
    double armijo_init = 1.0;
    double armijo_shrink = 0.5;
    double armijo_c = 1e-4;
    int max_backtracks = 40;
    double grad_tol = 1e-6;
    std::optional<ControlBox> box;
    double stationarity_floor = 1.0;

    void validate() const {
        if (!(kappa > 0.0)) throw InvalidInput("kappa must be positive");
        if (eps_schedule.empty()) throw InvalidInput("eps schedule must be nonempty");
        for (std::size_t i = 0; i < eps_schedule.size(); ++i) {
            if (!(eps_schedule[i] > 0.0)) throw InvalidInput("eps schedule must be positive");
            if (i > 0 && !(eps_schedule[i] < eps_schedule[i - 1]))
                throw InvalidInput("eps schedule must be strictly decreasing");
        }
        if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0))
            throw InvalidInput("Armijo shrink factor must lie in (0, 1)");
        if (!(armijo_c > 0.0 && armijo_c < 1.0))
            throw InvalidInput("Armijo sufficient-decrease constant must lie in (0, 1)");
        if (!(armijo_init > 0.0)) throw InvalidInput("Armijo initial step must be positive");
        if (max_iters < 1 || max_backtracks < 1)
            throw InvalidInput("iteration limits must be at least one");
        if (!(grad_tol > 0.0)) throw InvalidInput("gradient tolerance must be positive");
        if (box) box->validate();
    }
};

inline ControlTrajectory project_control(const ControlTrajectory& u,
                                         const std::optional<ControlBox>& box) {
    if (!box) return u;
    ControlTrajectory out = u;
    for (auto& snap : out.u)
        for (double& x : snap) x = std::clamp(x, box->lo, box->hi);
    return out;
}

enum class MinimizeStatus { converged, iteration_cap, line_search_failure };

inline std::string to_string(MinimizeStatus s) {
    switch (s) {
        case MinimizeStatus::converged: return "converged";
        case MinimizeStatus::iteration_cap: return "iteration-cap";
        default: return "line-search-failure";
    }
}

struct MinimizeResult {
    ControlTrajectory u;
    StateTrajectory state;
    double cost_reg = 0.0;    // objective actually minimized
    double cost_plain = 0.0;  // J without the proximal part
    double grad_norm = 0.0;   // projected-gradient residual at the last iterate
    int iterations = 0;
    MinimizeStatus status = MinimizeStatus::converged;
    std::vector<double> accepted_costs;  // objective after every accepted step
};

// Projected gradient with Armijo backtracking on
//   u -> J(G_eps(B(u+shift)), u+shift) + (prox/2) ||u - u_ref||^2.
// The first step size satisfying the sufficient-decrease test wins; failure
// to find one returns the last iterate instead of throwing.
inline MinimizeResult minimize_regularized(const System& sys, const TargetTrajectory& yd,
                                           double eps, const ControlTrajectory& init,
                                           const OptimizerConfig& cfg, double prox_weight = 0.0,
                                           const ControlTrajectory* u_ref = nullptr,
                                           const ControlTrajectory* shift = nullptr) {
    cfg.validate();
    if (prox_weight != 0.0 && u_ref == nullptr)
        throw InvalidInput("proximal objective needs an anchor control");

    auto shifted = [&](const ControlTrajectory& u) {
        return shift ? control_axpy(u, 1.0, *shift) : u;
    };
    auto prox_term = [&](const ControlTrajectory& u) {
        if (prox_weight == 0.0) return 0.0;
        const ControlTrajectory d = control_axpy(u, -1.0, *u_ref);
        return 0.5 * prox_weight * control_dot(sys, d, d);
    };

    MinimizeResult res;
    res.u = project_control(init, cfg.box);
    res.state = solve_state_regularized(sys, shifted(res.u), init.grid, eps);
    res.cost_plain = cost_eval(sys, res.state, shifted(res.u), yd, cfg.kappa);
    res.cost_reg = res.cost_plain + prox_term(res.u);
    res.accepted_costs.push_back(res.cost_reg);
    res.status = MinimizeStatus::iteration_cap;

    for (int it = 0; it < cfg.max_iters; ++it) {
        ReducedGradientResult gr =
            reduced_gradient(sys, shifted(res.u), eps, yd, cfg.kappa, 0.0, nullptr);
        ControlTrajectory grad = gr.grad;
        if (prox_weight != 0.0) {
            const ControlTrajectory d = control_axpy(res.u, -1.0, *u_ref);
            grad = control_axpy(grad, prox_weight, d);
        }

        // projected-gradient residual: u - P(u - grad)
        const ControlTrajectory probe = project_control(control_axpy(res.u, -1.0, grad), cfg.box);
        res.grad_norm = control_norm(sys, control_axpy(res.u, -1.0, probe));
        res.iterations = it;
        if (res.grad_norm <= cfg.grad_tol) {
            res.status = MinimizeStatus::converged;
            return res;
        }

        double alpha = cfg.armijo_init;
        bool accepted = false;
        for (int bt = 0; bt < cfg.max_backtracks; ++bt, alpha *= cfg.armijo_shrink) {
            const ControlTrajectory trial =
                project_control(control_axpy(res.u, -alpha, grad), cfg.box);
            const ControlTrajectory step = control_axpy(res.u, -1.0, trial);
            const double step_sq = control_dot(sys, step, step);
            if (step_sq == 0.0) break;  // fully pinned by the box
            StateTrajectory trial_state;
            double trial_cost;
            try {
                trial_state = solve_state_regularized(sys, shifted(trial), init.grid, eps);
                trial_cost = cost_eval(sys, trial_state, shifted(trial), yd, cfg.kappa) +
                             prox_term(trial);
            } catch (const NumericalFailure&) {
                continue;  // step too aggressive, shrink and retry
            }
            if (trial_cost <= res.cost_reg - (cfg.armijo_c / alpha) * step_sq) {
                res.u = trial;
                res.state = std::move(trial_state);
                res.cost_reg = trial_cost;
                res.cost_plain = trial_cost - prox_term(trial);
                res.accepted_costs.push_back(trial_cost);
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            res.status = MinimizeStatus::line_search_failure;
            res.iterations = it + 1;
            return res;
        }
    }
    return res;
}

struct ContinuationLevel {
    double eps = 0.0;
    double cost_reg = 0.0;
    double cost_plain = 0.0;
    double dist_prev = 0.0;   // ||u_eps - u_prev|| in the control norm
    double grad_norm = 0.0;
    double stop_drift = 0.0;  // || z_eps - W[S y_eps] ||_inf
    int iterations = 0;
    std::string status;
};

struct ContinuationReport {
    std::vector<ContinuationLevel> levels;
    ControlTrajectory u_final;
    double final_cost = 0.0;          // non-proximal J at the final control
    double final_stationarity = 0.0;  // || B^*(p + S q) + kappa u || at the smallest eps
    double final_grad_norm = 0.0;
    bool all_converged = true;
};

inline double stop_consistency_drift(const System& sys, const StateTrajectory& state) {
    const ScalarTrajectory exact = stop_apply(state.Sy_trajectory(), sys.bounds);
    return sup_distance(state.z, exact.v);
}

// eps-continuation with warm starts. Each level anchors the proximal term at
// the previous level's minimizer (the computable stand-in for the unknown
// limit control). The last level is polished on the plain cost so the final
// iterate is stationary for J itself, which is what the limit optimality
// condition talks about.
inline ContinuationReport epsilon_continuation(const System& sys, const TargetTrajectory& yd,
                                               const ControlTrajectory& init,
                                               const OptimizerConfig& cfg,
                                               bool warm_start = true) {
    cfg.validate();
    ContinuationReport report;
    ControlTrajectory u_ref = project_control(init, cfg.box);
    ControlTrajectory u_prev = u_ref;

    for (double eps : cfg.eps_schedule) {
        const ControlTrajectory& start = warm_start ? u_prev : init;
        MinimizeResult res = minimize_regularized(sys, yd, eps, start, cfg, 1.0, &u_ref);
        ContinuationLevel lvl;
        lvl.eps = eps;
        lvl.cost_reg = res.cost_reg;
        lvl.cost_plain = res.cost_plain;
        lvl.dist_prev = control_norm(sys, control_axpy(res.u, -1.0, u_prev));
        lvl.grad_norm = res.grad_norm;
        lvl.stop_drift = stop_consistency_drift(sys, res.state);
        lvl.iterations = res.iterations;
        lvl.status = to_string(res.status);
        report.levels.push_back(lvl);
        report.all_converged =
            report.all_converged && res.status == MinimizeStatus::converged;
        u_ref = res.u;
        u_prev = res.u;
    }

    const double eps_min = cfg.eps_schedule.back();
    MinimizeResult polish = minimize_regularized(sys, yd, eps_min, u_prev, cfg, 0.0, nullptr);
    report.u_final = polish.u;
    report.final_cost = polish.cost_plain;
    report.final_grad_norm = polish.grad_norm;
    report.all_converged = report.all_converged && polish.status == MinimizeStatus::converged;
    const ReducedGradientResult gr =
        reduced_gradient(sys, report.u_final, eps_min, yd, cfg.kappa, 0.0, nullptr);
    report.final_stationarity = control_norm(sys, gr.grad);
    return report;
}

// || B^*(p + S q) + kappa u || / max(||kappa u||, floor) with the adjoint
// probed at eps_probe on the non-proximal cost.
inline double stationarity_residual(const System& sys, const TargetTrajectory& yd,
                                    const ControlTrajectory& u, double eps_probe, double kappa,
                                    double floor = 1.0) {
    const ReducedGradientResult gr = reduced_gradient(sys, u, eps_probe, yd, kappa, 0.0, nullptr);
    ControlTrajectory ku = u;
    for (auto& snap : ku.u)
        for (double& x : snap) x *= kappa;
    return control_norm(sys, gr.grad) / std::max(control_norm(sys, ku), floor);
}

struct ValueScanSample {
    double r_norm = 0.0;
    double value = 0.0;
    double minimizer_norm = 0.0;
    bool converged = false;
};

struct ValueScanReport {
    std::vector<ValueScanSample> samples;
    double empirical_modulus = 0.0;  // max |v_i - v_j| / ||r_i - r_j||
};

// Samples the perturbed value function v(r) = min_{u in C} J(G(B(u+r)), u+r)
// at the smallest schedule eps. The box C is mandatory: without compactness
// the continuity statement has no content.
inline ValueScanReport value_function_scan(const System& sys, const TargetTrajectory& yd,
                                           const std::vector<ControlTrajectory>& perturbations,
                                           const ControlTrajectory& init,
                                           const OptimizerConfig& cfg) {
    cfg.validate();
    if (!cfg.box) throw InvalidInput("value-function scan requires a control box");
    const double eps = cfg.eps_schedule.back();

    ValueScanReport report;
    for (const ControlTrajectory& r : perturbations) {
        ValueScanSample s;
        s.r_norm = control_norm(sys, r);
        try {
            MinimizeResult res =
                minimize_regularized(sys, yd, eps, init, cfg, 0.0, nullptr, &r);
            s.value = res.cost_plain;
            s.minimizer_norm = control_norm(sys, res.u);
            s.converged = res.status == MinimizeStatus::converged;
        } catch (const NumericalFailure&) {
            s.converged = false;
        }
        report.samples.push_back(s);
    }
    for (std::size_t i = 0; i < report.samples.size(); ++i)
        for (std::size_t j = i + 1; j < report.samples.size(); ++j) {
            if (!report.samples[i].converged || !report.samples[j].converged) continue;
            const double dr = control_norm(
                sys, control_axpy(perturbations[i], -1.0, perturbations[j]));
            if (dr <= 0.0) continue;
            report.empirical_modulus =
                std::max(report.empirical_modulus,
                         std::abs(report.samples[i].value - report.samples[j].value) / dr);
        }
    return report;
}

}  // namespace hystrol
