#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hystrol/core.hpp"

namespace hystrol {

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, std::size_t line)
        : std::runtime_error("config line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_ = 0;
};

// Flat key = value experiment configuration with dotted section prefixes.
// Unknown keys are rejected with the offending line so stale experiment
// files fail loudly instead of silently running defaults.
struct ExperimentConfig {
    // domain
    int n = 64;
    int m = 2;
    double T = 1.0;
    int N = 2000;
    double length = 1.0;
    std::vector<double> diffusion = {0.1, 0.15};
    std::vector<std::string> bc_left = {"dirichlet", "neumann"};
    std::vector<std::string> bc_right = {"neumann", "neumann"};

    // hysteresis
    double a = -0.4;
    double b = 0.4;
    double z0 = 0.0;

    // model
    std::string model_name = "linear-coupling";
    std::vector<double> model_coupling = {};
    std::vector<double> model_gains = {};
    int model_kink_component = 0;

    // control
    std::string control_case = "distributed";
    double kappa = 1e-2;
    std::optional<double> box_lo;
    std::optional<double> box_hi;
    std::vector<std::string> boundary_targets = {};  // tokens like 0:left

    // target
    std::string target_name = "sine-ramp";
    std::vector<double> target_amplitude = {};
    double target_ramp_time = 0.4;

    // run
    std::vector<double> eps_schedule = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
    int max_iters = 80;
    double armijo_init = 1.0;
    double armijo_shrink = 0.5;
    double armijo_c = 1e-4;
    int max_backtracks = 40;
    double grad_tol = 1e-6;
    std::uint64_t seed = 1;
    int check_pairs = 20;       // adjoint-check pairs
    int check_directions = 5;   // gradient-check directions
    double scan_step = 5e-3;    // value-scan ray increment
    int scan_samples = 5;
    std::string init_control_path;  // optional binary checkpoint to start from

    // output
    std::string output_dir = "out";
    std::vector<std::string> output_formats = {"csv", "json"};
    std::vector<double> snapshot_times = {};

    void validate() const {
        if (n < 1) throw InvalidInput("domain.n must be >= 1");
        if (m < 1) throw InvalidInput("domain.m must be >= 1");
        if (!(T > 0.0)) throw InvalidInput("domain.T must be positive");
        if (N < 1) throw InvalidInput("domain.N must be >= 1");
        if (!(length > 0.0)) throw InvalidInput("domain.length must be positive");
        if (!(a < b)) throw InvalidInput("hysteresis bounds need a < b");
        if (z0 < a || z0 > b) throw InvalidInput("hysteresis.z0 outside [a, b]");
        if (static_cast<int>(diffusion.size()) != m)
            throw InvalidInput("domain.diffusion needs one entry per component");
        if (static_cast<int>(bc_left.size()) != m || static_cast<int>(bc_right.size()) != m)
            throw InvalidInput("boundary kinds need one entry per component");
        if (box_lo.has_value() != box_hi.has_value())
            throw InvalidInput("control box needs both lo and hi");
        if (box_lo && !(*box_lo < *box_hi)) throw InvalidInput("control box needs lo < hi");
        if (!(kappa > 0.0)) throw InvalidInput("control.kappa must be positive");
        for (std::size_t i = 0; i < eps_schedule.size(); ++i) {
            if (!(eps_schedule[i] > 0.0)) throw InvalidInput("run.eps_schedule must be positive");
            if (i > 0 && !(eps_schedule[i] < eps_schedule[i - 1]))
                throw InvalidInput("run.eps_schedule must be strictly decreasing");
        }
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double parse_real(const std::string& s, std::size_t line) {
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ConfigError("expected a number, got '" + s + "'", line);
    }
    if (pos != s.size()) throw ConfigError("trailing characters after number '" + s + "'", line);
    return v;
}

inline long long parse_int(const std::string& s, std::size_t line) {
    std::size_t pos = 0;
    long long v;
    try {
        v = std::stoll(s, &pos);
    } catch (const std::exception&) {
        throw ConfigError("expected an integer, got '" + s + "'", line);
    }
    if (pos != s.size()) throw ConfigError("trailing characters after integer '" + s + "'", line);
    return v;
}

inline std::vector<double> parse_real_list(const std::string& s, std::size_t line) {
    std::vector<double> out;
    for (const std::string& tok : split_list(s)) out.push_back(parse_real(tok, line));
    return out;
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value", lineno);
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key", lineno);
        if (val.empty()) throw ConfigError("empty value for key '" + key + "'", lineno);

        using detail::parse_int;
        using detail::parse_real;
        using detail::parse_real_list;
        using detail::split_list;

        if (key == "domain.n") cfg.n = static_cast<int>(parse_int(val, lineno));
        else if (key == "domain.m") cfg.m = static_cast<int>(parse_int(val, lineno));
        else if (key == "domain.T") cfg.T = parse_real(val, lineno);
        else if (key == "domain.N") cfg.N = static_cast<int>(parse_int(val, lineno));
        else if (key == "domain.length") cfg.length = parse_real(val, lineno);
        else if (key == "domain.diffusion") cfg.diffusion = parse_real_list(val, lineno);
        else if (key == "domain.bc_left") cfg.bc_left = split_list(val);
        else if (key == "domain.bc_right") cfg.bc_right = split_list(val);
        else if (key == "hysteresis.a") cfg.a = parse_real(val, lineno);
        else if (key == "hysteresis.b") cfg.b = parse_real(val, lineno);
        else if (key == "hysteresis.z0") cfg.z0 = parse_real(val, lineno);
        else if (key == "model.name") cfg.model_name = val;
        else if (key == "model.coupling") cfg.model_coupling = parse_real_list(val, lineno);
        else if (key == "model.gains") cfg.model_gains = parse_real_list(val, lineno);
        else if (key == "model.kink_component")
            cfg.model_kink_component = static_cast<int>(parse_int(val, lineno));
        else if (key == "control.case") cfg.control_case = val;
        else if (key == "control.kappa") cfg.kappa = parse_real(val, lineno);
        else if (key == "control.box_lo") cfg.box_lo = parse_real(val, lineno);
        else if (key == "control.box_hi") cfg.box_hi = parse_real(val, lineno);
        else if (key == "control.boundary_targets") cfg.boundary_targets = split_list(val);
        else if (key == "target.name") cfg.target_name = val;
        else if (key == "target.amplitude") cfg.target_amplitude = parse_real_list(val, lineno);
        else if (key == "target.ramp_time") cfg.target_ramp_time = parse_real(val, lineno);
        else if (key == "run.eps_schedule") cfg.eps_schedule = parse_real_list(val, lineno);
        else if (key == "run.max_iters") cfg.max_iters = static_cast<int>(parse_int(val, lineno));
        else if (key == "run.armijo_init") cfg.armijo_init = parse_real(val, lineno);
        else if (key == "run.armijo_shrink") cfg.armijo_shrink = parse_real(val, lineno);
        else if (key == "run.armijo_c") cfg.armijo_c = parse_real(val, lineno);
        else if (key == "run.max_backtracks")
            cfg.max_backtracks = static_cast<int>(parse_int(val, lineno));
        else if (key == "run.grad_tol") cfg.grad_tol = parse_real(val, lineno);
        else if (key == "run.seed") cfg.seed = static_cast<std::uint64_t>(parse_int(val, lineno));
        else if (key == "run.check_pairs")
            cfg.check_pairs = static_cast<int>(parse_int(val, lineno));
        else if (key == "run.check_directions")
            cfg.check_directions = static_cast<int>(parse_int(val, lineno));
        else if (key == "run.scan_step") cfg.scan_step = parse_real(val, lineno);
        else if (key == "run.scan_samples")
            cfg.scan_samples = static_cast<int>(parse_int(val, lineno));
        else if (key == "run.init_control") cfg.init_control_path = val;
        else if (key == "output.dir") cfg.output_dir = val;
        else if (key == "output.formats") cfg.output_formats = split_list(val);
        else if (key == "output.snapshot_times") cfg.snapshot_times = parse_real_list(val, lineno);
        else throw ConfigError("unknown key '" + key + "'", lineno);
    }
    try {
        cfg.validate();
    } catch (const InvalidInput& e) {
        throw ConfigError(e.what(), lineno);
    }
    return cfg;
}

namespace detail {

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string join_reals(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += format_real(v[i]);
    }
    return out;
}

inline std::string join_strings(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += v[i];
    }
    return out;
}

}  // namespace detail

// Canonical text form; parse(serialize(cfg)) reproduces cfg exactly.
inline std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "domain.n = " << cfg.n << "\n";
    out << "domain.m = " << cfg.m << "\n";
    out << "domain.T = " << detail::format_real(cfg.T) << "\n";
    out << "domain.N = " << cfg.N << "\n";
    out << "domain.length = " << detail::format_real(cfg.length) << "\n";
    out << "domain.diffusion = " << detail::join_reals(cfg.diffusion) << "\n";
    out << "domain.bc_left = " << detail::join_strings(cfg.bc_left) << "\n";
    out << "domain.bc_right = " << detail::join_strings(cfg.bc_right) << "\n";
    out << "hysteresis.a = " << detail::format_real(cfg.a) << "\n";
    out << "hysteresis.b = " << detail::format_real(cfg.b) << "\n";
    out << "hysteresis.z0 = " << detail::format_real(cfg.z0) << "\n";
    out << "model.name = " << cfg.model_name << "\n";
    if (!cfg.model_coupling.empty())
        out << "model.coupling = " << detail::join_reals(cfg.model_coupling) << "\n";
    if (!cfg.model_gains.empty())
        out << "model.gains = " << detail::join_reals(cfg.model_gains) << "\n";
    out << "model.kink_component = " << cfg.model_kink_component << "\n";
    out << "control.case = " << cfg.control_case << "\n";
    out << "control.kappa = " << detail::format_real(cfg.kappa) << "\n";
    if (cfg.box_lo) out << "control.box_lo = " << detail::format_real(*cfg.box_lo) << "\n";
    if (cfg.box_hi) out << "control.box_hi = " << detail::format_real(*cfg.box_hi) << "\n";
    if (!cfg.boundary_targets.empty())
        out << "control.boundary_targets = " << detail::join_strings(cfg.boundary_targets) << "\n";
    out << "target.name = " << cfg.target_name << "\n";
    if (!cfg.target_amplitude.empty())
        out << "target.amplitude = " << detail::join_reals(cfg.target_amplitude) << "\n";
    out << "target.ramp_time = " << detail::format_real(cfg.target_ramp_time) << "\n";
    out << "run.eps_schedule = " << detail::join_reals(cfg.eps_schedule) << "\n";
    out << "run.max_iters = " << cfg.max_iters << "\n";
    out << "run.armijo_init = " << detail::format_real(cfg.armijo_init) << "\n";
    out << "run.armijo_shrink = " << detail::format_real(cfg.armijo_shrink) << "\n";
    out << "run.armijo_c = " << detail::format_real(cfg.armijo_c) << "\n";
    out << "run.max_backtracks = " << cfg.max_backtracks << "\n";
    out << "run.grad_tol = " << detail::format_real(cfg.grad_tol) << "\n";
    out << "run.seed = " << cfg.seed << "\n";
    out << "run.check_pairs = " << cfg.check_pairs << "\n";
    out << "run.check_directions = " << cfg.check_directions << "\n";
    out << "run.scan_step = " << detail::format_real(cfg.scan_step) << "\n";
    out << "run.scan_samples = " << cfg.scan_samples << "\n";
    if (!cfg.init_control_path.empty())
        out << "run.init_control = " << cfg.init_control_path << "\n";
    out << "output.dir = " << cfg.output_dir << "\n";
    out << "output.formats = " << detail::join_strings(cfg.output_formats) << "\n";
    if (!cfg.snapshot_times.empty())
        out << "output.snapshot_times = " << detail::join_reals(cfg.snapshot_times) << "\n";
    return out.str();
}

}  // namespace hystrol
