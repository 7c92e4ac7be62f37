#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hystrol {

using Field = std::vector<double>;

// Thrown when an operation is handed structurally unusable data
// (mismatched grids, empty trajectories, bad bounds, ...).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Thrown when a solver breaks down mid-run. Carries the time-step index.
class NumericalFailure : public std::runtime_error {
public:
    NumericalFailure(const std::string& what, std::size_t step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

// Uniform time grid on [0, T] with N steps (N+1 sample points).
struct TimeGrid {
    double T = 1.0;
    int N = 1;

    double dt() const { return T / N; }
    double time(int n) const { return T * static_cast<double>(n) / N; }
    int samples() const { return N + 1; }

    // Trapezoid quadrature weight of sample n.
    double weight(int n) const {
        const double h = dt();
        return (n == 0 || n == N) ? 0.5 * h : h;
    }

    bool operator==(const TimeGrid& other) const = default;

    void validate() const {
        if (N < 1) throw InvalidInput("time grid needs at least one step");
        if (!(T > 0.0)) throw InvalidInput("horizon T must be positive");
    }
};

// Scalar function of time sampled on a strictly increasing grid.
// The hysteresis operators work on arbitrary grids; the PDE solvers
// always use uniform ones.
struct ScalarTrajectory {
    std::vector<double> t;
    std::vector<double> v;

    std::size_t size() const { return t.size(); }

    void validate() const {
        if (t.size() != v.size())
            throw InvalidInput("scalar trajectory: grid and value lengths differ");
        if (t.size() < 2)
            throw InvalidInput("scalar trajectory: need at least two samples");
        for (std::size_t i = 1; i < t.size(); ++i)
            if (!(t[i] > t[i - 1]))
                throw InvalidInput("scalar trajectory: grid not strictly increasing");
    }

    static ScalarTrajectory uniform(const TimeGrid& grid, double value = 0.0) {
        ScalarTrajectory out;
        out.t.resize(grid.samples());
        out.v.assign(grid.samples(), value);
        for (int n = 0; n <= grid.N; ++n) out.t[static_cast<std::size_t>(n)] = grid.time(n);
        return out;
    }
};

inline void require_same_grid(const ScalarTrajectory& x, const ScalarTrajectory& y) {
    if (x.t.size() != y.t.size())
        throw InvalidInput("trajectories on different grids (length mismatch)");
    for (std::size_t i = 0; i < x.t.size(); ++i)
        if (x.t[i] != y.t[i]) throw InvalidInput("trajectories on different grids");
}

inline double sup_norm(const std::vector<double>& x) {
    double m = 0.0;
    for (double xi : x) m = std::max(m, std::abs(xi));
    return m;
}

inline double sup_distance(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw InvalidInput("sup_distance: length mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
    return m;
}

inline bool has_nan(const Field& x) {
    for (double xi : x)
        if (!std::isfinite(xi)) return true;
    return false;
}

}  // namespace hystrol
