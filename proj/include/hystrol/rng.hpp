#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "hystrol/core.hpp"
#include "hystrol/dynamics.hpp"

namespace hystrol {

// Seeded draws for randomized checks. All artifact-facing randomness goes
// through this wrapper so a fixed seed reproduces every report bit for bit.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform(double lo, double hi) {
        // map the top 53 bits; avoids distribution objects with unspecified state
        const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    // piecewise-linear scalar trajectory with `knots` random breakpoints
    ScalarTrajectory piecewise_linear(const TimeGrid& grid, int knots, double amplitude) {
        if (knots < 2) knots = 2;
        std::vector<double> kt(static_cast<std::size_t>(knots));
        std::vector<double> kv(static_cast<std::size_t>(knots));
        kt.front() = 0.0;
        kt.back() = grid.T;
        for (std::size_t i = 1; i + 1 < kt.size(); ++i) kt[i] = uniform(0.0, grid.T);
        std::sort(kt.begin(), kt.end());
        for (double& v : kv) v = uniform(-amplitude, amplitude);

        ScalarTrajectory out = ScalarTrajectory::uniform(grid);
        std::size_t seg = 0;
        for (int n = 0; n <= grid.N; ++n) {
            const double t = grid.time(n);
            while (seg + 2 < kt.size() && t > kt[seg + 1]) ++seg;
            const double span = kt[seg + 1] - kt[seg];
            const double w = span > 0.0 ? (t - kt[seg]) / span : 0.0;
            out.v[static_cast<std::size_t>(n)] = kv[seg] + w * (kv[seg + 1] - kv[seg]);
        }
        return out;
    }

    Field field(std::size_t dof, double amplitude) {
        Field f(dof);
        for (double& x : f) x = uniform(-amplitude, amplitude);
        return f;
    }

    // smooth-in-time random control: per-dof piecewise-linear time profiles
    ControlTrajectory control(const TimeGrid& grid, std::size_t dim, double amplitude,
                              int knots = 6) {
        ControlTrajectory c = ControlTrajectory::zero(grid, dim);
        for (std::size_t k = 0; k < dim; ++k) {
            const ScalarTrajectory prof = piecewise_linear(grid, knots, amplitude);
            for (int n = 0; n <= grid.N; ++n)
                c.u[static_cast<std::size_t>(n)][k] = prof.v[static_cast<std::size_t>(n)];
        }
        return c;
    }

    std::vector<Field> field_trajectory(const TimeGrid& grid, std::size_t dof, double amplitude,
                                        int knots = 6) {
        std::vector<Field> out(static_cast<std::size_t>(grid.samples()), Field(dof, 0.0));
        for (std::size_t k = 0; k < dof; ++k) {
            const ScalarTrajectory prof = piecewise_linear(grid, knots, amplitude);
            for (int n = 0; n <= grid.N; ++n)
                out[static_cast<std::size_t>(n)][k] = prof.v[static_cast<std::size_t>(n)];
        }
        return out;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace hystrol
