#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hystrol/adjoint.hpp"
#include "hystrol/core.hpp"
#include "hystrol/dynamics.hpp"
#include "hystrol/optimizer.hpp"

namespace hystrol {

using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// full-precision decimal form, lossless on round-trip
inline std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::uint64_t fnv1a_hash(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// CSV with columns t, Sy, z plus one column per requested field snapshot
// time is the trajectory export format; snapshots go to separate files.
inline void write_state_csv(const std::filesystem::path& path, const StateTrajectory& st) {
    std::ostringstream out;
    out << "t,Sy,z\n";
    for (int n = 0; n <= st.grid.N; ++n) {
        const std::size_t i = static_cast<std::size_t>(n);
        out << format_full(st.grid.time(n)) << ',' << format_full(st.Sy[i]) << ','
            << format_full(st.z[i]) << '\n';
    }
    write_text_file(path, out.str());
}

inline void write_snapshot_csv(const std::filesystem::path& path, const SpatialGrid& grid,
                               const StateTrajectory& st, const std::vector<double>& times) {
    std::ostringstream out;
    out << "x";
    std::vector<int> steps;
    for (double t : times) {
        int n = static_cast<int>(std::lround(t / st.grid.dt()));
        n = std::clamp(n, 0, st.grid.N);
        steps.push_back(n);
        for (int j = 0; j < grid.m; ++j)
            out << ",y" << j << "_t" << format_full(st.grid.time(n));
    }
    out << '\n';
    for (int i = 0; i < grid.n; ++i) {
        out << format_full(grid.node_x(i));
        for (int n : steps)
            for (int j = 0; j < grid.m; ++j)
                out << ',' << format_full(st.y[static_cast<std::size_t>(n)][grid.index(j, i)]);
        out << '\n';
    }
    write_text_file(path, out.str());
}

inline void write_adjoint_csv(const std::filesystem::path& path, const AdjointTrajectory& adj,
                              const MeasureDensity& md, const PartitionReport& partition) {
    std::vector<std::string> label(adj.q.size(), "I0");
    for (const PartitionInterval& iv : partition.intervals)
        for (int n = iv.first; n <= iv.last; ++n)
            label[static_cast<std::size_t>(n)] = to_string(iv.kind);
    std::ostringstream out;
    out << "t,q,mu_density,partition\n";
    for (int n = 0; n <= adj.grid.N; ++n) {
        const std::size_t i = static_cast<std::size_t>(n);
        out << format_full(adj.grid.time(n)) << ',' << format_full(adj.q[i]) << ','
            << format_full(md.density[i]) << ',' << label[i] << '\n';
    }
    write_text_file(path, out.str());
}

// value-function table: r-index, ||r||, v, minimizer norm
inline void write_value_scan_csv(const std::filesystem::path& path, const ValueScanReport& r) {
    std::ostringstream out;
    out << "index,r_norm,value,minimizer_norm,converged\n";
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
        const ValueScanSample& s = r.samples[i];
        out << i << ',' << format_full(s.r_norm) << ',' << format_full(s.value) << ','
            << format_full(s.minimizer_norm) << ',' << (s.converged ? 1 : 0) << '\n';
    }
    write_text_file(path, out.str());
}

// ---------------------------------------------------------------------------
// binary checkpoint format for controls: magic, dims, raw doubles

inline void save_control_binary(const std::filesystem::path& path, const ControlTrajectory& u) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    const char magic[8] = {'H', 'Y', 'S', 'C', 'T', 'L', '0', '1'};
    out.write(magic, 8);
    const std::uint64_t samples = u.u.size();
    const std::uint64_t dim = samples ? u.u[0].size() : 0;
    const double T = u.grid.T;
    const std::uint64_t N = static_cast<std::uint64_t>(u.grid.N);
    out.write(reinterpret_cast<const char*>(&T), sizeof(T));
    out.write(reinterpret_cast<const char*>(&N), sizeof(N));
    out.write(reinterpret_cast<const char*>(&samples), sizeof(samples));
    out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    for (const auto& snap : u.u)
        out.write(reinterpret_cast<const char*>(snap.data()),
                  static_cast<std::streamsize>(snap.size() * sizeof(double)));
    if (!out) throw IoError("write failed for " + path.string());
}

inline ControlTrajectory load_control_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "HYSCTL01")
        throw IoError("not a control checkpoint: " + path.string());
    double T;
    std::uint64_t N, samples, dim;
    in.read(reinterpret_cast<char*>(&T), sizeof(T));
    in.read(reinterpret_cast<char*>(&N), sizeof(N));
    in.read(reinterpret_cast<char*>(&samples), sizeof(samples));
    in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
    if (!in || samples != N + 1) throw IoError("corrupt control checkpoint header");
    ControlTrajectory u;
    u.grid = TimeGrid{T, static_cast<int>(N)};
    u.u.assign(samples, std::vector<double>(dim));
    for (auto& snap : u.u) {
        in.read(reinterpret_cast<char*>(snap.data()),
                static_cast<std::streamsize>(dim * sizeof(double)));
        if (!in) throw IoError("corrupt control checkpoint payload");
    }
    return u;
}

// ---------------------------------------------------------------------------
// JSON report fragments

inline json to_json(const BoundAuditReport& r) {
    json j;
    j["control_norm"] = r.control_norm;
    j["fitted_c"] = r.fitted_c;
    j["all_within"] = r.all_within;
    j["entries"] = json::array();
    for (const BoundAuditEntry& e : r.entries)
        j["entries"].push_back({{"eps", e.eps},
                                {"dissipation", e.dissipation},
                                {"penalty_peak", e.penalty_peak},
                                {"audited", e.audited},
                                {"bound", e.bound},
                                {"within_bound", e.within_bound}});
    return j;
}

inline json to_json(const PartitionReport& r, const TimeGrid&) {
    json j;
    j["tol_z"] = r.tol_z;
    j["regularity_ok"] = r.regularity_ok;
    j["min_abs_Sydot_on_boundary"] = r.min_abs_Sydot_on_boundary;
    j["intervals"] = json::array();
    for (const PartitionInterval& iv : r.intervals)
        j["intervals"].push_back({{"kind", to_string(iv.kind)},
                                  {"t_begin", iv.t_begin},
                                  {"t_end", iv.t_end},
                                  {"first", iv.first},
                                  {"last", iv.last}});
    j["switching_times"] = json::array();
    for (const SwitchingTime& sw : r.switching_times)
        j["switching_times"].push_back(
            {{"t", sw.t}, {"kind", sw.into_boundary ? "(0,d)" : "(d,0)"}});
    j["per_eps"] = json::array();
    for (const EpsDiagnostics& d : r.per_eps)
        j["per_eps"].push_back({{"eps", d.eps},
                                {"complementarity", d.complementarity},
                                {"mu_mass_outside", d.mu_mass_outside},
                                {"sup_q_interior", d.sup_q_interior},
                                {"q_terminal", d.q_terminal},
                                {"jump_violations", d.jump_violations}});
    return j;
}

inline json to_json(const ContinuationReport& r) {
    json j;
    j["levels"] = json::array();
    for (const ContinuationLevel& l : r.levels)
        j["levels"].push_back({{"eps", l.eps},
                               {"cost_reg", l.cost_reg},
                               {"cost_plain", l.cost_plain},
                               {"dist_prev", l.dist_prev},
                               {"grad_norm", l.grad_norm},
                               {"stop_drift", l.stop_drift},
                               {"iterations", l.iterations},
                               {"status", l.status}});
    j["final_cost"] = r.final_cost;
    j["final_stationarity"] = r.final_stationarity;
    j["final_grad_norm"] = r.final_grad_norm;
    j["all_converged"] = r.all_converged;
    return j;
}

inline json to_json(const ValueScanReport& r) {
    json j;
    j["empirical_modulus"] = r.empirical_modulus;
    j["samples"] = json::array();
    for (const ValueScanSample& s : r.samples)
        j["samples"].push_back({{"r_norm", s.r_norm},
                                {"value", s.value},
                                {"minimizer_norm", s.minimizer_norm},
                                {"converged", s.converged}});
    return j;
}

struct FailureRecord {
    std::string kind;
    std::string message;
    int exit_code = 1;
};

inline void write_failure(const std::filesystem::path& dir, const FailureRecord& f) {
    json j;
    j["error"] = f.kind;
    j["message"] = f.message;
    j["exit_code"] = f.exit_code;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    write_text_file(dir / "failure.json", j.dump(2) + "\n");
}

}  // namespace hystrol
