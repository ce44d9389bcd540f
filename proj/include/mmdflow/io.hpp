#pragma once

// Measure JSON I/O, builtin measure specs, CSV export, content hashing,
// atomic file writes, deterministic float formatting.
//
// Measure JSON format (bit-exact contract for the CLI and tests):
//   {"atoms": [{"x": <real>, "w": <real>}, ...],
//    "uniforms": [{"a": <real>, "b": <real>, "w": <real>}, ...]}
// Masses must sum to 1 within 1e-9 on load; the loader rescales the tiny
// remainder so the in-memory measure is exactly normalized.

#include "mmdflow/errors.hpp"
#include "mmdflow/flow.hpp"
#include "mmdflow/measure.hpp"
#include "mmdflow/restricted.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace mmdflow {

// ============================================================================
// Float formatting
// ============================================================================

/// Fixed 12-significant-digit representation (CSV and CLI output contract).
inline std::string fmt12(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%#.12g", x);
    std::string s(buf);
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

// ============================================================================
// Measure JSON
// ============================================================================

inline Measure1D measure_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object())
        throw ParseError(where + ": top level must be an object");
    std::vector<Atom> atoms;
    std::vector<UniformPiece> uniforms;
    if (j.contains("atoms")) {
        if (!j["atoms"].is_array()) throw ParseError(where + ": \"atoms\" must be an array");
        for (std::size_t i = 0; i < j["atoms"].size(); ++i) {
            const auto& a = j["atoms"][i];
            if (!a.is_object() || !a.contains("x") || !a.contains("w") ||
                !a["x"].is_number() || !a["w"].is_number())
                throw ParseError(where + ": atoms[" + std::to_string(i) +
                                 "] needs numeric fields \"x\" and \"w\"");
            atoms.push_back({a["x"].get<double>(), a["w"].get<double>()});
        }
    }
    if (j.contains("uniforms")) {
        if (!j["uniforms"].is_array())
            throw ParseError(where + ": \"uniforms\" must be an array");
        for (std::size_t i = 0; i < j["uniforms"].size(); ++i) {
            const auto& u = j["uniforms"][i];
            if (!u.is_object() || !u.contains("a") || !u.contains("b") ||
                !u.contains("w") || !u["a"].is_number() || !u["b"].is_number() ||
                !u["w"].is_number())
                throw ParseError(where + ": uniforms[" + std::to_string(i) +
                                 "] needs numeric fields \"a\", \"b\", \"w\"");
            uniforms.push_back(
                {u["a"].get<double>(), u["b"].get<double>(), u["w"].get<double>()});
        }
    }
    double total = 0.0;
    for (const Atom& a : atoms) total += a.w;
    for (const UniformPiece& u : uniforms) total += u.w;
    if (std::abs(total - 1.0) > 1e-9)
        throw InvariantError(where + ": masses sum to " + std::to_string(total) +
                             ", expected 1 within 1e-9");
    for (Atom& a : atoms) a.w /= total;
    for (UniformPiece& u : uniforms) u.w /= total;
    return Measure1D(std::move(atoms), std::move(uniforms));
}

inline Measure1D load_measure_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    return measure_from_json(j, path);
}

inline nlohmann::json measure_to_json(const Measure1D& mu) {
    nlohmann::json j;
    j["atoms"] = nlohmann::json::array();
    for (const Atom& a : mu.atoms()) j["atoms"].push_back({{"x", a.x}, {"w", a.w}});
    j["uniforms"] = nlohmann::json::array();
    for (const UniformPiece& u : mu.uniforms())
        j["uniforms"].push_back({{"a", u.a}, {"b", u.b}, {"w", u.w}});
    return j;
}

/// Builtin specs accepted wherever a measure path is expected:
/// "dirac:<x>" and "uniform:<a>:<b>", otherwise treated as a JSON file path.
inline Measure1D parse_measure_spec(const std::string& spec) {
    auto parse_real = [&](const std::string& s) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw ParseError(spec + ": trailing characters in number");
            return v;
        } catch (const std::invalid_argument&) {
            throw ParseError(spec + ": expected a real number, got \"" + s + "\"");
        } catch (const std::out_of_range&) {
            throw ParseError(spec + ": number out of range: \"" + s + "\"");
        }
    };
    if (spec.rfind("dirac:", 0) == 0)
        return Measure1D::dirac(parse_real(spec.substr(6)));
    if (spec.rfind("uniform:", 0) == 0) {
        const std::string rest = spec.substr(8);
        const std::size_t sep = rest.find(':');
        if (sep == std::string::npos)
            throw ParseError(spec + ": expected uniform:<a>:<b>");
        const double a = parse_real(rest.substr(0, sep));
        const double b = parse_real(rest.substr(sep + 1));
        if (!(a < b)) throw InvariantError(spec + ": uniform needs a < b");
        return Measure1D::uniform(a, b);
    }
    return load_measure_json(spec);
}

// ============================================================================
// Hashing and atomic writes
// ============================================================================

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string fnv1a64_hex(const std::string& bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

/// Content hash of a measure spec: file bytes for paths, the spec string
/// itself for builtins.
inline std::string measure_spec_hash(const std::string& spec) {
    if (spec.rfind("dirac:", 0) == 0 || spec.rfind("uniform:", 0) == 0)
        return fnv1a64_hex(spec);
    std::ifstream in(spec, std::ios::binary);
    if (!in) throw ParseError(spec + ": cannot open file for hashing");
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a64_hex(ss.str());
}

/// Write-then-rename so partial output never lands under the final name.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ParseError(tmp.string() + ": cannot open for writing");
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

inline void save_measure_json(const std::filesystem::path& path, const Measure1D& mu) {
    atomic_write(path, measure_to_json(mu).dump(2) + "\n");
}

// ============================================================================
// CSV writers
// ============================================================================

/// Grid-trajectory CSV: header comments carry n, tau and the target hash;
/// data rows are (t, q_0 .. q_{n-1}).
inline std::string grid_trajectory_csv(const GridTrajectory& traj, double tau,
                                       const std::string& nu_hash) {
    std::ostringstream os;
    const int n = traj.states.empty() ? 0 : traj.states.front().n();
    os << "# n=" << n << "\n";
    os << "# tau=" << fmt12(tau) << "\n";
    os << "# nu_hash=" << nu_hash << "\n";
    os << "t";
    for (int i = 0; i < n; ++i) os << ",q_" << i;
    os << "\n";
    for (std::size_t r = 0; r < traj.size(); ++r) {
        os << fmt12(traj.times[r]);
        for (double v : traj.states[r].values) os << "," << fmt12(v);
        os << "\n";
    }
    return os.str();
}

/// Energy CSV: rows (t, F_nu).
template <typename StateT>
std::string energy_csv(const FlowTrajectory<StateT>& traj) {
    std::ostringstream os;
    os << "t,F_nu\n";
    for (std::size_t r = 0; r < traj.size(); ++r)
        os << fmt12(traj.times[r]) << "," << fmt12(traj.energies[r]) << "\n";
    return os.str();
}

/// Scalar (S1) trajectory CSV: rows (t, x).
inline std::string scalar_trajectory_csv(const ScalarTrajectory& traj) {
    std::ostringstream os;
    os << "t,x\n";
    for (std::size_t r = 0; r < traj.size(); ++r)
        os << fmt12(traj.times[r]) << "," << fmt12(traj.states[r]) << "\n";
    return os.str();
}

/// Parameter (S2) trajectory CSV: rows (t, m, sigma).
inline std::string param_trajectory_csv(const ParamTrajectory& traj) {
    std::ostringstream os;
    os << "t,m,sigma\n";
    for (std::size_t r = 0; r < traj.size(); ++r)
        os << fmt12(traj.times[r]) << "," << fmt12(traj.states[r].m) << ","
           << fmt12(traj.states[r].sigma) << "\n";
    return os.str();
}

/// Particle trajectory CSV: rows (t, x_0 .. x_{N-1}).
inline std::string particle_trajectory_csv(const ParticleTrajectory& traj) {
    std::ostringstream os;
    const std::size_t n = traj.states.empty() ? 0 : traj.states.front().size();
    os << "t";
    for (std::size_t i = 0; i < n; ++i) os << ",x_" << i;
    os << "\n";
    for (std::size_t r = 0; r < traj.size(); ++r) {
        os << fmt12(traj.times[r]);
        for (double v : traj.states[r]) os << "," << fmt12(v);
        os << "\n";
    }
    return os.str();
}

/// Landscape CSV: header row of m coordinates, header column of sigma
/// coordinates, matrix of F values.
inline std::string landscape_csv(const LandscapeGrid& grid) {
    std::ostringstream os;
    os << "sigma\\m";
    for (double m : grid.m_coords) os << "," << fmt12(m);
    os << "\n";
    for (std::size_t sj = 0; sj < grid.sigma_coords.size(); ++sj) {
        os << fmt12(grid.sigma_coords[sj]);
        for (std::size_t mi = 0; mi < grid.m_coords.size(); ++mi)
            os << "," << fmt12(grid.at(sj, mi));
        os << "\n";
    }
    return os.str();
}

} // namespace mmdflow
