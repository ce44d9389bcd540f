// mmdflow: Wasserstein-2 geometry and MMD gradient flows for measures on the
// line, through the quantile-function embedding.
//
// Subcommands: w2, mmd, flow-dirac, subgrad-flow, jko, restricted, landscape.
// Exit codes: 0 success, 2 parse error, 3 invariant violation, 4 numeric
// failure.

#include "mmdflow/energy.hpp"
#include "mmdflow/flow.hpp"
#include "mmdflow/io.hpp"
#include "mmdflow/measure.hpp"
#include "mmdflow/restricted.hpp"
#include "mmdflow/svg.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace mmdflow;

namespace {

int thread_budget() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("MMDFLOW_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap > 0 && static_cast<unsigned>(cap) < hw) hw = static_cast<unsigned>(cap);
    }
    return static_cast<int>(hw);
}

std::vector<double> parse_time_list(const std::string& spec) {
    std::vector<double> ts;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            ts.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ParseError("invalid time value \"" + item + "\" in --times");
        }
    }
    if (ts.empty()) throw ParseError("--times: no values given");
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (ts[i] < 0.0) throw InvariantError("--times: times must be nonnegative");
        if (i > 0 && ts[i] < ts[i - 1])
            throw InvariantError("--times: times must be ascending");
    }
    return ts;
}

std::pair<double, double> parse_range(const std::string& spec, const std::string& flag) {
    const std::size_t sep = spec.find(':');
    if (sep == std::string::npos)
        throw ParseError(flag + ": expected <lo>:<hi>, got \"" + spec + "\"");
    try {
        const double lo = std::stod(spec.substr(0, sep));
        const double hi = std::stod(spec.substr(sep + 1));
        if (!(lo < hi)) throw InvariantError(flag + ": requires lo < hi");
        return {lo, hi};
    } catch (const std::invalid_argument&) {
        throw ParseError(flag + ": invalid numbers in \"" + spec + "\"");
    }
}

Kernel parse_kernel(const std::string& id) {
    if (id == "distance") return Kernel::distance();
    if (id == "smooth") return Kernel::smooth();
    throw ParseError("kernel must be \"distance\" or \"smooth\", got \"" + id + "\"");
}

void ensure_out_dir(const std::string& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw ParseError(out + ": cannot create output directory");
}

/// Merge `--config file.json` key/values as defaults: any key not already
/// present on the command line is appended as --key=value.
std::vector<std::string> apply_config(std::vector<std::string> args) {
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config_path = args[i + 1];
            args.erase(args.begin() + static_cast<long>(i),
                       args.begin() + static_cast<long>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
            args.erase(args.begin() + static_cast<long>(i));
            break;
        }
    }
    if (config_path.empty()) return args;
    std::ifstream in(config_path);
    if (!in) throw ParseError(config_path + ": cannot open config");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(config_path + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(config_path + ": config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        const std::string flag = "--" + key;
        bool present = false;
        for (const std::string& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) present = true;
        if (present) continue;
        std::string sval;
        if (value.is_string())
            sval = value.get<std::string>();
        else
            sval = value.dump();
        args.push_back(flag + "=" + sval);
    }
    return args;
}

// ----------------------------------------------------------------------------
// Subcommand implementations
// ----------------------------------------------------------------------------

void cmd_w2(const std::string& mu_spec, const std::string& nu_spec) {
    const Measure1D mu = parse_measure_spec(mu_spec);
    const Measure1D nu = parse_measure_spec(nu_spec);
    std::cout << fmt12(w2(mu, nu)) << "\n";
}

void cmd_mmd(const std::string& mu_spec, const std::string& nu_spec,
             const std::string& kernel_id) {
    const Measure1D mu = parse_measure_spec(mu_spec);
    const Measure1D nu = parse_measure_spec(nu_spec);
    std::cout << fmt12(mmd_sq(mu, nu, parse_kernel(kernel_id))) << "\n";
}

void cmd_flow_dirac(const std::string& init_spec, double q, const std::string& times_spec,
                    const std::string& out, int grid_n) {
    const std::vector<double> times = parse_time_list(times_spec);
    const Measure1D mu0 = parse_measure_spec(init_spec);
    ensure_out_dir(out);

    const QuantileTrajectory traj = closed_form_trajectory(quantile(mu0), q, times);

    // grid-sampled trajectory CSV + exact per-time snapshots
    GridTrajectory sampled;
    for (std::size_t i = 0; i < traj.size(); ++i)
        sampled.record(i == 0 ? 0.0 : traj.times[i],
                       sample_quantile_grid(traj.states[i], grid_n), traj.energies[i]);
    atomic_write(fs::path(out) / "trajectory.csv",
                 grid_trajectory_csv(sampled, 0.0, fnv1a64_hex("dirac-target")));
    atomic_write(fs::path(out) / "energy.csv", energy_csv(traj));

    std::ostringstream index;
    index << "index,t\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "snapshot_%03zu", i);
        const Measure1D snap = pushforward_from_quantile(traj.states[i]);
        save_measure_json(fs::path(out) / (std::string(name) + ".json"), snap);
        char title[64];
        std::snprintf(title, sizeof(title), "t = %s", fmt12(traj.times[i]).c_str());
        atomic_write(fs::path(out) / (std::string(name) + ".svg"),
                     render_density_svg(snap, title));
        index << i << "," << fmt12(traj.times[i]) << "\n";
    }
    atomic_write(fs::path(out) / "index.csv", index.str());
    std::cout << "wrote " << traj.size() << " snapshots to " << out << "\n";
}

void cmd_subgrad_flow(const std::string& init_spec, const std::string& target_spec,
                      double tau, int steps, int n, int record_every,
                      const std::string& out) {
    const Measure1D mu0 = parse_measure_spec(init_spec);
    const Measure1D nu = parse_measure_spec(target_spec);
    ensure_out_dir(out);
    if (record_every <= 0) record_every = std::max(1, steps / 200);

    const QuantileGrid f0 = sample_quantile_grid(quantile(mu0), n);
    const GridTrajectory traj = subgradient_flow(f0, nu, tau, steps, record_every);

    atomic_write(fs::path(out) / "trajectory.csv",
                 grid_trajectory_csv(traj, tau, measure_spec_hash(target_spec)));
    atomic_write(fs::path(out) / "energy.csv", energy_csv(traj));

    // explicit steps may overshoot by O(tau); the recorded energies must not
    // rise beyond that scale
    const double tol = 1e-10 + 100.0 * tau * tau;
    for (std::size_t i = 1; i < traj.size(); ++i) {
        const double delta = traj.energies[i] - traj.energies[i - 1];
        if (delta > tol) {
            std::fprintf(stderr,
                         "energy increased at recorded step %zu: delta=%.6e tol=%.6e\n", i,
                         delta, tol);
            throw NumericError("subgrad-flow: energy not monotone within tolerance");
        }
    }
    std::cout << "final energy " << fmt12(traj.energies.back()) << " after " << steps
              << " steps\n";
}

void cmd_jko(const std::string& init_spec, const std::string& target_spec, double tau,
             int steps, int n, const std::string& out) {
    const Measure1D mu0 = parse_measure_spec(init_spec);
    const Measure1D nu = parse_measure_spec(target_spec);
    ensure_out_dir(out);

    FnuEvaluator ev(nu);
    QuantileGrid f = sample_quantile_grid(quantile(mu0), n);
    GridTrajectory traj;
    traj.record(0.0, f, ev.value_grid(f));
    for (int k = 1; k <= steps; ++k) {
        f = jko_step(f, nu, tau);
        traj.record(k * tau, f, ev.value_grid(f));
    }
    atomic_write(fs::path(out) / "trajectory.csv",
                 grid_trajectory_csv(traj, tau, measure_spec_hash(target_spec)));
    atomic_write(fs::path(out) / "energy.csv", energy_csv(traj));
    std::cout << "final energy " << fmt12(traj.energies.back()) << " after " << steps
              << " steps\n";
}

void cmd_restricted(const std::string& family, const std::string& init,
                    const std::string& nu_spec, const std::string& kernel_id, double h,
                    double t_end, const std::string& out, bool with_landscape,
                    const std::string& m_range, const std::string& sigma_range,
                    int resolution) {
    const Measure1D nu = parse_measure_spec(nu_spec);
    const Kernel kernel = parse_kernel(kernel_id);
    ensure_out_dir(out);

    if (family == "s1") {
        double x0 = 0.0;
        try {
            x0 = std::stod(init);
        } catch (const std::exception&) {
            throw ParseError("--init for s1 must be a real number, got \"" + init + "\"");
        }
        if (kernel.type != KernelType::NegDistance)
            throw InvariantError("restricted s1 flow is defined for the distance kernel");
        const ScalarTrajectory traj = s1_flow(x0, nu, t_end, h);
        atomic_write(fs::path(out) / "trajectory.csv", scalar_trajectory_csv(traj));
        atomic_write(fs::path(out) / "energy.csv", energy_csv(traj));
        atomic_write(fs::path(out) / "trajectory.svg", render_scalar_trajectory_svg(traj));
        std::cout << "final x " << fmt12(traj.states.back()) << "\n";
        return;
    }
    if (family != "s2") throw ParseError("--family must be s1 or s2");

    const std::size_t sep = init.find(',');
    if (sep == std::string::npos)
        throw ParseError("--init for s2 must be \"<m>,<sigma>\", got \"" + init + "\"");
    UniformParam p0;
    try {
        p0.m = std::stod(init.substr(0, sep));
        p0.sigma = std::stod(init.substr(sep + 1));
    } catch (const std::exception&) {
        throw ParseError("--init for s2 must be \"<m>,<sigma>\", got \"" + init + "\"");
    }
    const ParamTrajectory traj = s2_flow(p0, nu, kernel, t_end, h);
    atomic_write(fs::path(out) / "trajectory.csv", param_trajectory_csv(traj));
    atomic_write(fs::path(out) / "energy.csv", energy_csv(traj));

    std::vector<std::pair<double, double>> pts;
    pts.reserve(traj.size());
    for (const UniformParam& p : traj.states) pts.emplace_back(p.m, p.sigma);
    if (with_landscape) {
        const auto [m_lo, m_hi] = parse_range(m_range, "--m-range");
        const auto [s_lo, s_hi] = parse_range(sigma_range, "--sigma-range");
        const LandscapeGrid grid = landscape_grid(nu, kernel, m_lo, m_hi, s_lo, s_hi,
                                                  resolution, resolution, thread_budget());
        atomic_write(fs::path(out) / "trajectory.svg", render_landscape_svg(grid, pts));
    } else {
        SvgCanvas canvas(-2.0, 2.0, 0.0, 2.0);
        canvas.axes("m", "sigma");
        canvas.polyline(pts, "#000000", 1.8);
        atomic_write(fs::path(out) / "trajectory.svg", canvas.finish());
    }
    std::cout << "final (m, sigma) = (" << fmt12(traj.states.back().m) << ", "
              << fmt12(traj.states.back().sigma) << ")\n";
}

void cmd_landscape(const std::string& nu_spec, const std::string& kernel_id,
                   const std::string& m_range, const std::string& sigma_range,
                   int resolution, const std::string& out) {
    const Measure1D nu = parse_measure_spec(nu_spec);
    const Kernel kernel = parse_kernel(kernel_id);
    const auto [m_lo, m_hi] = parse_range(m_range, "--m-range");
    const auto [s_lo, s_hi] = parse_range(sigma_range, "--sigma-range");
    ensure_out_dir(out);
    const LandscapeGrid grid = landscape_grid(nu, kernel, m_lo, m_hi, s_lo, s_hi,
                                              resolution, resolution, thread_budget());
    atomic_write(fs::path(out) / "landscape.csv", landscape_csv(grid));
    atomic_write(fs::path(out) / "landscape.svg", render_landscape_svg(grid, {}));
    std::cout << "wrote " << resolution << "x" << resolution << " landscape to " << out
              << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wasserstein-2 geometry and MMD gradient flows on the line"};
    app.require_subcommand(1);

    // w2
    std::string w2_mu, w2_nu;
    CLI::App* sc_w2 = app.add_subcommand("w2", "Wasserstein-2 distance between measures");
    sc_w2->add_option("mu", w2_mu, "measure (JSON path, dirac:<x>, uniform:<a>:<b>)")
        ->required();
    sc_w2->add_option("nu", w2_nu, "measure")->required();

    // mmd
    std::string mmd_mu, mmd_nu, mmd_kernel = "distance";
    CLI::App* sc_mmd = app.add_subcommand("mmd", "squared MMD between measures");
    sc_mmd->add_option("mu", mmd_mu, "measure")->required();
    sc_mmd->add_option("nu", mmd_nu, "measure")->required();
    sc_mmd->add_option("--kernel", mmd_kernel, "distance | smooth");

    // flow-dirac
    std::string fd_init, fd_times = "0.25,0.5,1", fd_out = "out";
    double fd_q = 0.0;
    int fd_n = 256;
    CLI::App* sc_fd =
        app.add_subcommand("flow-dirac", "closed-form flow toward a Dirac target");
    sc_fd->add_option("--init", fd_init, "initial measure")->required();
    sc_fd->add_option("--q", fd_q, "target position")->required();
    sc_fd->add_option("--times", fd_times, "comma-separated snapshot times");
    sc_fd->add_option("--out", fd_out, "output directory");
    sc_fd->add_option("--n", fd_n, "grid size for the trajectory CSV");

    // subgrad-flow
    std::string sg_init, sg_target, sg_out = "out";
    double sg_tau = 1e-3;
    int sg_steps = 1000, sg_n = 1000, sg_record = 0;
    CLI::App* sc_sg =
        app.add_subcommand("subgrad-flow", "explicit subgradient flow on the quantile grid");
    sc_sg->add_option("--init", sg_init, "initial measure")->required();
    sc_sg->add_option("--target", sg_target, "target measure")->required();
    sc_sg->add_option("--tau", sg_tau, "step size")->check(CLI::PositiveNumber);
    sc_sg->add_option("--steps", sg_steps, "number of steps")->check(CLI::PositiveNumber);
    sc_sg->add_option("--n", sg_n, "grid size")->check(CLI::PositiveNumber);
    sc_sg->add_option("--record-every", sg_record, "recording cadence (0 = auto)");
    sc_sg->add_option("--out", sg_out, "output directory");

    // jko
    std::string jk_init, jk_target, jk_out = "out";
    double jk_tau = 1e-2;
    int jk_steps = 1, jk_n = 1000;
    CLI::App* sc_jk = app.add_subcommand("jko", "minimizing-movement steps");
    sc_jk->add_option("--init", jk_init, "initial measure")->required();
    sc_jk->add_option("--target", jk_target, "target measure")->required();
    sc_jk->add_option("--tau", jk_tau, "time step")->check(CLI::PositiveNumber);
    sc_jk->add_option("--steps", jk_steps, "number of steps")->check(CLI::PositiveNumber);
    sc_jk->add_option("--n", jk_n, "grid size")->check(CLI::PositiveNumber);
    sc_jk->add_option("--out", jk_out, "output directory");

    // restricted
    std::string rs_family, rs_init, rs_nu, rs_kernel = "distance", rs_out = "out";
    std::string rs_mrange = "-2:2", rs_srange = "0:2";
    double rs_h = 1e-3, rs_tend = 5.0;
    int rs_res = 60;
    bool rs_landscape = false;
    CLI::App* sc_rs = app.add_subcommand("restricted", "flows on the restricted families");
    sc_rs->add_option("--family", rs_family, "s1 | s2")->required();
    sc_rs->add_option("--init", rs_init, "x for s1, \"m,sigma\" for s2")->required();
    sc_rs->add_option("--nu", rs_nu, "target measure")->required();
    sc_rs->add_option("--kernel", rs_kernel, "distance | smooth");
    sc_rs->add_option("--h", rs_h, "step size")->check(CLI::PositiveNumber);
    sc_rs->add_option("--t-end", rs_tend, "end time")->check(CLI::NonNegativeNumber);
    sc_rs->add_option("--out", rs_out, "output directory");
    sc_rs->add_flag("--landscape", rs_landscape, "overlay trajectory on the landscape");
    sc_rs->add_option("--m-range", rs_mrange, "landscape m range lo:hi");
    sc_rs->add_option("--sigma-range", rs_srange, "landscape sigma range lo:hi");
    sc_rs->add_option("--resolution", rs_res, "landscape resolution per axis");

    // landscape
    std::string ls_nu, ls_kernel = "distance", ls_out = "out";
    std::string ls_mrange = "-2:2", ls_srange = "0:2";
    int ls_res = 60;
    CLI::App* sc_ls = app.add_subcommand("landscape", "restricted energy landscape");
    sc_ls->add_option("--nu", ls_nu, "target measure")->required();
    sc_ls->add_option("--kernel", ls_kernel, "distance | smooth");
    sc_ls->add_option("--m-range", ls_mrange, "m range lo:hi");
    sc_ls->add_option("--sigma-range", ls_srange, "sigma range lo:hi");
    sc_ls->add_option("--resolution", ls_res, "resolution per axis")
        ->check(CLI::PositiveNumber);
    sc_ls->add_option("--out", ls_out, "output directory");

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = apply_config(args);
        std::vector<const char*> cargs;
        cargs.push_back(argv[0]);
        for (const std::string& a : args) cargs.push_back(a.c_str());
        app.parse(static_cast<int>(cargs.size()), cargs.data());

        if (sc_w2->parsed()) cmd_w2(w2_mu, w2_nu);
        if (sc_mmd->parsed()) cmd_mmd(mmd_mu, mmd_nu, mmd_kernel);
        if (sc_fd->parsed()) cmd_flow_dirac(fd_init, fd_q, fd_times, fd_out, fd_n);
        if (sc_sg->parsed())
            cmd_subgrad_flow(sg_init, sg_target, sg_tau, sg_steps, sg_n, sg_record, sg_out);
        if (sc_jk->parsed()) cmd_jko(jk_init, jk_target, jk_tau, jk_steps, jk_n, jk_out);
        if (sc_rs->parsed())
            cmd_restricted(rs_family, rs_init, rs_nu, rs_kernel, rs_h, rs_tend, rs_out,
                           rs_landscape, rs_mrange, rs_srange, rs_res);
        if (sc_ls->parsed())
            cmd_landscape(ls_nu, ls_kernel, ls_mrange, ls_srange, ls_res, ls_out);
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const InvariantError& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
