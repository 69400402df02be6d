#include "lstop/outputs.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace lstop {

namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

}  // namespace

void write_history_csv(const std::filesystem::path& path, const RunHistory& history) {
    std::ofstream out = open_out(path);
    out << "iter,z,F,P_Per,P_Reg,P_coupling,g_mass,g_stress,rho_sh,rho_th,"
           "void_components,interface_length\n";
    for (const ObjectiveBreakdown& bd : history.iterations) {
        out << bd.iter << ',' << fmt(bd.z) << ',' << fmt(bd.F) << ',' << fmt(bd.p_per) << ','
            << fmt(bd.p_reg) << ',' << fmt(bd.p_couple) << ',' << fmt(bd.g_mass) << ','
            << fmt(bd.g_stress) << ',' << fmt(bd.rho_sh) << ',' << fmt(bd.rho_th) << ','
            << bd.void_components << ',' << fmt(bd.interface_length) << '\n';
    }
}

void write_vtk_fields(const std::filesystem::path& path, const Grid& grid, const NodalField& phi,
                      const NodalField& rho, const NodalField& rho_tilde,
                      const Eigen::VectorXd& tau, const Eigen::VectorXd& u) {
    std::ofstream out = open_out(path);
    const int n = grid.node_count();
    out << "# vtk DataFile Version 3.0\n";
    out << "level-set topology optimization fields\n";
    out << "ASCII\n";
    out << "DATASET STRUCTURED_POINTS\n";
    out << "DIMENSIONS " << grid.nx() + 1 << ' ' << grid.ny() + 1 << " 1\n";
    out << "ORIGIN " << fmt(grid.origin()[0]) << ' ' << fmt(grid.origin()[1]) << " 0\n";
    out << "SPACING " << fmt(grid.h()) << ' ' << fmt(grid.h()) << " 1\n";
    out << "POINT_DATA " << n << "\n";
    auto scalars = [&](const char* name, auto&& value) {
        out << "SCALARS " << name << " double 1\n";
        out << "LOOKUP_TABLE default\n";
        for (int i = 0; i < n; ++i) out << fmt(value(i)) << '\n';
    };
    scalars("phi", [&](int i) { return phi[i]; });
    scalars("rho", [&](int i) { return rho[i]; });
    scalars("rho_tilde", [&](int i) { return rho_tilde[i]; });
    scalars("tau", [&](int i) { return tau[i]; });
    scalars("u_mag", [&](int i) { return std::hypot(u[2 * i], u[2 * i + 1]); });
}

void write_interface_csv(const std::filesystem::path& path, const InterfacePolyline& poly) {
    std::ofstream out = open_out(path);
    out << "x0,y0,x1,y1\n";
    for (const Segment2& s : poly.segments) {
        out << fmt(s.a[0]) << ',' << fmt(s.a[1]) << ',' << fmt(s.b[0]) << ',' << fmt(s.b[1])
            << '\n';
    }
}

void write_run_json(const std::filesystem::path& path, const RunConfig& c,
                    const RunHistory& history, double runtime_seconds) {
    nlohmann::json j;
    j["config"] = {
        {"mode", c.mode},       {"problem", c.problem}, {"solver", c.solver},
        {"nx", c.nx},           {"ny", c.ny},           {"h", c.h},
        {"r_f", c.r_f},         {"E0", c.E0},           {"E_void", c.E_void},
        {"nu", c.nu},           {"theta0", c.theta0},   {"beta", c.beta},
        {"rho0", c.rho0},       {"d_st", c.d_st},       {"d_c", c.d_c},
        {"d_max", c.d_max},     {"rho_sh0", c.rho_sh0}, {"rho_th0", c.rho_th0},
        {"eta_sh", c.eta_sh},   {"eta_th", c.eta_th},   {"phi_sh", c.phi_sh},
        {"phi_rt", c.phi_rt},   {"phi_up", c.phi_up},   {"phi_th", c.phi_th},
        {"xi", c.xi},           {"w1", c.w1},           {"w2", c.w2},
        {"w2_init", c.w2_init}, {"w2_eta", c.w2_eta},   {"w2_final", c.w2_final},
        {"w3", c.w3},           {"w4", c.w4},           {"w_phi1", c.w_phi1},
        {"w_phi2", c.w_phi2},   {"w_gphi1", c.w_gphi1}, {"w_gphi2", c.w_gphi2},
        {"gamma_reg", c.gamma_reg}, {"gamma_m", c.gamma_m}, {"sigma_max", c.sigma_max},
        {"xi_tau", c.xi_tau},   {"w_ptau", c.w_ptau},   {"w_psi", c.w_psi},
        {"out_dir", c.out_dir}, {"stride", c.stride},
    };
    j["result"]["iterations"] = history.iterations.size();
    j["result"]["converged"] = history.converged;
    j["result"]["runtime_seconds"] = runtime_seconds;
    if (!history.iterations.empty()) {
        const ObjectiveBreakdown& bd = history.iterations.back();
        j["result"]["final"] = {
            {"iter", bd.iter},         {"z", bd.z},
            {"F", bd.F},               {"P_Per", bd.p_per},
            {"P_Per_exact", bd.p_per_exact}, {"P_Reg", bd.p_reg},
            {"P_coupling", bd.p_couple}, {"psi_aux", bd.psi_aux},
            {"g_mass", bd.g_mass},     {"g_stress", bd.g_stress},
            {"psi", bd.psi},           {"mass", bd.mass_value},
            {"void_components", bd.void_components},
            {"interface_length", bd.interface_length},
        };
    }
    std::ofstream out = open_out(path);
    out << j.dump(2) << '\n';
}

DriverResult run_with_outputs(const RunConfig& input, const std::filesystem::path& out_dir) {
    const RunConfig cfg = [&] {
        RunConfig r = resolve_config(input);
        validate_config(r, nullptr);
        return r;
    }();
    const Problem problem = build_problem(cfg);

    std::filesystem::create_directories(out_dir);
    const auto t0 = std::chrono::steady_clock::now();

    RunHistory partial;
    char name[64];
    auto dump_fields = [&](const EvalResult& ev, const std::string& stem) {
        write_vtk_fields(out_dir / (stem + ".vtk"), problem.grid, ev.phi, ev.rho, ev.rho_tilde,
                         ev.stress.tau, ev.sol.u);
    };

    RunResult result;
    try {
        result = run_optimization(problem, [&](int d_it, const EvalResult& ev, const Eigen::VectorXd&) {
            partial.iterations.push_back(ev.bd);
            if (cfg.stride > 0 && d_it % cfg.stride == 0) {
                std::snprintf(name, sizeof(name), "fields_%06d", d_it);
                dump_fields(ev, name);
            }
        });
    } catch (...) {
        write_history_csv(out_dir / "history.csv", partial);
        throw;
    }

    const auto t1 = std::chrono::steady_clock::now();
    const double seconds = std::chrono::duration<double>(t1 - t0).count();

    write_history_csv(out_dir / "history.csv", result.history);
    if (result.final_eval.has_value()) {
        dump_fields(*result.final_eval, "fields_final");
        write_interface_csv(out_dir / "final_interface.csv",
                            extract_interface(problem.grid, result.final_eval->phi));
    }
    write_run_json(out_dir / "run.json", cfg, result.history, seconds);

    return DriverResult{std::move(result.history), out_dir};
}

}  // namespace lstop
