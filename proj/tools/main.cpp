#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "lstop/config.hpp"
#include "lstop/outputs.hpp"

namespace {

constexpr const char* kVersion = "lstop 1.0.0";

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config file '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) {
        std::cerr << "warning: " << w << "\n";
    }
}

int do_run(const lstop::RunConfig& cfg, const std::string& out_override) {
    const std::string dir = out_override.empty() ? cfg.out_dir : out_override;
    const lstop::DriverResult res = lstop::run_with_outputs(cfg, dir);
    const auto& last = res.history.iterations.back();
    std::cout << "iterations: " << res.history.iterations.size()
              << (res.history.converged ? " (converged)" : " (stopped at d_max)") << "\n";
    std::cout << "final z = " << last.z << ", F = " << last.F << ", g_mass = " << last.g_mass
              << ", voids = " << last.void_components << "\n";
    std::cout << "outputs in " << res.out_dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"2D level-set topology optimization with density-informed hole nucleation"};
    app.require_subcommand(1);

    std::string config_path, preset_name, out_override;
    int scale = 1, gc_iters = 2, gc_vars = 10;
    unsigned gc_seed = 1234;
    bool print_only = false;

    auto* run = app.add_subcommand("run", "run a config file");
    run->add_option("config", config_path, "config file")->required();
    run->add_option("--out", out_override, "output directory override");

    auto* preset = app.add_subcommand("preset", "run a built-in benchmark preset");
    preset->add_option("name", preset_name, "one of ex1-sfc, ex1-tfc, beam2d-sfc, beam2d-tfc, ex1-stress-tfc")
        ->required();
    preset->add_option("--scale", scale, "coarsening factor (h multiplier)")->check(CLI::PositiveNumber);
    preset->add_option("--out", out_override, "output directory override");
    preset->add_flag("--print", print_only, "print the resolved config and exit");

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the adjoint gradients");
    gradcheck->add_option("config", config_path, "config file")->required();
    gradcheck->add_option("--iters", gc_iters, "design iterations before the check");
    gradcheck->add_option("--vars", gc_vars, "number of variables to probe");
    gradcheck->add_option("--seed", gc_seed, "sampling seed");

    app.add_subcommand("version", "print version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            return app.exit(e);
        }
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand("version")) {
            std::cout << kVersion << "\n";
            return 0;
        }
        if (app.got_subcommand("run")) {
            std::vector<std::string> warnings;
            const lstop::RunConfig cfg = lstop::parse_config(read_file(config_path), {}, &warnings);
            print_warnings(warnings);
            return do_run(cfg, out_override);
        }
        if (app.got_subcommand("preset")) {
            lstop::RunConfig cfg = lstop::preset_config(preset_name);
            lstop::apply_scale(cfg, scale);
            if (print_only) {
                std::cout << lstop::serialize_config(lstop::resolve_config(cfg));
                return 0;
            }
            if (scale > 1 && out_override.empty()) {
                cfg.out_dir += "-s" + std::to_string(scale);
            }
            return do_run(cfg, out_override);
        }
        if (app.got_subcommand("gradcheck")) {
            std::vector<std::string> warnings;
            const lstop::RunConfig cfg = lstop::parse_config(read_file(config_path), {}, &warnings);
            print_warnings(warnings);
            const lstop::Problem problem = lstop::build_problem(cfg);

            Eigen::VectorXd s = problem.initial_design;
            double psi0 = 0.0;
            lstop::MmaSolver mma(problem.n_vars(), problem.spec.sigma_max > 0.0 ? 2 : 1);
            for (int it = 0; it < gc_iters; ++it) {
                lstop::EvalResult ev = lstop::evaluate(problem, s, it, psi0);
                if (it == 0) psi0 = ev.psi0;
                const lstop::SensitivityBundle sens = lstop::adjoint_gradients(problem, s, ev);
                const int m = static_cast<int>(sens.dg.size());
                Eigen::VectorXd g(m);
                Eigen::MatrixXd dg(m, problem.n_vars());
                g[0] = ev.bd.g_mass - problem.spec.slack;
                dg.row(0) = sens.dg[0].transpose();
                if (m > 1) {
                    g[1] = ev.bd.g_stress - problem.spec.slack;
                    dg.row(1) = sens.dg[1].transpose();
                }
                s = mma.update(s, ev.bd.z, sens.dz, g, dg, problem.lower, problem.upper);
            }
            const lstop::GradCheckReport rep =
                lstop::gradient_check(problem, s, gc_iters, psi0, gc_vars, gc_seed);
            std::printf("gradcheck at iteration %d over %d variables\n", gc_iters, rep.n_checked);
            std::printf("  max rel error z:        %.3e\n", rep.max_err_z);
            std::printf("  max rel error g_mass:   %.3e\n", rep.max_err_mass);
            if (problem.spec.sigma_max > 0.0) {
                std::printf("  max rel error g_stress: %.3e\n", rep.max_err_stress);
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
