#pragma once

#include <filesystem>
#include <string>

#include "lstop/config.hpp"
#include "lstop/opt.hpp"

namespace lstop {

void write_history_csv(const std::filesystem::path& path, const RunHistory& history);

/// Legacy ASCII VTK structured-points file with phi, rho, rho_tilde, tau and
/// |u| as point data.
void write_vtk_fields(const std::filesystem::path& path, const Grid& grid, const NodalField& phi,
                      const NodalField& rho, const NodalField& rho_tilde,
                      const Eigen::VectorXd& tau, const Eigen::VectorXd& u);

void write_interface_csv(const std::filesystem::path& path, const InterfacePolyline& poly);

void write_run_json(const std::filesystem::path& path, const RunConfig& resolved,
                    const RunHistory& history, double runtime_seconds);

struct DriverResult {
    RunHistory history;
    std::filesystem::path out_dir;
};

/// Builds the problem, runs the optimization, and writes history.csv,
/// stride-paced field dumps, the final interface polyline and run.json.
/// On failure the partial history is flushed before the error propagates.
DriverResult run_with_outputs(const RunConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace lstop
