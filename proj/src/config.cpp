#include "lstop/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace lstop {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return x;
    } catch (const std::exception&) {
        throw std::runtime_error("config: invalid numeric value '" + v + "' for key '" + key + "'");
    }
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const int x = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing characters");
        return x;
    } catch (const std::exception&) {
        throw std::runtime_error("config: invalid integer value '" + v + "' for key '" + key + "'");
    }
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& key_table() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto d = [](double RunConfig::*f) {
            return [f](RunConfig& c, const std::string& k, const std::string& v) {
                c.*f = parse_double(k, v);
            };
        };
        auto i = [](int RunConfig::*f) {
            return [f](RunConfig& c, const std::string& k, const std::string& v) {
                c.*f = parse_int(k, v);
            };
        };
        auto s = [](std::string RunConfig::*f) {
            return [f](RunConfig& c, const std::string&, const std::string& v) { c.*f = v; };
        };
        t[".mode"] = s(&RunConfig::mode);
        t[".problem"] = s(&RunConfig::problem);
        t[".solver"] = s(&RunConfig::solver);
        t["grid.nx"] = i(&RunConfig::nx);
        t["grid.ny"] = i(&RunConfig::ny);
        t["grid.h"] = d(&RunConfig::h);
        t["grid.r_f"] = d(&RunConfig::r_f);
        t["material.E0"] = d(&RunConfig::E0);
        t["material.E_void"] = d(&RunConfig::E_void);
        t["material.nu"] = d(&RunConfig::nu);
        t["material.theta0"] = d(&RunConfig::theta0);
        t["material.beta"] = d(&RunConfig::beta);
        t["material.rho0"] = d(&RunConfig::rho0);
        t["schedules.d_st"] = i(&RunConfig::d_st);
        t["schedules.d_c"] = i(&RunConfig::d_c);
        t["schedules.d_max"] = i(&RunConfig::d_max);
        t["schedules.rho_sh0"] = d(&RunConfig::rho_sh0);
        t["schedules.rho_th0"] = d(&RunConfig::rho_th0);
        t["schedules.eta_sh"] = d(&RunConfig::eta_sh);
        t["schedules.eta_th"] = d(&RunConfig::eta_th);
        t["coupling.phi_sh"] = d(&RunConfig::phi_sh);
        t["coupling.phi_rt"] = d(&RunConfig::phi_rt);
        t["coupling.phi_up"] = d(&RunConfig::phi_up);
        t["coupling.phi_th"] = d(&RunConfig::phi_th);
        t["coupling.xi"] = d(&RunConfig::xi);
        t["weights.w1"] = d(&RunConfig::w1);
        t["weights.w2"] = d(&RunConfig::w2);
        t["weights.w2_init"] = d(&RunConfig::w2_init);
        t["weights.w2_eta"] = d(&RunConfig::w2_eta);
        t["weights.w2_final"] = d(&RunConfig::w2_final);
        t["weights.w3"] = d(&RunConfig::w3);
        t["weights.w4"] = d(&RunConfig::w4);
        t["weights.w_phi1"] = d(&RunConfig::w_phi1);
        t["weights.w_phi2"] = d(&RunConfig::w_phi2);
        t["weights.w_gphi1"] = d(&RunConfig::w_gphi1);
        t["weights.w_gphi2"] = d(&RunConfig::w_gphi2);
        t["weights.gamma_reg"] = d(&RunConfig::gamma_reg);
        t["constraints.gamma_m"] = d(&RunConfig::gamma_m);
        t["constraints.sigma_max"] = d(&RunConfig::sigma_max);
        t["constraints.xi_tau"] = d(&RunConfig::xi_tau);
        t["constraints.w_ptau"] = d(&RunConfig::w_ptau);
        t["constraints.w_psi"] = d(&RunConfig::w_psi);
        t["output.dir"] = s(&RunConfig::out_dir);
        t["output.stride"] = i(&RunConfig::stride);
        return t;
    }();
    return table;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"ex1-sfc", "ex1-tfc", "beam2d-sfc", "beam2d-tfc", "ex1-stress-tfc"};
}

RunConfig preset_config(const std::string& name) {
    RunConfig cfg;  // defaults carry the ex1 tables
    if (name == "ex1-tfc") {
        cfg.mode = "tfc";
    } else if (name == "ex1-sfc") {
        cfg.mode = "sfc";
        cfg.w4 = 0.0;
    } else if (name == "beam2d-tfc" || name == "beam2d-sfc") {
        cfg.mode = name == "beam2d-tfc" ? "tfc" : "sfc";
        cfg.problem = "beam2d";
        cfg.nx = 120;
        cfg.ny = 40;
        cfg.h = 1.0;
        cfg.rho0 = 0.2;
        cfg.rho_sh0 = 0.2;
        cfg.rho_th0 = 0.15;  // 0.75 rho0
        cfg.d_st = 20;
        cfg.d_c = 120;
        cfg.d_max = 150;
        cfg.gamma_m = 0.20;
        cfg.w1 = 0.92;
        cfg.w2 = 0.01;
        cfg.w2_init = 0.001;
        cfg.w2_eta = 3.0;
        cfg.w3 = 0.01;
        cfg.w4 = cfg.mode == "tfc" ? 0.05 : 0.0;
    } else if (name == "ex1-stress-tfc") {
        cfg.mode = "tfc";
        cfg.problem = "ex1-stress";
        cfg.w1 = 1.0;
        cfg.w2 = 0.01;
        cfg.w2_init = 0.0001;
        cfg.w2_eta = 3.0;
        cfg.w3 = 0.01;
        cfg.w4 = 0.1;
        cfg.w_psi = 0.05;
        cfg.w_ptau = 100.0;
        cfg.sigma_max = 30.0;
        cfg.w_phi1 = 0.5;
        cfg.w_phi2 = 0.5;
        cfg.w_gphi1 = 0.0;
        cfg.w_gphi2 = 0.5;
    } else {
        throw std::runtime_error("unknown preset '" + name + "'");
    }
    return cfg;
}

void apply_scale(RunConfig& cfg, int k) {
    if (k < 1) throw std::runtime_error("apply_scale: scale must be >= 1");
    if (k == 1) return;
    cfg.nx = std::max(4, cfg.nx / k);
    cfg.ny = std::max(4, cfg.ny / k);
    cfg.h *= k;
    cfg.d_st = std::max(5, cfg.d_st / k);
    cfg.d_c = std::max(25, cfg.d_c / k);
    cfg.d_max = std::max(40, cfg.d_max / k);
}

RunConfig resolve_config(const RunConfig& cfg) {
    RunConfig r = cfg;
    if (r.r_f < 0.0) r.r_f = 1.6 * r.h;
    if (r.E_void < 0.0) r.E_void = 1e-8 * r.E0;
    if (r.rho_th0 < 0.0) r.rho_th0 = 0.7 * r.rho0;
    if (r.phi_rt < 0.0) r.phi_rt = 4.0 * r.h;
    if (r.phi_up < 0.0) r.phi_up = 2.5 * r.h;
    const double phi_low =
        r.mode == "sfc" ? -r.phi_rt * r.phi_sh : -r.phi_up;
    if (r.phi_th >= 0.0) r.phi_th = 0.25 * phi_low;
    if (r.w2_init < 0.0) r.w2_init = r.w2;
    if (r.w2_final < 0.0) r.w2_final = 10.0 * r.w2;
    return r;
}

void validate_config(RunConfig& c, std::vector<std::string>* warnings) {
    auto fail = [](const std::string& key, const std::string& why) {
        throw std::runtime_error("config: key '" + key + "' " + why);
    };
    if (c.mode != "sfc" && c.mode != "tfc") fail("mode", "must be 'sfc' or 'tfc'");
    if (c.problem != "ex1" && c.problem != "beam2d" && c.problem != "ex1-stress") {
        fail("problem", "must be 'ex1', 'beam2d' or 'ex1-stress'");
    }
    if (c.solver != "direct" && c.solver != "cg") fail("solver", "must be 'direct' or 'cg'");
    if (c.nx < 4 || c.ny < 4) fail("nx/ny", "fixtures need at least 4 elements per axis");
    if (!(c.h > 0)) fail("h", "must be positive");
    if (!(c.r_f > 0)) fail("r_f", "must be positive");
    if (!(c.E0 > c.E_void && c.E_void > 0)) fail("E_void", "needs E0 > E_void > 0");
    if (!(c.nu > 0 && c.nu < 0.5)) fail("nu", "must lie in (0, 0.5)");
    if (!(c.beta >= 1.0)) fail("beta", "must be >= 1");
    if (!(c.theta0 > 0)) fail("theta0", "must be positive");
    if (!(c.rho0 > 0 && c.rho0 <= 1)) fail("rho0", "must lie in (0, 1]");
    if (c.d_st < 1 || c.d_st > c.d_c) fail("d_st", "needs 0 < d_st <= d_c");
    if (c.d_max < 0) fail("d_max", "must be nonnegative");
    if (!(c.eta_sh >= 1 && c.eta_th >= 1)) fail("eta_sh/eta_th", "must be >= 1");
    if (!(c.rho_sh0 >= 0 && c.rho_sh0 < 1)) fail("rho_sh0", "must lie in [0, 1)");
    if (!(c.phi_sh > 0 && c.phi_sh < 1)) fail("phi_sh", "must lie in (0, 1)");
    if (!(c.phi_rt > 0)) fail("phi_rt", "must be positive");
    if (!(c.phi_up > 0)) fail("phi_up", "must be positive");
    if (!(c.phi_th < 0)) fail("phi_th", "must be negative");
    if (!(c.xi > 0)) fail("xi", "must be positive");
    if (c.w1 < 0 || c.w2 < 0 || c.w2_init < 0 || c.w3 < 0 || c.w4 < 0 || c.w2_final < 0 ||
        c.w_psi < 0 || c.w_ptau < 0) {
        fail("weights", "must be nonnegative");
    }
    if (!(c.w2_eta >= 1)) fail("w2_eta", "must be >= 1");
    if (c.w_phi1 < 0 || c.w_phi2 < 0 || c.w_gphi1 < 0 || c.w_gphi2 < 0) {
        fail("w_phi*/w_gphi*", "must be nonnegative");
    }
    if (!(c.gamma_reg > 0)) fail("gamma_reg", "must be positive");
    if (!(c.gamma_m > 0 && c.gamma_m <= 1)) fail("gamma_m", "must lie in (0, 1]");
    if (c.sigma_max < 0) fail("sigma_max", "must be nonnegative");
    if (!(c.xi_tau > 0)) fail("xi_tau", "must be positive");
    if (c.stride < 0) fail("stride", "must be nonnegative");
    if (c.rho_th0 >= c.rho0) {
        if (warnings) {
            warnings->push_back("rho_th0 >= rho0 would activate the coupling penalty everywhere; "
                                "clamped to 0.99 * rho0");
        }
        c.rho_th0 = 0.99 * c.rho0;
    }
}

RunConfig parse_config(const std::string& text, RunConfig base,
                       std::vector<std::string>* warnings) {
    RunConfig cfg = base;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t cut = line.find_first_of("#;");
        if (cut != std::string::npos) line = line.substr(0, cut);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw std::runtime_error("config: malformed section header at line " +
                                         std::to_string(line_no));
            }
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config: expected 'key = value' at line " +
                                     std::to_string(line_no));
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string qualified = section + "." + key;
        const auto it = key_table().find(qualified);
        if (it == key_table().end()) {
            throw std::runtime_error("config: unknown key '" + key + "' in section [" + section +
                                     "]");
        }
        it->second(cfg, key, value);
    }
    RunConfig resolved = resolve_config(cfg);
    validate_config(resolved, warnings);
    return cfg;
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "mode = " << cfg.mode << "\n";
    out << "problem = " << cfg.problem << "\n";
    out << "solver = " << cfg.solver << "\n\n";
    out << "[grid]\n";
    out << "nx = " << cfg.nx << "\nny = " << cfg.ny << "\nh = " << fmt(cfg.h)
        << "\nr_f = " << fmt(cfg.r_f) << "\n\n";
    out << "[material]\n";
    out << "E0 = " << fmt(cfg.E0) << "\nE_void = " << fmt(cfg.E_void) << "\nnu = " << fmt(cfg.nu)
        << "\ntheta0 = " << fmt(cfg.theta0) << "\nbeta = " << fmt(cfg.beta)
        << "\nrho0 = " << fmt(cfg.rho0) << "\n\n";
    out << "[schedules]\n";
    out << "d_st = " << cfg.d_st << "\nd_c = " << cfg.d_c << "\nd_max = " << cfg.d_max
        << "\nrho_sh0 = " << fmt(cfg.rho_sh0) << "\nrho_th0 = " << fmt(cfg.rho_th0)
        << "\neta_sh = " << fmt(cfg.eta_sh) << "\neta_th = " << fmt(cfg.eta_th) << "\n\n";
    out << "[coupling]\n";
    out << "phi_sh = " << fmt(cfg.phi_sh) << "\nphi_rt = " << fmt(cfg.phi_rt)
        << "\nphi_up = " << fmt(cfg.phi_up) << "\nphi_th = " << fmt(cfg.phi_th)
        << "\nxi = " << fmt(cfg.xi) << "\n\n";
    out << "[weights]\n";
    out << "w1 = " << fmt(cfg.w1) << "\nw2 = " << fmt(cfg.w2) << "\nw2_init = " << fmt(cfg.w2_init)
        << "\nw2_eta = " << fmt(cfg.w2_eta) << "\nw2_final = " << fmt(cfg.w2_final)
        << "\nw3 = " << fmt(cfg.w3) << "\nw4 = " << fmt(cfg.w4) << "\nw_phi1 = " << fmt(cfg.w_phi1)
        << "\nw_phi2 = " << fmt(cfg.w_phi2) << "\nw_gphi1 = " << fmt(cfg.w_gphi1)
        << "\nw_gphi2 = " << fmt(cfg.w_gphi2) << "\ngamma_reg = " << fmt(cfg.gamma_reg) << "\n\n";
    out << "[constraints]\n";
    out << "gamma_m = " << fmt(cfg.gamma_m) << "\nsigma_max = " << fmt(cfg.sigma_max)
        << "\nxi_tau = " << fmt(cfg.xi_tau) << "\nw_ptau = " << fmt(cfg.w_ptau)
        << "\nw_psi = " << fmt(cfg.w_psi) << "\n\n";
    out << "[output]\n";
    out << "dir = " << cfg.out_dir << "\nstride = " << cfg.stride << "\n";
    return out.str();
}

}  // namespace lstop
