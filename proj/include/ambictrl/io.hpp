#pragma once

// Instance files (JSON) and CSV/JSON artifact writers.

#include "ambictrl/analysis.hpp"
#include "ambictrl/error.hpp"
#include "ambictrl/hjb.hpp"
#include "ambictrl/model.hpp"
#include "ambictrl/simulate.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace ambictrl {

using json = nlohmann::ordered_json;

[[nodiscard]] inline std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

[[nodiscard]] inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

namespace detail {

inline std::vector<double> read_vector(const json& j, const char* field) {
    if (!j.contains(field)) fail_validation(field, std::string("missing field ") + field);
    const json& v = j.at(field);
    if (!v.is_array()) fail_validation(field, std::string(field) + " must be an array");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) fail_validation(field, std::string(field) + " must hold numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

}  // namespace detail

/// Reads an instance object. Ambiguity weights come from "eps_hat" or, as
/// an alternative, from "kappa" pairs.
[[nodiscard]] inline MultiClassInstance instance_from_json(const json& j) {
    if (!j.is_object()) fail_validation("instance", "instance must be a JSON object");
    MultiClassInstance inst;
    inst.lambda = detail::read_vector(j, "lambda");
    inst.mu = detail::read_vector(j, "mu");
    inst.lambda_hat = detail::read_vector(j, "lambda_hat");
    inst.mu_hat = detail::read_vector(j, "mu_hat");
    inst.h_hat = detail::read_vector(j, "h_hat");
    inst.r_hat = detail::read_vector(j, "r_hat");
    inst.b_hat = detail::read_vector(j, "b_hat");
    if (j.contains("eps_hat")) {
        inst.eps_hat = detail::read_vector(j, "eps_hat");
    } else if (j.contains("kappa")) {
        std::vector<std::pair<double, double>> kappa;
        for (const auto& p : j.at("kappa")) {
            if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
                fail_validation("kappa", "kappa entries must be [k1, k2] pairs");
            }
            kappa.emplace_back(p[0].get<double>(), p[1].get<double>());
        }
        inst.eps_hat = epsilon_from_kappa(kappa);
    } else {
        fail_validation("eps_hat", "missing field eps_hat (or kappa)");
    }
    if (!j.contains("discount") || !j.at("discount").is_number()) {
        fail_validation("discount", "missing numeric field discount");
    }
    inst.discount = j.at("discount").get<double>();
    return inst;
}

[[nodiscard]] inline json instance_to_json(const MultiClassInstance& inst) {
    return json{{"lambda", inst.lambda},   {"mu", inst.mu},       {"lambda_hat", inst.lambda_hat},
                {"mu_hat", inst.mu_hat},   {"h_hat", inst.h_hat}, {"r_hat", inst.r_hat},
                {"b_hat", inst.b_hat},     {"eps_hat", inst.eps_hat},
                {"discount", inst.discount}};
}

struct LoadedInstance {
    MultiClassInstance instance;
    std::string content_hash;  ///< FNV-1a 64 of the file bytes, hex
};

[[nodiscard]] inline LoadedInstance load_instance(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_validation("instance", "cannot open instance file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail_validation("instance", std::string("instance file is not valid JSON: ") + e.what());
    }
    return {instance_from_json(j), hex64(fnv1a64(text))};
}

namespace detail {

inline std::ostream& csv_precision(std::ostream& os) {
    return os << std::setprecision(17);
}

}  // namespace detail

inline void write_value_csv(std::ostream& os, const ValueSolution& sol) {
    detail::csv_precision(os);
    os << "x,V,V_prime,V_second\n";
    for (std::size_t i = 0; i < sol.grid.size(); ++i) {
        os << sol.grid[i] << ',' << sol.V[i] << ',' << sol.V_prime[i] << ',' << sol.V_second[i] << '\n';
    }
}

inline void write_path_csv(std::ostream& os, const SimPath& p) {
    detail::csv_precision(os);
    os << "t,X,Y,R,B,psi\n";
    for (std::size_t k = 0; k < p.X.size(); ++k) {
        os << p.time(k) << ',' << p.X[k] << ',' << p.Y[k] << ',' << p.R[k] << ',' << p.B[k] << ','
           << p.psi[k] << '\n';
    }
}

inline void write_lifted_csv(std::ostream& os, const SimPath& p, const LiftedPath& L) {
    detail::csv_precision(os);
    os << "t";
    for (const char* name : {"X_hat", "Y_hat", "R_hat", "B_hat", "psi_hat"}) {
        for (std::size_t i = 0; i < L.classes; ++i) os << ',' << name << '_' << i;
    }
    os << '\n';
    for (std::size_t k = 0; k < L.X_hat.size(); ++k) {
        os << p.time(k);
        for (const auto* rows : {&L.X_hat, &L.Y_hat, &L.R_hat, &L.B_hat, &L.psi_hat}) {
            for (double v : (*rows)[k]) os << ',' << v;
        }
        os << '\n';
    }
}

inline void write_sweep_csv(std::ostream& os, const SweepReport& rep) {
    detail::csv_precision(os);
    os << "eps,s_star,beta,beta_hat,sup_diff,margin,slack\n";
    for (const auto& r : rep.records) {
        os << r.eps << ',' << r.s_star << ',' << r.beta << ',' << r.beta_hat << ',' << r.sup_diff << ',';
        if (r.margin) os << *r.margin;
        os << ',';
        if (r.bound_slack) os << *r.bound_slack;
        os << '\n';
    }
}

[[nodiscard]] inline json residual_report_json(const ResidualReport& rep) {
    return json{{"hjb_residual_sup", rep.hjb_residual_sup},
                {"fd_residual_sup", rep.fd_residual_sup},
                {"residual_tol", rep.residual_tol},
                {"reflect_slope_sup", rep.reflect_slope_sup},
                {"v_prime_at_zero", rep.v_prime_at_zero},
                {"v_prime_at_b_err", rep.v_prime_at_b_err},
                {"v_prime_min", rep.v_prime_min},
                {"v_prime_max", rep.v_prime_max},
                {"hjb_inequality_min", rep.hjb_inequality_min},
                {"pasting_curvature", rep.pasting_curvature},
                {"integration_defect", rep.integration_defect},
                {"pasted", rep.pasted}};
}

[[nodiscard]] inline json solution_json(const ValueSolution& sol) {
    return json{{"eps", sol.eps},
                {"cells", sol.grid.empty() ? 0 : sol.grid.size() - 1},
                {"s_star", sol.s_star},
                {"beta", sol.beta},
                {"beta_hat", sol.beta_hat},
                {"classification", to_string(sol.classification)},
                {"shoot_iterations", sol.shoot_iterations},
                {"residual_sup", sol.residual_sup},
                {"paste_tol", sol.paste_tol},
                {"pasting_curvature", sol.pasting_curvature}};
}

[[nodiscard]] inline json estimate_json(const CostEstimate& e) {
    return json{{"mean", e.mean},           {"std_error", e.std_error}, {"n_paths", e.n_paths},
                {"dt", e.dt},               {"T", e.horizon},           {"tail_bound", e.tail_bound},
                {"seed", e.seed}};
}

[[nodiscard]] inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(); }

[[nodiscard]] inline json sweep_json(const SweepReport& rep) {
    json records = json::array();
    for (const auto& r : rep.records) {
        records.push_back(json{{"eps", r.eps},
                               {"s_star", r.s_star},
                               {"beta", r.beta},
                               {"beta_hat", r.beta_hat},
                               {"sup_diff", r.sup_diff},
                               {"margin", r.margin ? json(*r.margin) : json()},
                               {"bound_slack", r.bound_slack ? json(*r.bound_slack) : json()},
                               {"sandwich_ok", r.sandwich_ok}});
    }
    return json{{"C_fit", rep.c_fit},
                {"fit_residual", rep.fit_residual},
                {"fit_points", rep.fit_points},
                {"scale", rep.scale},
                {"min_margin", finite_or_null(rep.min_margin())},
                {"min_bound_slack", finite_or_null(rep.min_bound_slack())},
                {"sandwich_delta", rep.sandwich_delta},
                {"sandwich_ok", rep.sandwich_ok()},
                {"records", records}};
}

}  // namespace ambictrl
