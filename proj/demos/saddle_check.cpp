// Solves the default instance, then compares a Monte Carlo estimate of the
// saddle cost with V(x0) and prints a few deviation gaps.
//
//   demo_saddle [eps] [paths]

#include "ambictrl/analysis.hpp"
#include "ambictrl/hjb.hpp"
#include "ambictrl/simulate.hpp"

#include <cstdio>
#include <cstdlib>

int main(int argc, char** argv) {
    using namespace ambictrl;
    const MultiClassInstance inst = default_instance();
    const ReducedInstance red = reduce_instance(inst);
    const double eps = argc > 1 ? std::atof(argv[1]) : red.eps;
    const std::size_t paths = argc > 2 ? static_cast<std::size_t>(std::atol(argv[2])) : 2000;

    try {
        const auto sol = std::make_shared<const ValueSolution>(shoot(red, eps));
        const ResidualReport res = verify_solution(*sol);
        std::printf("eps=%g  s*=%.10f  beta=%.8f  beta_hat=%.8f  residual=%.2e  %s\n", eps, sol->s_star,
                    sol->beta, sol->beta_hat, res.fd_residual_sup,
                    uniqueness_check(red, eps).unique() ? "unique" : "possibly non-unique");

        McConfig cfg;
        cfg.n_paths = paths;
        cfg.dt = 2e-3;
        cfg.horizon = horizon_for_tail(red, AdversarySpec::feedback(sol), eps, sol->value_at(0.0));
        const EquilibriumReport rep = equilibrium_report(
            red, inst, sol, 0.0, {0.75 * sol->beta, 1.25 * sol->beta},
            {AdversarySpec::null(), AdversarySpec::constant(eps * red.sigma * red.r)}, cfg, 20);
        std::printf("V(0)=%.5f  MC=%.5f +- %.5f  (T=%.2f, dt=%g, %zu paths)\n", rep.value, rep.saddle.mean,
                    rep.saddle.std_error, rep.saddle.horizon, cfg.dt, paths);
        for (const auto& row : rep.rows) {
            std::printf("  %-24s mean=%.5f  gap=%+.5f +- %.5f  %s\n", row.label.c_str(), row.mean, row.gap,
                        row.gap_se, row.passes ? "ok" : "VIOLATED");
        }
        std::printf("lifted %zu paths, max cost identity error %.2e\n", rep.lifted_paths, rep.max_lift_cost_err);
        return rep.all_pass ? 0 : 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "error (%s): %s\n", e.field().c_str(), e.what());
        return 1;
    }
}
