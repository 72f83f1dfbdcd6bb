// One changepoint at location 30 of 60: fused lasso path, BIC stopping and selective tests.
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <glinfer/glinfer.hpp>

using namespace glinfer;

int main(int argc, char** argv)
{
    const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 3;
    Scenario sc;
    sc.n = 60;
    sc.delta = 2.0;
    const ScenarioSetup setup = make_setup(sc);
    CounterRng rng(seed, 0);
    const Vec y = setup.theta + rng.normal_vector(sc.n);
    const PathTrace tr = run_path(y, setup.D);

    ICConfig ic;
    ic.penalty = ICPenalty::bic;
    ic.sigma2 = 1.0;
    const ICTrace ict = stop_rule(y, tr, ic);
    if (!ict.chosen) {
        std::cout << "BIC rule did not stop\n";
        return 0;
    }
    const std::size_t k = *ict.chosen_step();
    std::cout << "BIC with q = 2 stops at step " << k << " (decided at step " << *ict.decisive_step() << ")\n";

    const StepSignModel ss = step_sign_model(tr, k);
    std::cout << "step-sign model:";
    for (std::size_t t = 0; t < ss.locations.size(); ++t)
        std::cout << ' ' << ss.locations[t] << (ss.signs[t] > 0 ? '+' : '-');
    std::cout << "\n";

    const Polyhedron P =
        intersect(build_selection_polyhedron(tr, *ict.decisive_step()), ic_polyhedron(y, tr, ic, ict));
    std::cout << std::fixed << std::setprecision(4);
    std::cout << "location  kind      p_TG    p_naive  90% interval\n";
    const SelectedModel1D model = selected_model(tr, k);
    for (Index loc : ss.locations)
        for (ContrastKind kind : {ContrastKind::spike, ContrastKind::segment}) {
            const Contrast c = contrast_at(tr, k, kind, loc);
            const TGResult r = tg_interval(c.v, y, 1.0, P, 0.1);
            std::cout << std::setw(8) << loc << "  " << std::setw(8) << std::left << to_string(kind) << std::right
                      << std::setw(8) << r.p_one;
            if (kind == ContrastKind::segment)
                std::cout << std::setw(9) << naive_z_pvalue(y, model, model.position(loc), 1.0);
            else
                std::cout << std::setw(9) << "-";
            if (r.ci_lo) std::cout << "  [" << *r.ci_lo << ", " << *r.ci_hi << "]";
            std::cout << "\n";
        }
    return 0;
}
