// Four-point fused lasso worked example: path, polyhedron, TG p-value and interval.
#include <iomanip>
#include <iostream>
#include <glinfer/glinfer.hpp>

using namespace glinfer;

int main()
{
    Vec y(4);
    y << 0, 0, 1, 1;
    const auto D = difference_matrix(4, 1);
    const PathTrace tr = run_path(y, D);

    std::cout << std::setprecision(10);
    std::cout << "knots:";
    for (double k : tr.knots()) std::cout << ' ' << k;
    std::cout << "\n";
    const ModelStep& m = tr.step(1);
    std::cout << "step 1: boundary row " << m.boundary[0] + 1 << ", sign " << std::showpos << m.signs[0]
              << std::noshowpos << "\n";

    const Polyhedron P = build_selection_polyhedron(tr, 1);
    std::cout << "polyhedron rows: " << P.rows() << "\n";

    const Contrast c = contrast_at(tr, 1, ContrastKind::segment, 2);
    std::cout << "segment contrast: " << c.v.transpose() << "\n";

    const TGResult r = tg_interval(c.v, y, 1.0, P, 0.1);
    std::cout << "v'y = " << r.stat << ", truncation [" << r.vlo << ", " << r.vup << "]\n";
    std::cout << "one-sided p = " << r.p_one << " (reference 1 - (Phi(1) - Phi(0)) / (1 - Phi(0)) = "
              << 2 * normal::sf(1.0) << ")\n";
    std::cout << "90% interval [" << *r.ci_lo << ", " << *r.ci_hi << "]\n";
    return std::abs(r.p_one - 2 * normal::sf(1.0)) < 1e-10 ? 0 : 1;
}
