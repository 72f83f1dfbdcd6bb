#pragma once
// Independent reference computations used only by the tests.
#include <cmath>
#include <vector>
#include <Eigen/Dense>
#include <glinfer/glinfer.hpp>

namespace oracle {

using glinfer::Index;
using glinfer::Mat;
using glinfer::Vec;

/// Orthonormal basis of null(A) via full-pivot LU kernel + QR (no SVD).
inline Mat null_basis(const Mat& A, Index n)
{
    if (A.rows() == 0) return Mat::Identity(n, n);
    Eigen::FullPivLU<Mat> lu(A);
    lu.setThreshold(1e-10);
    const Mat K = lu.kernel();
    if (lu.rank() == n) return Mat::Zero(n, 0);
    Eigen::HouseholderQR<Mat> qr(K);
    return qr.householderQ() * Mat::Identity(n, K.cols());
}

inline Mat null_projector(const Mat& A, Index n)
{
    const Mat N = null_basis(A, n);
    return N * N.transpose();
}

/// Projector onto col(X) via column-pivoting QR.
inline Mat col_projector(const Mat& X)
{
    Eigen::ColPivHouseholderQR<Mat> qr(X);
    qr.setThreshold(1e-10);
    const Index r = qr.rank();
    const Mat Q = qr.householderQ() * Mat::Identity(X.rows(), r);
    return Q * Q.transpose();
}

/// (A A^T)^+ A x for full-row-rank A by a Cholesky solve.
inline Vec full_rank_dual(const Mat& A, const Vec& x)
{
    const Mat G = A * A.transpose();
    return G.llt().solve(A * x);
}

struct BoxQPResult {
    Vec beta;
    Vec u;
    double gap = 0.0;
    int iterations = 0;
};

/**
 * Fixed-lambda solver: min_u 0.5 ||y - D^T u||^2 s.t. |u_i| <= lambda by
 * accelerated projected gradient with restarts; beta = y - D^T u. Stops on a
 * duality gap, which bounds ||beta - beta*||^2 / 2.
 */
inline BoxQPResult box_qp(const Vec& y, const Mat& D, double lambda, double gap_tol = 1e-13, int max_iter = 3000000)
{
    const Mat G = D * D.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> eig(G, Eigen::EigenvaluesOnly);
    const double L = std::max(eig.eigenvalues().maxCoeff(), 1e-12);
    const Vec Dy = D * y;
    Vec u = Vec::Zero(D.rows()), z = u, u_prev = u;
    double t = 1.0;
    BoxQPResult r;
    auto clip = [&](Vec v) { return v.cwiseMax(-lambda).cwiseMin(lambda); };
    auto gap_of = [&](const Vec& uu) {
        const Vec beta = y - D.transpose() * uu;
        const double primal = 0.5 * (y - beta).squaredNorm() + lambda * (D * beta).lpNorm<1>();
        const double dual = 0.5 * y.squaredNorm() - 0.5 * beta.squaredNorm();
        return primal - dual;
    };
    const double scale = std::max(1.0, y.squaredNorm());
    double fprev = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= max_iter; ++it) {
        const Vec grad = G * z - Dy;
        u_prev = u;
        u = clip(z - grad / L);
        const double f = 0.5 * (y - D.transpose() * u).squaredNorm();
        if (f > fprev) { // adaptive restart
            t = 1.0;
            z = u;
        } else {
            const double tn = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
            z = u + ((t - 1) / tn) * (u - u_prev);
            t = tn;
        }
        fprev = f;
        if (it % 200 == 0) {
            r.gap = gap_of(u);
            r.iterations = it;
            if (r.gap < gap_tol * scale) break;
        }
    }
    r.u = u;
    r.beta = y - D.transpose() * u;
    r.gap = gap_of(u);
    return r;
}

/// Whether re-running the path on y2 reproduces the first k models of `steps`.
inline bool same_selection(const std::vector<glinfer::ModelStep>& steps, std::size_t k, const Vec& y2,
                           const glinfer::PenaltyMatrix& D, glinfer::FactorCache* cache = nullptr)
{
    glinfer::PathOptions opts;
    opts.max_steps = static_cast<Index>(k);
    const auto tr = glinfer::run_path(y2, D, opts, cache);
    return glinfer::same_model_sequence(steps, tr.steps, k);
}

inline Vec random_sphere(glinfer::CounterRng& rng, Index n)
{
    Vec z = rng.normal_vector(n);
    return z / z.norm();
}

struct Agreement {
    int agree = 0;
    int disagree = 0;
    int ambiguous = 0;
};

/**
 * Draws y' (half uniform on the sphere, half near the direction of y) and
 * compares polyhedron membership with re-running the path. Draws within
 * 1e-8 relative slack of a face are counted as ambiguous.
 */
inline Agreement resample_check(const glinfer::PathTrace& tr, std::size_t k, glinfer::CounterRng& rng, int draws)
{
    const glinfer::Polyhedron P = glinfer::build_selection_polyhedron(tr, k);
    const Index n = tr.D.cols();
    Agreement a;
    glinfer::FactorCache cache;
    for (int d = 0; d < draws; ++d) {
        Vec y2;
        if (d % 2 == 0) y2 = random_sphere(rng, n);
        else {
            const double eps = (d % 6 == 1) ? 0.05 : (d % 6 == 3 ? 0.2 : 0.6);
            y2 = tr.y / tr.y.norm() + eps * random_sphere(rng, n);
        }
        const double slack = glinfer::min_slack(P, y2);
        if (std::abs(slack) < 1e-8 * y2.norm()) {
            ++a.ambiguous;
            continue;
        }
        const bool in = slack > 0;
        const bool same = same_selection(tr.steps, k, y2, tr.D, &cache);
        (in == same ? a.agree : a.disagree) += 1;
    }
    return a;
}

} // namespace oracle
