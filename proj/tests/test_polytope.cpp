#include <gtest/gtest.h>
#include "oracles.hpp"

using namespace glinfer;

namespace {

Vec golden_y()
{
    Vec y(4);
    y << 0, 0, 1, 1;
    return y;
}

} // namespace

TEST(GammaFirstStep, GoldenRows)
{
    const auto tr = run_path(golden_y(), difference_matrix(4, 1));
    const Polyhedron P = gamma_first_step(tr.steps[0], tr.D);
    ASSERT_EQ(P.rows(), 4);
    // Unnormalized rows from M = (DD^T)^{-1} D with rows (-3,1,1,1)/4, (-2,-2,2,2)/4, (-1,-1,-1,3)/4.
    Mat M(3, 4);
    M << -3, 1, 1, 1, -2, -2, 2, 2, -1, -1, -1, 3;
    M /= 4.0;
    Mat expect(4, 4);
    expect.row(0) = M.row(1) - M.row(0);
    expect.row(1) = M.row(1) + M.row(0);
    expect.row(2) = M.row(1) - M.row(2);
    expect.row(3) = M.row(1) + M.row(2);
    const Mat raw = P.row_scale.asDiagonal() * P.gamma;
    EXPECT_LE((raw - expect).cwiseAbs().maxCoeff(), 1e-12);
    const Vec gy = raw * golden_y();
    Vec want(4);
    want << 0.5, 1.5, 0.5, 1.5;
    EXPECT_LE((gy - want).cwiseAbs().maxCoeff(), 1e-12);
    for (Index r = 0; r < P.rows(); ++r) EXPECT_NEAR(P.gamma.row(r).norm(), 1.0, 1e-12);
}

TEST(GammaFirstStep, SingleRowPenaltyHasNoRows)
{
    Vec y(2);
    y << 0, 1;
    const auto tr = run_path(y, difference_matrix(2, 1));
    EXPECT_EQ(gamma_first_step(tr.steps[0], tr.D).rows(), 0);
}

TEST(Membership, Basics)
{
    const auto tr = run_path(golden_y(), difference_matrix(4, 1));
    const Polyhedron P = build_selection_polyhedron(tr, 1);
    EXPECT_TRUE(membership(P, golden_y()));
    Vec flipped(4);
    flipped << 1, 1, 0, 0;
    EXPECT_FALSE(membership(P, flipped));
    EXPECT_FALSE(membership(P, Vec(-golden_y())));
    EXPECT_TRUE(membership(P, flipped, std::numeric_limits<double>::infinity()));
    EXPECT_THROW(membership(P, Vec::Zero(3)), DimensionError);
}

TEST(BuildSelectionPolyhedron, RangeChecks)
{
    const auto tr = run_path(golden_y(), difference_matrix(4, 1));
    EXPECT_THROW(build_selection_polyhedron(tr, 0), DimensionError);
    EXPECT_THROW(build_selection_polyhedron(tr, 2), DimensionError);
}

TEST(BuildSelectionPolyhedron, InvariantsOnRandomInstances)
{
    CounterRng rng(12, 0);
    std::vector<PenaltyMatrix> zoo{difference_matrix(8, 1), difference_matrix(8, 2),
                                   graph_incidence(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 5}, {1, 4}}),
                                   sparse_augment(difference_matrix(6, 1), 0.5)};
    for (const auto& D : zoo) {
        for (int rep = 0; rep < 10; ++rep) {
            const Vec y = rng.normal_vector(D.cols());
            const auto tr = run_path(y, D);
            const Index m = D.rows();
            for (std::size_t k = 1; k <= std::min<std::size_t>(tr.size(), 4); ++k) {
                const Polyhedron P = build_selection_polyhedron(tr, k);
                EXPECT_LE(P.rows(), (2 * m + 1) * static_cast<Index>(k));
                EXPECT_GE(min_slack(P, y), -1e-8 * y.norm());
                EXPECT_TRUE(membership(P, Vec(2.7 * y)));
                // Rebuilding from the models and a fresh copy of D alone gives the same rows.
                const std::vector<ModelStep> models(tr.steps.begin(), tr.steps.end());
                const PenaltyMatrix Dcopy(D.sparse(), D.kind(), D.meta());
                const Polyhedron Q = build_selection_polyhedron(models, Dcopy, k);
                ASSERT_EQ(P.rows(), Q.rows());
                EXPECT_EQ((P.gamma - Q.gamma).cwiseAbs().maxCoeff(), 0.0);
                // Per-step bookkeeping.
                EXPECT_EQ(P.count(1, RowFamily::first_hit), static_cast<std::size_t>(2 * (m - 1)));
                for (std::size_t t = 2; t <= k; ++t) {
                    const ModelStep& prev = tr.steps[t - 2];
                    EXPECT_EQ(P.count(static_cast<int>(t), RowFamily::hit_sign),
                              static_cast<std::size_t>(m) - prev.boundary.size());
                    EXPECT_LE(P.count(static_cast<int>(t), RowFamily::leave_sign_neg) +
                                  P.count(static_cast<int>(t), RowFamily::leave_sign_pos),
                              prev.boundary.size());
                    EXPECT_EQ(P.count(static_cast<int>(t), RowFamily::leave_sign_neg), tr.steps[t - 1].leave_viable.size());
                }
            }
        }
    }
}

TEST(GammaExtend, RejectsInconsistentSequence)
{
    CounterRng rng(13, 0);
    const auto tr = run_path(rng.normal_vector(6), difference_matrix(6, 1));
    ASSERT_GE(tr.size(), 3u);
    Polyhedron P = gamma_first_step(tr.steps[0], tr.D);
    EXPECT_THROW(gamma_extend(P, tr.steps[0], tr.steps[2], 2, tr.D), DimensionError);
}

TEST(SamplingEquivalence, FusedLasso)
{
    CounterRng rng(14, 0);
    for (int inst = 0; inst < 3; ++inst) {
        const auto tr = run_path(rng.normal_vector(6), difference_matrix(6, 1));
        const auto a = oracle::resample_check(tr, std::min<std::size_t>(3, tr.size()), rng, 300);
        EXPECT_EQ(a.disagree, 0);
        EXPECT_GT(a.agree, 250);
    }
}

TEST(SamplingEquivalence, TrendFiltering)
{
    CounterRng rng(15, 0);
    for (int inst = 0; inst < 3; ++inst) {
        const auto tr = run_path(rng.normal_vector(7), difference_matrix(7, 2));
        const auto a = oracle::resample_check(tr, std::min<std::size_t>(3, tr.size()), rng, 300);
        EXPECT_EQ(a.disagree, 0);
    }
}

TEST(SamplingEquivalence, GraphAndLeaveEvents)
{
    CounterRng rng(16, 0);
    const auto G = graph_incidence(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 3}, {2, 5}});
    for (int inst = 0; inst < 3; ++inst) {
        const auto tr = run_path(rng.normal_vector(6), G);
        const auto a = oracle::resample_check(tr, std::min<std::size_t>(3, tr.size()), rng, 300);
        EXPECT_EQ(a.disagree, 0);
    }
    // Find a sparse-augmented path whose first steps contain a leave and check it.
    const auto D = sparse_augment(difference_matrix(5, 1), 0.5);
    int checked = 0;
    for (int rep = 0; rep < 500 && checked < 2; ++rep) {
        const auto tr = run_path(rng.normal_vector(5), D);
        std::size_t k = 0;
        for (std::size_t t = 0; t < tr.size(); ++t)
            if (tr.steps[t].action == Action::leave) {
                k = t + 1;
                break;
            }
        if (k == 0) continue;
        const auto a = oracle::resample_check(tr, k, rng, 300);
        EXPECT_EQ(a.disagree, 0);
        ++checked;
    }
    EXPECT_EQ(checked, 2);
}
