#include <gtest/gtest.h>
#include "oracles.hpp"

using namespace glinfer;

namespace {
Mat random_matrix(CounterRng& rng, Index r, Index c)
{
    Mat M(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) M(i, j) = rng.normal();
    return M;
}
} // namespace

TEST(PinvApply, IdentityAndZero)
{
    Vec b(3);
    b << 1, -2, 3;
    EXPECT_LE((pinv_apply(Mat::Identity(3, 3), b) - b).norm(), 1e-14);
    EXPECT_EQ(pinv_apply(Mat::Zero(3, 3), b).norm(), 0.0);
}

TEST(PinvApply, TridiagonalSolve)
{
    const auto D = difference_matrix(4, 1);
    Vec y(4);
    y << 0, 0, 1, 1;
    const Mat G = D.dense() * D.dense().transpose();
    const Vec u = pinv_apply(G, Vec(D.apply(y)));
    Vec expect(3);
    expect << 0.5, 1.0, 0.5;
    EXPECT_LE((u - expect).cwiseAbs().maxCoeff(), 1e-12);
    // Oracle: explicit inverse of tridiag(-1, 2, -1) is (1/4)[[3,2,1],[2,4,2],[1,2,3]].
    Mat inv(3, 3);
    inv << 3, 2, 1, 2, 4, 2, 1, 2, 3;
    inv /= 4.0;
    EXPECT_LE((inv * D.apply(y) - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PinvApply, MoorePenroseIdentities)
{
    CounterRng rng(21, 0);
    for (int rep = 0; rep < 10; ++rep) {
        Mat A = random_matrix(rng, 5, 8);
        if (rep % 2) A.row(4) = A.row(0) + A.row(1); // rank deficient
        const Mat Ap = pinv_apply(A, Mat(Mat::Identity(5, 5)));
        EXPECT_LE((A * Ap * A - A).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE((Ap * A * Ap - Ap).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE(((A * Ap).transpose() - A * Ap).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE(((Ap * A).transpose() - Ap * A).cwiseAbs().maxCoeff(), 1e-9);
    }
    EXPECT_THROW(pinv_apply(Mat::Identity(3, 3), Vec(Vec::Ones(4))), DimensionError);
}

TEST(NullProjector, EmptyAndFullDifference)
{
    const Projector P0 = null_projector(Mat(0, 5), 5);
    EXPECT_EQ(P0.subspace_dim, 5);
    EXPECT_TRUE(P0.matrix.isApprox(Mat::Identity(5, 5)));
    const Projector P = null_projector(difference_matrix(4, 1).dense());
    EXPECT_EQ(P.subspace_dim, 1);
    EXPECT_LE((P.matrix - Mat::Constant(4, 4, 0.25)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NullProjector, BlockAveraging)
{
    const auto D = difference_matrix(4, 1);
    const Projector P = null_projector(D.rows_dense({0, 2}));
    EXPECT_EQ(P.subspace_dim, 2);
    Mat expect = Mat::Zero(4, 4);
    expect.block(0, 0, 2, 2).setConstant(0.5);
    expect.block(2, 2, 2, 2).setConstant(0.5);
    EXPECT_LE((P.matrix - expect).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((P.matrix - oracle::null_projector(D.rows_dense({0, 2}), 4)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NullProjector, ProjectorAxiomsAndAnnihilation)
{
    CounterRng rng(4, 0);
    for (int rep = 0; rep < 10; ++rep) {
        const Mat A = random_matrix(rng, 3, 7);
        const Projector P = null_projector(A);
        EXPECT_LE((P.matrix * P.matrix - P.matrix).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LE((P.matrix.transpose() - P.matrix).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_NEAR(P.matrix.trace(), static_cast<double>(P.subspace_dim), 1e-10);
        EXPECT_LE((A * P.matrix).cwiseAbs().maxCoeff(), 1e-10 * A.cwiseAbs().maxCoeff());
        EXPECT_LE((P.matrix - oracle::null_projector(A, 7)).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Nullity, KnownCases)
{
    EXPECT_EQ(nullity(Mat(0, 6), 6), 6);
    for (Index n : {4, 9, 30}) {
        EXPECT_EQ(nullity(difference_matrix(n, 1).dense()), 1);
        EXPECT_EQ(nullity(difference_matrix(n, 2).dense()), 2);
    }
}

TEST(Rank1NullBasis, FusedLassoExample)
{
    const auto D = difference_matrix(4, 1);
    const Vec w = rank1_null_basis(D.rows_dense({0, 2}), D.rows_dense({0, 1, 2}), 4);
    Vec expect(4);
    expect << -0.5, -0.5, 0.5, 0.5;
    EXPECT_LE(std::min((w - expect).norm(), (w + expect).norm()), 1e-12);
}

TEST(Rank1NullBasis, CodimensionZeroThrows)
{
    const auto D = difference_matrix(4, 1);
    EXPECT_THROW(rank1_null_basis(D.rows_dense({0, 2}), D.rows_dense({0, 2}), 4), NumericalError);
    EXPECT_THROW(rank1_null_basis(Mat(0, 4), D.dense(), 4), NumericalError);
}

TEST(Rank1NullBasis, DefiningProperties)
{
    const auto D = difference_matrix(10, 2);
    const std::vector<Index> boundary{2, 5};
    const std::vector<Index> rest = D.complement_rows(boundary);
    std::vector<Index> drop = rest;
    drop.push_back(5);
    std::sort(drop.begin(), drop.end());
    const Vec w = rank1_null_basis(D.rows_dense(rest), D.rows_dense(drop), 10);
    EXPECT_NEAR(w.norm(), 1.0, 1e-12);
    EXPECT_LE((D.rows_dense(rest) * w).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((oracle::null_projector(D.rows_dense(drop), 10) * w).cwiseAbs().maxCoeff(), 1e-10);
    const Mat diff = oracle::null_projector(D.rows_dense(rest), 10) - oracle::null_projector(D.rows_dense(drop), 10);
    EXPECT_LE((w * w.transpose() - diff).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SubspaceFactor, PinvTransposeMatchesCholeskyOracle)
{
    CounterRng rng(9, 0);
    const Mat A = random_matrix(rng, 4, 9);
    const Vec x = rng.normal_vector(9);
    const SubspaceFactor f(A);
    EXPECT_LE((f.pinv_transpose_apply(x) - oracle::full_rank_dual(A, x)).norm(), 1e-10);
    EXPECT_LE((f.pinv_transpose() * x - oracle::full_rank_dual(A, x)).norm(), 1e-10);
    const SubspaceFactor g = f;
    EXPECT_LE((g.pinv_transpose() - f.pinv_transpose()).norm(), 1e-15);
}

TEST(SubspaceFactor, BlockDifferenceRowSubset)
{
    // Rows of a 20-point difference operator with three rows removed.
    const PenaltyMatrix D = difference_matrix(20, 1);
    const Mat A = D.rows_dense(D.complement_rows({6, 12, 17}));
    const SubspaceFactor f(A);
    EXPECT_EQ(f.rank(), 16);
    EXPECT_LE((f.U() * f.singular_values().asDiagonal() * f.V().transpose() - A).cwiseAbs().maxCoeff(), 1e-12);
    CounterRng rng(11, 0);
    for (int t = 0; t < 5; ++t) {
        const Vec x = rng.normal_vector(20);
        EXPECT_LE((f.pinv_transpose_apply(x) - oracle::full_rank_dual(A, x)).norm(), 1e-10);
    }
}
