#include <gtest/gtest.h>
#include "oracles.hpp"

using namespace glinfer;

namespace {

SelectedModel1D model(Index n, std::vector<Index> cps, std::vector<int> signs)
{
    SelectedModel1D m;
    m.n = n;
    m.changepoints = std::move(cps);
    m.signs = std::move(signs);
    return m;
}

/// Cosine of the angle between u and v.
double cosine(const Vec& u, const Vec& v) { return u.dot(v) / (u.norm() * v.norm()); }

/// Rows of D outside `boundary`, dense.
Mat minus_rows(const PenaltyMatrix& D, const std::vector<Index>& boundary)
{
    return D.rows_dense(D.complement_rows(boundary));
}

/// v in null(D_{-B}) and v orthogonal to null(D_{-(B \ {row})}).
void expect_segment_subspace(const Vec& v, const PenaltyMatrix& D, const std::vector<Index>& B, Index row)
{
    const Index n = D.cols();
    const Mat big = oracle::null_projector(minus_rows(D, B), n);
    std::vector<Index> drop;
    for (Index r : B)
        if (r != row) drop.push_back(r);
    const Mat small = oracle::null_projector(minus_rows(D, drop), n);
    EXPECT_LT((big * v - v).norm(), 1e-10 * v.norm());
    EXPECT_LT((small * v).norm(), 1e-10 * v.norm());
}

Vec golden_y()
{
    Vec y(4);
    y << 0, 0, 1, 1;
    return y;
}

} // namespace

TEST(FusedLassoContrast, Spike)
{
    const auto m = model(4, {2}, {1});
    Vec want(4);
    want << 0, -1, 1, 0;
    const auto c = fl_spike(m, 1);
    EXPECT_EQ(c.v, want);
    EXPECT_EQ(c.kind, ContrastKind::spike);
    EXPECT_EQ(c.location, 2);
    EXPECT_EQ(fl_spike(model(4, {2}, {-1}), 1).v, -want);
    EXPECT_THROW(fl_spike(m, 2), DimensionError);
    EXPECT_THROW(fl_spike(m, 0), DimensionError);
    const auto m3 = model(9, {1, 4, 8}, {1, -1, 1});
    for (Index j = 1; j <= 3; ++j) EXPECT_DOUBLE_EQ(fl_spike(m3, j).v.squaredNorm(), 2.0);
}

TEST(FusedLassoContrast, Segment)
{
    Vec want(4);
    want << -0.5, -0.5, 0.5, 0.5;
    EXPECT_TRUE(fl_segment(model(4, {2}, {1}), 1).v.isApprox(want, 1e-15));

    CounterRng rng(11, 1);
    const Vec y = rng.normal_vector(12);
    const auto m = model(12, {3, 7, 8}, {1, -1, 1});
    const auto D = difference_matrix(12, 1);
    const std::vector<Index> B{2, 6, 7};
    const double means[] = {y.segment(0, 3).mean(), y.segment(3, 4).mean(), y.segment(7, 1).mean(),
                            y.segment(8, 4).mean()};
    for (Index j = 1; j <= 3; ++j) {
        const auto c = fl_segment(m, j);
        EXPECT_NEAR(c.v.dot(y), m.signs[j - 1] * (means[j] - means[j - 1]), 1e-12);
        EXPECT_NEAR(c.v.sum(), 0.0, 1e-14);
        expect_segment_subspace(c.v, D, B, j == 1 ? 2 : (j == 2 ? 6 : 7));
        // Same direction as the rank-one basis vector.
        std::vector<Index> drop = B;
        drop.erase(drop.begin() + (j - 1));
        const Vec w = rank1_null_basis(minus_rows(D, B), minus_rows(D, drop), 12);
        EXPECT_NEAR(std::abs(cosine(w, c.v)), 1.0, 1e-12);
    }
}

TEST(TrendFilterContrast, Spike)
{
    const auto c = tf_spike(model(7, {3}, {1}), 1);
    Vec want = Vec::Zero(7);
    want(2) = 1;
    want(3) = -2;
    want(4) = 1;
    EXPECT_EQ(c.v, want);
    EXPECT_DOUBLE_EQ(c.v.squaredNorm(), 6.0);
    EXPECT_EQ(tf_spike(model(7, {3}, {-1}), 1).v, -want);
    EXPECT_THROW(tf_spike(model(7, {6}, {1}), 1), DimensionError);
}

TEST(TrendFilterContrast, SingleKnotIsProjectedHinge)
{
    const Index n = 10;
    const auto D = difference_matrix(n, 2);
    for (Index I : {2, 4, 7})
        for (int s : {1, -1}) {
            const auto c = tf_segment(model(n, {I}, {s}), 1, D, {I - 1});
            // Hinge with its kink at position I + 1 (1-based), with the linear part projected out.
            Vec h(n);
            for (Index i = 0; i < n; ++i) h(i) = std::max<double>(0.0, static_cast<double>(i + 1 - (I + 1)));
            Mat L(n, 2);
            for (Index i = 0; i < n; ++i) L.row(i) << 1.0, static_cast<double>(i);
            const Vec ref = h - oracle::col_projector(L) * h;
            EXPECT_NEAR(cosine(c.v, s * ref), 1.0, 1e-10);
            expect_segment_subspace(c.v, D, {I - 1}, I - 1);
        }
}

TEST(TrendFilterContrast, SubspaceOnPaths)
{
    CounterRng rng(12, 1);
    const Index n = 14;
    const auto D = difference_matrix(n, 2);
    int checked = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const auto tr = run_path(rng.normal_vector(n), D);
        for (std::size_t k = 1; k <= std::min<std::size_t>(tr.size(), 4); ++k) {
            const auto m = selected_model(tr, k);
            const auto B = tr.step(k).boundary;
            for (Index j = 1; j <= static_cast<Index>(m.size()); ++j) {
                if (m.changepoints[j - 1] + 2 > n) continue;
                Contrast c;
                try {
                    c = tf_segment(m, j, D, B);
                } catch (const NumericalError&) {
                    continue;
                }
                expect_segment_subspace(c.v, D, B, m.changepoints[j - 1] - 1);
                const double second = c.v(m.changepoints[j - 1] - 1) - 2 * c.v(m.changepoints[j - 1]) +
                                      c.v(m.changepoints[j - 1] + 1);
                EXPECT_GT(second * m.signs[j - 1], 0.0);
                ++checked;
            }
        }
    }
    EXPECT_GT(checked, 30);
}

TEST(GraphContrast, ComponentMeans)
{
    const auto D = graph_incidence(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
    ModelStep st;
    st.boundary = {1};
    st.signs = {1};
    const auto part = graph_partition(D, st);
    ASSERT_EQ(part.components.size(), 2u);
    const auto c = gfl_segment_at_edge(part, 1);
    Vec want(5);
    want << -0.5, -0.5, 1.0 / 3, 1.0 / 3, 1.0 / 3;
    EXPECT_TRUE(c.v.isApprox(want, 1e-15));
    EXPECT_EQ(c.location, 2);
    EXPECT_THROW(gfl_segment_at_edge(part, 7), DimensionError);
    EXPECT_THROW(gfl_segment(part, 0, 0), DimensionError);
}

TEST(GraphContrast, SingletonsReduceToSpike)
{
    const auto D = graph_incidence(2, {{0, 1}});
    ModelStep st;
    st.boundary = {0};
    st.signs = {-1};
    const auto c = gfl_segment_at_edge(graph_partition(D, st), 0);
    Vec want(2);
    want << 1, -1;
    EXPECT_TRUE(c.v.isApprox(want, 1e-15));
}

TEST(GraphContrast, ErrorsOnConflictAndNonNeighbors)
{
    // Square 0-1-2-3-0; cutting 0-1 and 2-3 gives components {0,3}, {1,2} joined by two boundary edges.
    const auto D = graph_incidence(4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}});
    ModelStep st;
    st.boundary = {0, 2};
    st.signs = {1, 1};
    const auto part = graph_partition(D, st);
    ASSERT_EQ(part.components.size(), 2u);
    // Edge 0: C{0,3} -> C{1,2} with +1; edge 2 (2 -> 3): C{1,2} -> C{0,3} with +1, i.e. -1 the other way.
    EXPECT_THROW(gfl_segment(part, 0, 1), InputError);
    EXPECT_FALSE(gfl_testable(part, 0));
    st.signs = {1, -1};
    EXPECT_TRUE(gfl_testable(graph_partition(D, st), 0));
    const auto ok = gfl_segment(graph_partition(D, st), 0, 1);
    EXPECT_NEAR(ok.v.sum(), 0.0, 1e-15);

    const auto chain = graph_incidence(4, {{0, 1}, {1, 2}, {2, 3}});
    ModelStep st2;
    st2.boundary = {0, 2};
    st2.signs = {1, 1};
    EXPECT_THROW(gfl_segment(graph_partition(chain, st2), 0, 2), InputError);
}

TEST(GraphContrast, SubspaceOnPaths)
{
    CounterRng rng(13, 1);
    const auto edges = grid_edges(3, 3);
    const auto D = graph_incidence(9, edges);
    int checked = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const auto tr = run_path(rng.normal_vector(9), D);
        for (std::size_t k = 1; k <= tr.size(); ++k) {
            const auto part = graph_partition(D, tr.step(k));
            for (const auto& [row, s] : part.boundary) {
                const Edge& e = part.edges[static_cast<std::size_t>(row)];
                if (part.component_of(e.i) == part.component_of(e.j)) continue;
                Contrast c;
                try {
                    c = gfl_segment_at_edge(part, row);
                } catch (const InputError&) {
                    continue;
                }
                EXPECT_NEAR(c.v.sum(), 0.0, 1e-13);
                const Mat big = oracle::null_projector(minus_rows(D, tr.step(k).boundary), 9);
                EXPECT_LT((big * c.v - c.v).norm(), 1e-10);
                ++checked;
            }
        }
    }
    EXPECT_GT(checked, 20);
}

TEST(RegressionContrast, ProjectorIdentity)
{
    CounterRng rng(14, 1);
    for (int rep = 0; rep < 30; ++rep) {
        const Index p = 6, n = 12;
        Mat X(n, p);
        for (Index j = 0; j < p; ++j) X.col(j) = rng.normal_vector(n);
        const auto D = difference_matrix(p, 1);
        std::vector<Index> B;
        for (Index r = 0; r < p - 1; ++r)
            if (rng.uniform() < 0.5) B.push_back(r);
        if (B.empty()) B.push_back(2);
        for (Index row : B) {
            const auto c = reg_segment(X, D, B, row, 1);
            std::vector<Index> drop;
            for (Index r : B)
                if (r != row) drop.push_back(r);
            const Mat PB = oracle::col_projector(X * segment_basis(D, B));
            const Mat PD = oracle::col_projector(X * segment_basis(D, drop));
            const Mat lhs = c.v * c.v.transpose() / c.v.squaredNorm();
            EXPECT_LT((lhs - (PB - PD)).cwiseAbs().maxCoeff(), 1e-10);
        }
    }
}

TEST(RegressionContrast, IdentityDesignMatchesSegment)
{
    const Index n = 10;
    const auto D = difference_matrix(n, 1);
    const std::vector<Index> B{2, 5, 6};
    const auto m = model(n, {3, 6, 7}, {1, -1, 1});
    for (Index j = 1; j <= 3; ++j) {
        const auto r = reg_segment(Mat::Identity(n, n), D, B, B[j - 1], m.signs[j - 1]);
        EXPECT_NEAR(cosine(r.v, fl_segment(m, j).v), 1.0, 1e-12);
        EXPECT_EQ(r.location, B[j - 1] + 1);
    }
}

TEST(RegressionContrast, RankDeficientDesign)
{
    Mat X = Mat::Zero(4, 4);
    X(0, 0) = 1;
    X(1, 1) = 1;
    EXPECT_THROW(reg_segment(X, difference_matrix(4, 1), {0, 2}, 0, 1), NumericalError);
    EXPECT_THROW(reg_segment(Mat::Identity(4, 4), difference_matrix(4, 1), {0}, 2, 1), DimensionError);
}

TEST(Declutter, Examples)
{
    const auto m = model(60, {18, 20, 50}, {1, -1, 1});
    const auto d = declutter(m, 10);
    EXPECT_EQ(d.changepoints, (std::vector<Index>{18, 50}));
    EXPECT_EQ(d.signs, (std::vector<int>{1, 1}));
    EXPECT_EQ(declutter(m, 1).changepoints, m.changepoints);
    EXPECT_TRUE(declutter(model(5, {}, {}), 3).changepoints.empty());
    EXPECT_THROW(declutter(m, 0), DimensionError);
}

TEST(Declutter, Idempotent)
{
    CounterRng rng(15, 1);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<Index> cps;
        for (Index i = 1; i < 50; ++i)
            if (rng.uniform() < 0.2) cps.push_back(i);
        const auto m = model(50, cps, std::vector<int>(cps.size(), 1));
        const Index g = 1 + static_cast<Index>(rng.uniform() * 8);
        const auto once = declutter(m, g);
        EXPECT_EQ(declutter(once, g).changepoints, once.changepoints);
        for (std::size_t t = 1; t < once.size(); ++t) EXPECT_GE(once.changepoints[t] - once.changepoints[t - 1], g);
    }
}

TEST(StepSign, GoldenAndScaleInvariance)
{
    const auto tr = run_path(golden_y(), difference_matrix(4, 1));
    const auto ss = step_sign_model(tr, 1);
    EXPECT_EQ(ss.locations, std::vector<Index>{2});
    EXPECT_EQ(ss.signs, std::vector<int>{1});
    EXPECT_TRUE(step_sign_model(tr, 0).locations.empty());

    CounterRng rng(16, 1);
    for (int rep = 0; rep < 20; ++rep) {
        const Vec y = rng.normal_vector(15);
        const auto D = sparse_augment(difference_matrix(15, 1), 0.3);
        const auto a = run_path(y, D);
        const auto b = run_path(2.7 * y, D);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t k = 1; k <= a.size(); ++k) EXPECT_EQ(step_sign_model(a, k), step_sign_model(b, k));
    }
}

TEST(ContrastAt, LocatesChangepoints)
{
    const auto tr = run_path(golden_y(), difference_matrix(4, 1));
    EXPECT_EQ(contrast_at(tr, 1, ContrastKind::spike, 2).v, fl_spike(model(4, {2}, {1}), 1).v);
    EXPECT_THROW(contrast_at(tr, 1, ContrastKind::spike, 3), InputError);
    EXPECT_THROW(contrast_at(tr, 1, ContrastKind::graph_segment, 2), InputError);
    EXPECT_THROW(selected_model(run_path(golden_y(), graph_incidence(4, {{0, 1}, {1, 2}, {2, 3}})), 1), InputError);
}
