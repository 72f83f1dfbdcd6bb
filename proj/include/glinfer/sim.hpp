#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>
#include <glinfer/contrast.hpp>
#include <glinfer/errors.hpp>
#include <glinfer/ic.hpp>
#include <glinfer/linalg.hpp>
#include <glinfer/path.hpp>
#include <glinfer/penalty.hpp>
#include <glinfer/polytope.hpp>
#include <glinfer/rng.hpp>
#include <glinfer/stats.hpp>
#include <glinfer/tg.hpp>

namespace glinfer {

/// Two-sided normal p-value for the difference of the segment means around changepoint j.
inline double naive_z_pvalue(const Vec& y, const SelectedModel1D& model, Index j, double sigma2)
{
    if (!(sigma2 > 0)) throw DimensionError("naive_z_pvalue: variance must be positive");
    if (y.size() != model.n) throw DimensionError("naive_z_pvalue: y length does not match the model");
    const Contrast c = fl_segment(model, j);
    const std::size_t t = static_cast<std::size_t>(j - 1);
    const Index I = model.changepoints[t];
    const Index left = t == 0 ? 0 : model.changepoints[t - 1];
    const Index right = t + 1 < model.size() ? model.changepoints[t + 1] : model.n;
    const double T = c.v.dot(y) * c.sign;
    const double sd = std::sqrt(sigma2 * (1.0 / static_cast<double>(I - left) + 1.0 / static_cast<double>(right - I)));
    return std::min(1.0, 2.0 * normal::sf(std::abs(T) / sd));
}

// ---------------------------------------------------------------------------
// Scenarios

enum class ScenarioKind { one_jump, two_jump, tf_one_knot, grid_patch, regression_stocks };

inline const char* to_string(ScenarioKind k)
{
    switch (k) {
        case ScenarioKind::one_jump: return "one_jump";
        case ScenarioKind::two_jump: return "two_jump";
        case ScenarioKind::tf_one_knot: return "tf_one_knot";
        case ScenarioKind::grid_patch: return "grid_patch";
        case ScenarioKind::regression_stocks: return "regression_stocks";
    }
    return "one_jump";
}

inline ScenarioKind scenario_kind_from_string(const std::string& s)
{
    for (ScenarioKind k : {ScenarioKind::one_jump, ScenarioKind::two_jump, ScenarioKind::tf_one_knot,
                           ScenarioKind::grid_patch, ScenarioKind::regression_stocks})
        if (s == to_string(k)) return k;
    throw InputError("unknown scenario '" + s + "'");
}

struct Scenario {
    ScenarioKind kind = ScenarioKind::one_jump;
    Index n = 60;                  // series length (grid: ignored, rows * cols)
    double delta = 0.0;
    std::vector<Index> locations;  // empty: defaults per kind
    Index rows = 10, cols = 10, patch = 5;
    Index predictors = 3;          // regression
    double ridge = 1e-2;           // regression
    std::uint64_t design_seed = 7; // regression predictors

    /// Defaults: one_jump {30}, two_jump {20, 40}, tf_one_knot {20}, regression {83, 166 | 125} scaled to n.
    std::vector<Index> effective_locations() const
    {
        if (!locations.empty()) return locations;
        switch (kind) {
            case ScenarioKind::one_jump: return {n / 2};
            case ScenarioKind::two_jump: return {n / 3, 2 * n / 3};
            case ScenarioKind::tf_one_knot: return {n / 2};
            case ScenarioKind::regression_stocks: {
                auto sc = [&](double x) { return static_cast<Index>(std::lround(x * static_cast<double>(n) / 250.0)); };
                return {sc(83), sc(166), sc(125)};
            }
            case ScenarioKind::grid_patch: return {};
        }
        return {};
    }

    Index dim() const { return kind == ScenarioKind::grid_patch ? rows * cols : n; }

    void validate() const
    {
        if (kind == ScenarioKind::grid_patch) {
            if (rows < 2 || cols < 2 || patch < 1 || patch > std::min(rows, cols))
                throw InputError("grid_patch: invalid grid or patch size");
            return;
        }
        if (n < 4) throw InputError("scenario: n must be >= 4");
        const auto locs = effective_locations();
        const Index lo = kind == ScenarioKind::regression_stocks ? 1 : 1;
        for (Index l : locs)
            if (l < lo || l >= n) throw InputError("scenario: location " + std::to_string(l) + " outside 1.." + std::to_string(n - 1));
        if (kind == ScenarioKind::two_jump && locs.size() != 2) throw InputError("two_jump: needs two locations");
        if (kind == ScenarioKind::regression_stocks && locs.size() != 3) throw InputError("regression_stocks: needs three locations");
        if (kind == ScenarioKind::regression_stocks && predictors != 3) throw InputError("regression_stocks: uses three predictors");
    }
};

inline std::vector<Edge> grid_edges(Index rows, Index cols)
{
    std::vector<Edge> e;
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) {
            const Index v = r * cols + c;
            if (c + 1 < cols) e.push_back({v, v + 1});
            if (r + 1 < rows) e.push_back({v, v + cols});
        }
    return e;
}

/// Fixed predictor matrix Z (n x 3) for the regression scenario.
inline Mat scenario_predictors(const Scenario& sc)
{
    CounterRng rng(sc.design_seed, 0xD5A61266F0C9392CULL);
    Mat Z(sc.n, sc.predictors);
    for (Index b = 0; b < sc.predictors; ++b)
        for (Index t = 0; t < sc.n; ++t) Z(t, b) = rng.normal();
    return Z;
}

/// Coefficients of the regression scenario: block 1 jumps up at l1 and back at l2,
/// block 2 drops at l3, block 3 is constant.
inline Vec scenario_coefficients(const Scenario& sc)
{
    const auto L = sc.effective_locations();
    const Index n = sc.n;
    Vec beta = Vec::Zero(3 * n);
    for (Index t = 0; t < n; ++t) {
        const Index i = t + 1;
        beta(t) = (i > L[0] && i <= L[1]) ? sc.delta : 0.0;
        beta(n + t) = i <= L[2] ? sc.delta : 0.0;
        beta(2 * n + t) = 0.5 * sc.delta;
    }
    return beta;
}

/// Everything fixed across replications of a scenario.
struct ScenarioSetup {
    Scenario scenario;
    Vec theta;             // mean of y
    PenaltyMatrix D;       // penalty the path runs on
    std::optional<RegressionTransform> transform;
    Mat X;                 // regression design (n x 3n)
    PenaltyMatrix D_coef;  // regression penalty over coefficients
};

inline ScenarioSetup make_setup(const Scenario& sc)
{
    sc.validate();
    ScenarioSetup s;
    s.scenario = sc;
    const auto L = sc.effective_locations();
    const Index n = sc.n;
    switch (sc.kind) {
        case ScenarioKind::one_jump:
            s.theta = Vec::Zero(n);
            s.theta.tail(n - L[0]).setConstant(sc.delta);
            s.D = difference_matrix(n, 1);
            break;
        case ScenarioKind::two_jump:
            s.theta = Vec::Zero(n);
            s.theta.segment(L[0], L[1] - L[0]).setConstant(sc.delta);
            s.D = difference_matrix(n, 1);
            break;
        case ScenarioKind::tf_one_knot:
            s.theta = Vec::Zero(n);
            for (Index i = L[0] + 1; i <= n; ++i)
                s.theta(i - 1) = sc.delta * static_cast<double>(i - L[0]) / static_cast<double>(n - L[0]);
            s.D = difference_matrix(n, 2);
            break;
        case ScenarioKind::grid_patch: {
            s.theta = Vec::Zero(sc.rows * sc.cols);
            for (Index r = sc.rows - sc.patch; r < sc.rows; ++r)
                for (Index c = 0; c < sc.patch; ++c) s.theta(r * sc.cols + c) = sc.delta;
            s.D = graph_incidence(sc.rows * sc.cols, grid_edges(sc.rows, sc.cols));
            break;
        }
        case ScenarioKind::regression_stocks: {
            s.X = varying_coefficient_design(scenario_predictors(sc));
            s.D_coef = block_difference_matrix(3, n);
            s.theta = s.X * scenario_coefficients(sc);
            s.transform = regression_transform(s.X, Vec::Zero(n), s.D_coef, sc.ridge);
            s.D = s.transform->D_tilde;
            break;
        }
    }
    return s;
}

/// Data the path runs on: y itself, or the transformed response for regression.
inline Vec path_response(const ScenarioSetup& s, const Vec& y)
{
    return s.transform ? Vec(s.transform->pullback * y) : y;
}

/// Re-expresses a polyhedron in the transformed response as one in y (rows renormalized).
inline Polyhedron pull_back(const Polyhedron& P, const Mat& L)
{
    Polyhedron out = empty_polyhedron(L.cols());
    out.degenerate_warning = P.degenerate_warning;
    RowSink sink(L.cols());
    for (Index r = 0; r < P.rows(); ++r)
        sink.add(L.transpose() * P.gamma.row(r).transpose(), P.offset(r), P.tags[static_cast<std::size_t>(r)].step,
                 P.tags[static_cast<std::size_t>(r)].family);
    sink.append_to(out);
    return out;
}

// ---------------------------------------------------------------------------
// Noise level by cross-validation

struct SigmaEstimate {
    double sigma = 0.0;
    std::size_t chosen_step = 0; // 0: lambda >= lambda_1
    Index df = 0;
    std::vector<double> cv_error;
    std::vector<double> cv_se;
};

/**
 * Folds take every `folds`-th point. Each training fold is fit along its own
 * path at the knots of the full-data path and held-out points are predicted by
 * linear interpolation of their neighbours. The step is picked by the
 * one-standard-error rule and sigma^2 = ||y - P_null(D_{-B}) y||^2 / (n - nullity).
 */
inline SigmaEstimate estimate_sigma_cv(const Vec& y, const PenaltyMatrix& D, int folds = 5)
{
    if (folds < 2) throw InputError("estimate_sigma_cv: folds must be >= 2");
    const PenaltyKind sk = D.structural_kind();
    if (sk != PenaltyKind::diff1 && sk != PenaltyKind::diff2)
        throw InputError("estimate_sigma_cv: only 1d difference penalties are supported");
    const int order = sk == PenaltyKind::diff1 ? 1 : 2;
    const Index n = y.size();
    if (n != D.cols()) throw DimensionError("estimate_sigma_cv: y length does not match D");
    if (n < folds * (order + 2)) throw InputError("estimate_sigma_cv: too few points for the number of folds");

    PathOptions opts;
    opts.max_steps = 10 * D.rows();
    const PathTrace full = run_path(y, D, opts);
    if (full.steps.empty()) throw InputError("estimate_sigma_cv: path too short for a CV curve");
    const std::size_t K = full.steps.size();

    // Model k (0..K) is evaluated at the lower end of its lambda range.
    std::vector<double> lambdas(K + 1);
    for (std::size_t k = 0; k <= K; ++k) lambdas[k] = full.segments[k].lambda_lo;
    lambdas[0] = full.steps[0].knot;

    Mat err(static_cast<Index>(K + 1), folds);
    for (int f = 0; f < folds; ++f) {
        std::vector<Index> train, test;
        for (Index i = 0; i < n; ++i) (i % folds == f ? test : train).push_back(i);
        Vec yt(static_cast<Index>(train.size()));
        for (std::size_t t = 0; t < train.size(); ++t) yt(static_cast<Index>(t)) = y(train[t]);
        PenaltyMatrix Dt = difference_matrix(yt.size(), order);
        if (D.kind() == PenaltyKind::sparse_augmented) Dt = sparse_augment(Dt, D.meta().alpha);
        PathOptions to;
        to.max_steps = 10 * Dt.rows();
        const PathTrace tr = run_path(yt, Dt, to);
        const double floor_lambda = tr.segments.back().lambda_lo;
        for (std::size_t k = 0; k <= K; ++k) {
            const Vec beta = primal_at(tr, std::max(lambdas[k], floor_lambda));
            double sse = 0.0;
            for (Index i : test) {
                auto it = std::lower_bound(train.begin(), train.end(), i);
                double pred;
                if (it == train.begin()) pred = beta(0);
                else if (it == train.end()) pred = beta(beta.size() - 1);
                else {
                    const Index hi = static_cast<Index>(it - train.begin()), lo = hi - 1;
                    const double w = static_cast<double>(i - train[static_cast<std::size_t>(lo)]) /
                                     static_cast<double>(train[static_cast<std::size_t>(hi)] - train[static_cast<std::size_t>(lo)]);
                    pred = (1 - w) * beta(lo) + w * beta(hi);
                }
                sse += (y(i) - pred) * (y(i) - pred);
            }
            err(static_cast<Index>(k), f) = sse / static_cast<double>(test.size());
        }
    }

    SigmaEstimate out;
    for (std::size_t k = 0; k <= K; ++k) {
        const Vec row = err.row(static_cast<Index>(k)).transpose();
        const double m = row.mean();
        const double var = (row.array() - m).square().sum() / static_cast<double>(folds - 1);
        out.cv_error.push_back(m);
        out.cv_se.push_back(std::sqrt(var / static_cast<double>(folds)));
    }
    const std::size_t kmin = static_cast<std::size_t>(
        std::min_element(out.cv_error.begin(), out.cv_error.end()) - out.cv_error.begin());
    const double bound = out.cv_error[kmin] + out.cv_se[kmin];
    std::size_t chosen = kmin;
    for (std::size_t k = 0; k <= kmin; ++k)
        if (out.cv_error[k] <= bound) {
            chosen = k;
            break;
        }
    out.chosen_step = chosen;
    const std::vector<Index> B = chosen == 0 ? std::vector<Index>{} : full.steps[chosen - 1].boundary;
    const SubspaceFactor fB(D.rows_dense(D.complement_rows(B)));
    out.df = fB.nullity();
    if (n - out.df <= 0) throw NumericalError("estimate_sigma_cv: no residual degrees of freedom");
    out.sigma = std::sqrt((y - fB.project_null(y)).squaredNorm() / static_cast<double>(n - out.df));
    return out;
}

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentConfig {
    Scenario scenario;
    std::size_t reps = 1000;          // maximum number of replications
    std::uint64_t seed = 1;
    double sigma = 1.0;
    std::size_t steps = 1;            // tests at path steps 1..steps (ignored with a stopping rule)
    std::optional<ICConfig> stop;     // test at the step chosen by the IC rule instead
    std::vector<ContrastKind> contrasts{ContrastKind::segment, ContrastKind::spike};
    std::vector<Index> condition_locations; // empty: test every selected location
    bool intervals = false;
    double alpha = 0.1;
    std::size_t target_retained = 0;  // stop early once this many reps were retained at the last tested step
    std::size_t batch = 1000;
    unsigned threads = 0;             // 0: GLINFER_THREADS or 1
};

struct TestRecord {
    std::size_t rep = 0;
    std::size_t step = 0;
    ContrastKind kind = ContrastKind::segment;
    Index location = 0;
    int sign = 0;
    std::size_t tests_in_model = 0;
    double stat = 0, vlo = 0, vup = 0, p_one = 0, p_two = 0;
    double naive_p = std::numeric_limits<double>::quiet_NaN();
    double ci_lo = std::numeric_limits<double>::quiet_NaN(), ci_hi = std::numeric_limits<double>::quiet_NaN();
    double truth = 0;
    bool covered = false;
    bool degenerate = false;
};

struct RepRecord {
    std::size_t rep = 0;
    std::size_t path_steps = 0;
    std::optional<std::size_t> stop_step;
    std::vector<std::size_t> retained_steps;  // steps whose model met the condition
    std::vector<Index> first_locations;       // 1-based locations at step 1
    std::vector<std::vector<Index>> step_locations; // locations of each tested model, before conditioning
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<RepRecord> reps;
    std::vector<TestRecord> tests;
};

inline unsigned experiment_threads(unsigned requested)
{
    if (requested > 0) return requested;
    if (const char* env = std::getenv("GLINFER_THREADS")) {
        const int t = std::atoi(env);
        if (t > 0) return static_cast<unsigned>(t);
    }
    return 1;
}

namespace detail {

inline std::vector<Index> model_locations(const PenaltyMatrix& D, const ModelStep& step)
{
    std::vector<Index> out;
    const Index rows = difference_rows(D);
    for (const auto& [row, s] : step.sorted_boundary())
        if (row < rows) out.push_back(row + 1);
    return out;
}

inline Contrast scenario_contrast(const ScenarioSetup& s, const PathTrace& trace, std::size_t k, ContrastKind kind,
                                  Index location)
{
    switch (s.scenario.kind) {
        case ScenarioKind::grid_patch: {
            if (kind != ContrastKind::segment) throw InputError("grid_patch supports segment contrasts only");
            return gfl_segment_at_edge(graph_partition(trace.D, trace.step(k)), location - 1);
        }
        case ScenarioKind::regression_stocks: {
            if (kind != ContrastKind::segment) throw InputError("regression_stocks supports segment contrasts only");
            const ModelStep& m = trace.step(k);
            int sign = 0;
            for (std::size_t t = 0; t < m.boundary.size(); ++t)
                if (m.boundary[t] == location - 1) sign = m.signs[t];
            return reg_segment(s.X, s.D_coef, m.boundary, location - 1, sign);
        }
        default: return contrast_at(trace, k, kind, location);
    }
}

inline void run_rep(const ExperimentConfig& cfg, const ScenarioSetup& s, std::size_t rep, FactorCache& cache,
                    RepRecord& rr, std::vector<TestRecord>& out)
{
    CounterRng rng(cfg.seed, rep);
    const Vec y = s.theta + rng.normal_vector(s.theta.size(), cfg.sigma);
    const Vec py = path_response(s, y);
    const double sigma2 = cfg.sigma * cfg.sigma;

    PathOptions opts;
    if (!cfg.stop) opts.max_steps = static_cast<Index>(cfg.steps);
    const PathTrace trace = run_path(py, s.D, opts, &cache);
    rr.rep = rep;
    rr.path_steps = trace.size();
    if (!trace.steps.empty()) rr.first_locations = model_locations(s.D, trace.steps[0]);

    struct Target {
        std::size_t step;
        Polyhedron P;
    };
    std::vector<std::size_t> steps;
    std::optional<ICTrace> ict;
    if (cfg.stop) {
        ICConfig ic = *cfg.stop;
        ic.sigma2 = sigma2;
        ict = stop_rule(py, trace, ic, &cache);
        if (!ict->chosen) return;
        rr.stop_step = ict->chosen_step();
        steps.push_back(*ict->chosen_step());
    } else {
        for (std::size_t k = 1; k <= std::min(cfg.steps, trace.size()); ++k) steps.push_back(k);
    }

    for (std::size_t k : steps) {
        std::vector<Index> locs = model_locations(s.D, trace.step(k));
        rr.step_locations.push_back(locs);
        if (!cfg.condition_locations.empty()) {
            std::vector<Index> keep;
            for (Index l : locs)
                if (std::find(cfg.condition_locations.begin(), cfg.condition_locations.end(), l) !=
                    cfg.condition_locations.end())
                    keep.push_back(l);
            locs = std::move(keep);
        }
        if (s.scenario.kind == ScenarioKind::grid_patch) {
            const GraphPartition part = graph_partition(trace.D, trace.step(k));
            std::erase_if(locs, [&](Index l) { return !gfl_testable(part, l - 1); });
        }
        if (locs.empty()) continue;
        rr.retained_steps.push_back(k);

        Polyhedron P;
        if (ict) {
            ICConfig ic = *cfg.stop;
            ic.sigma2 = sigma2;
            P = intersect(build_selection_polyhedron(trace, *ict->decisive_step(), &cache),
                          ic_polyhedron(py, trace, ic, *ict, nullptr, &cache));
        } else {
            P = build_selection_polyhedron(trace, k, &cache);
        }
        if (s.transform) P = pull_back(P, s.transform->pullback);

        for (Index loc : locs)
            for (ContrastKind kind : cfg.contrasts) {
                if (s.scenario.kind == ScenarioKind::grid_patch || s.scenario.kind == ScenarioKind::regression_stocks)
                    if (kind != ContrastKind::segment) continue;
                const Contrast c = scenario_contrast(s, trace, k, kind, loc);
                TestRecord t;
                t.rep = rep;
                t.step = k;
                t.kind = kind;
                t.location = loc;
                t.sign = c.sign;
                t.tests_in_model = locs.size();
                t.truth = c.v.dot(s.theta);
                const TGResult r =
                    cfg.intervals ? tg_interval(c.v, y, sigma2, P, cfg.alpha) : tg_pvalue(c.v, y, sigma2, P);
                t.stat = r.stat;
                t.vlo = r.vlo;
                t.vup = r.vup;
                t.p_one = r.p_one;
                t.p_two = r.p_two;
                t.degenerate = r.degenerate;
                if (r.ci_lo && r.ci_hi) {
                    t.ci_lo = *r.ci_lo;
                    t.ci_hi = *r.ci_hi;
                    t.covered = t.ci_lo <= t.truth && t.truth <= t.ci_hi;
                }
                if (kind == ContrastKind::segment && trace.D.structural_kind() == PenaltyKind::diff1) {
                    const SelectedModel1D m = selected_model(trace, k);
                    t.naive_p = naive_z_pvalue(y, m, m.position(loc), sigma2);
                }
                out.push_back(t);
            }
    }
}

} // namespace detail

/// Replications are independent; results are ordered by replication index regardless of threading.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg)
{
    if (cfg.reps < 1) throw InputError("run_experiment: reps must be >= 1");
    if (!(cfg.sigma > 0)) throw InputError("run_experiment: sigma must be positive");
    if (cfg.stop) cfg.stop->validate();
    const ScenarioSetup setup = make_setup(cfg.scenario);
    const unsigned T = experiment_threads(cfg.threads);
    std::vector<FactorCache> caches(T);

    ExperimentResult res;
    res.config = cfg;
    const std::size_t last_step = cfg.stop ? 0 : cfg.steps;
    std::size_t retained = 0;
    const std::size_t batch = cfg.target_retained > 0 ? std::max<std::size_t>(cfg.batch, 1) : cfg.reps;
    for (std::size_t start = 0; start < cfg.reps; start += batch) {
        const std::size_t stop = std::min(cfg.reps, start + batch);
        std::vector<RepRecord> reps(stop - start);
        std::vector<std::vector<TestRecord>> tests(stop - start);
        std::vector<std::string> errors(T);
        auto work = [&](unsigned tid) {
            try {
                for (std::size_t r = start + tid; r < stop; r += T)
                    detail::run_rep(cfg, setup, r, caches[tid], reps[r - start], tests[r - start]);
            } catch (const std::exception& e) {
                errors[tid] = e.what();
            }
        };
        if (T == 1) work(0);
        else {
            std::vector<std::thread> pool;
            for (unsigned t = 0; t < T; ++t) pool.emplace_back(work, t);
            for (auto& th : pool) th.join();
        }
        for (const auto& e : errors)
            if (!e.empty()) throw NumericalError("run_experiment: " + e);
        for (std::size_t r = 0; r < reps.size(); ++r) {
            const auto& rs = reps[r].retained_steps;
            const bool kept = cfg.stop ? !rs.empty()
                                       : std::find(rs.begin(), rs.end(), last_step) != rs.end();
            retained += kept ? 1 : 0;
            res.reps.push_back(std::move(reps[r]));
            res.tests.insert(res.tests.end(), tests[r].begin(), tests[r].end());
        }
        if (cfg.target_retained > 0 && retained >= cfg.target_retained) break;
    }
    return res;
}

struct GroupSummary {
    std::size_t step = 0;
    ContrastKind kind = ContrastKind::segment;
    std::size_t count = 0;
    double power = 0.0;      // fraction with p_one < 0.05
    double mean_p = 0.0;
    double ks_pvalue = 0.0;  // two-sided uniformity of p_one
    double coverage = std::numeric_limits<double>::quiet_NaN();
    double naive_power = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentSummary {
    std::size_t reps = 0;
    std::map<std::size_t, double> retained_fraction; // step -> fraction of reps retained
    std::vector<GroupSummary> groups;
};

/// Retained p-values (non-degenerate) for one (step, kind) group.
inline std::vector<double> pvalues(const ExperimentResult& r, std::size_t step, ContrastKind kind, bool bonferroni = false)
{
    std::vector<double> p;
    for (const auto& t : r.tests)
        if ((step == 0 || t.step == step) && t.kind == kind && !t.degenerate)
            p.push_back(bonferroni ? std::min(1.0, t.p_one * static_cast<double>(t.tests_in_model)) : t.p_one);
    return p;
}

inline ExperimentSummary summarize(const ExperimentResult& r)
{
    ExperimentSummary s;
    s.reps = r.reps.size();
    std::map<std::size_t, std::size_t> kept;
    for (const auto& rep : r.reps)
        for (std::size_t k : rep.retained_steps) ++kept[k];
    for (const auto& [k, c] : kept) s.retained_fraction[k] = static_cast<double>(c) / static_cast<double>(s.reps);

    std::map<std::pair<std::size_t, int>, std::vector<const TestRecord*>> groups;
    for (const auto& t : r.tests)
        if (!t.degenerate) groups[{t.step, static_cast<int>(t.kind)}].push_back(&t);
    for (const auto& [key, recs] : groups) {
        GroupSummary g;
        g.step = key.first;
        g.kind = static_cast<ContrastKind>(key.second);
        g.count = recs.size();
        std::vector<double> p;
        std::size_t rej = 0, cov = 0, nrej = 0, nnaive = 0;
        for (const auto* t : recs) {
            p.push_back(t->p_one);
            rej += t->p_one < 0.05;
            cov += t->covered;
            if (!std::isnan(t->naive_p)) {
                ++nnaive;
                nrej += t->naive_p < 0.05;
            }
        }
        g.power = static_cast<double>(rej) / static_cast<double>(g.count);
        g.mean_p = mean(p);
        g.ks_pvalue = ks_uniform(p).pvalue;
        if (r.config.intervals) g.coverage = static_cast<double>(cov) / static_cast<double>(g.count);
        if (nnaive) g.naive_power = static_cast<double>(nrej) / static_cast<double>(nnaive);
        s.groups.push_back(g);
    }
    return s;
}

inline void write_results_csv(std::ostream& os, const ExperimentResult& r)
{
    os << "rep,step,kind,location,sign,tests_in_model,stat,vlo,vup,p_one,p_two,naive_p,ci_lo,ci_hi,truth,covered,degenerate\n";
    const auto prec = os.precision(17);
    for (const auto& t : r.tests) {
        os << t.rep << ',' << t.step << ',' << to_string(t.kind) << ',' << t.location << ',' << t.sign << ','
           << t.tests_in_model << ',' << t.stat << ',' << t.vlo << ',' << t.vup << ',' << t.p_one << ',' << t.p_two
           << ',' << t.naive_p << ',' << t.ci_lo << ',' << t.ci_hi << ',' << t.truth << ',' << (t.covered ? 1 : 0)
           << ',' << (t.degenerate ? 1 : 0) << '\n';
    }
    os.precision(prec);
}

} // namespace glinfer
