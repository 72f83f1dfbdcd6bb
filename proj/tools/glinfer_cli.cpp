// glinfer: path, selective inference, step-sign plots, sigma estimation and simulations.
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <CLI11.hpp>
#include <glinfer/glinfer.hpp>
#include <glinfer/io.hpp>

using namespace glinfer;
using json = nlohmann::json;

namespace {

constexpr int exit_input = 2;
constexpr int exit_numerical = 3;

void write_output(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << text;
}

json read_json(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(path + ": " + e.what());
    }
}

struct PenaltyArgs {
    std::string kind = "d1";
    std::string edges;
    std::string matrix;
    double sparse = 0.0;
};

void add_penalty_options(CLI::App* app, PenaltyArgs& p)
{
    app->add_option("--penalty", p.kind, "d1, d2, graph or custom")
        ->check(CLI::IsMember({"d1", "d2", "diff1", "diff2", "graph", "custom"}));
    app->add_option("--edges", p.edges, "edge list CSV (1-indexed i,j) for --penalty graph");
    app->add_option("--matrix", p.matrix, "dense penalty CSV for --penalty custom");
    app->add_option("--sparse", p.sparse, "append sparse * I rows (sparsity augmentation)")->check(CLI::NonNegativeNumber);
}

PenaltyMatrix build_penalty(const PenaltyArgs& p, Index n)
{
    PenaltyMatrix D;
    if (p.kind == "d1" || p.kind == "diff1") D = difference_matrix(n, 1);
    else if (p.kind == "d2" || p.kind == "diff2") D = difference_matrix(n, 2);
    else if (p.kind == "graph") {
        if (p.edges.empty()) throw InputError("--penalty graph needs --edges");
        D = graph_incidence(n, io::read_edges_csv(p.edges));
    } else {
        if (p.matrix.empty()) throw InputError("--penalty custom needs --matrix");
        D = custom_penalty(io::read_matrix_csv(p.matrix));
        if (D.cols() != n) throw InputError("--matrix has " + std::to_string(D.cols()) + " columns, data has " + std::to_string(n));
    }
    if (p.sparse > 0) D = sparse_augment(D, p.sparse);
    return D;
}

ContrastKind contrast_kind_from_string(const std::string& s)
{
    for (ContrastKind k : {ContrastKind::spike, ContrastKind::segment, ContrastKind::graph_segment,
                           ContrastKind::reg_segment, ContrastKind::custom})
        if (s == to_string(k)) return k;
    throw InputError("unknown contrast '" + s + "'");
}

std::optional<ICConfig> ic_from_flags(const std::string& stop, int q, double gamma, double sigma)
{
    if (stop.empty() || stop == "none") return std::nullopt;
    ICConfig c;
    c.penalty = ic_penalty_from_string(stop);
    c.q = q;
    c.gamma = gamma;
    c.sigma2 = sigma * sigma;
    c.validate();
    return c;
}

// --- path -----------------------------------------------------------------

struct PathArgs {
    std::string input, out = "-";
    PenaltyArgs penalty;
    long max_steps = -1;
};

void cmd_path(const PathArgs& a)
{
    const Vec y = io::read_vector_csv(a.input);
    const PenaltyMatrix D = build_penalty(a.penalty, y.size());
    PathOptions opts;
    opts.max_steps = a.max_steps;
    const PathTrace tr = run_path(y, D, opts);
    write_output(a.out, io::trace_to_json(tr).dump(2) + "\n");
}

// --- infer ----------------------------------------------------------------

struct InferArgs {
    std::string trace, out = "-", contrast = "segment", contrast_file, polyhedron_out, stop;
    long step = 0, location = 0, min_gap = 1;
    double sigma = 1.0, alpha = 0.1, gamma = 0.5;
    int q = 2;
    bool no_interval = false;
};

Contrast infer_contrast(const InferArgs& a, const PathTrace& tr, std::size_t k)
{
    if (!a.contrast_file.empty()) {
        Contrast c;
        c.v = io::read_vector_csv(a.contrast_file);
        if (c.v.size() != tr.D.cols()) throw InputError("--contrast-file length does not match the data");
        c.kind = ContrastKind::custom;
        return c;
    }
    if (a.location < 1) throw InputError("--location is required unless --contrast-file is given");
    const ContrastKind kind = contrast_kind_from_string(a.contrast);
    const PenaltyKind sk = tr.D.structural_kind();
    if (sk == PenaltyKind::diff1 || sk == PenaltyKind::diff2) return contrast_at(tr, k, kind, a.location, a.min_gap);
    if (sk == PenaltyKind::graph) {
        if (kind != ContrastKind::segment && kind != ContrastKind::graph_segment)
            throw InputError("graph traces support segment contrasts only");
        const GraphPartition part = graph_partition(tr.D, tr.step(k));
        if (!gfl_testable(part, a.location - 1))
            throw InputError("edge " + std::to_string(a.location) + " does not separate two components at step " + std::to_string(k));
        return gfl_segment_at_edge(part, a.location - 1);
    }
    throw InputError("penalty kind '" + std::string(to_string(tr.D.kind())) + "' needs --contrast-file");
}

void cmd_infer(const InferArgs& a)
{
    const PathTrace tr = io::read_trace(a.trace);
    if (tr.steps.empty()) throw InputError("trace has no path steps");
    if (!(a.sigma > 0)) throw InputError("--sigma must be positive");
    const auto ic = ic_from_flags(a.stop, a.q, a.gamma, a.sigma);
    std::size_t k;
    Polyhedron P;
    json extra;
    if (ic) {
        const ICTrace ict = stop_rule(tr.y, tr, *ic);
        if (!ict.chosen) throw NumericalError("stopping rule did not select a step within the traced path");
        k = *ict.chosen_step();
        P = intersect(build_selection_polyhedron(tr, *ict.decisive_step()), ic_polyhedron(tr.y, tr, *ic, ict));
        extra["stop"] = {{"rule", to_string(ic->penalty)}, {"q", ic->q}, {"decisive_step", *ict.decisive_step()}, {"ic_values", ict.values}};
    } else {
        k = a.step > 0 ? static_cast<std::size_t>(a.step) : tr.size();
        P = build_selection_polyhedron(tr, k);
    }
    const Contrast c = infer_contrast(a, tr, k);
    const double sigma2 = a.sigma * a.sigma;
    const TGResult r = a.no_interval ? tg_pvalue(c.v, tr.y, sigma2, P) : tg_interval(c.v, tr.y, sigma2, P, a.alpha);
    json j = io::tg_result_to_json(r);
    j["step"] = k;
    j["contrast"] = {{"kind", to_string(c.kind)}, {"location", c.location}, {"sign", c.sign}};
    j["polyhedron_rows"] = P.rows();
    j["degenerate_warning"] = P.degenerate_warning;
    if (!extra.is_null()) j.update(extra);
    if (!a.polyhedron_out.empty()) write_output(a.polyhedron_out, io::polyhedron_to_json(P).dump() + "\n");
    write_output(a.out, j.dump(2) + "\n");
    if (r.degenerate) throw NumericalError("truncation interval is degenerate; the pivot is undefined");
}

// --- stepsign -------------------------------------------------------------

struct StepSignArgs {
    std::string trace, format = "txt", out = "-";
    long step = 0, min_gap = 1;
};

void cmd_stepsign(const StepSignArgs& a)
{
    const PathTrace tr = io::read_trace(a.trace);
    const std::size_t k = a.step > 0 ? static_cast<std::size_t>(a.step) : tr.size();
    StepSignModel m = step_sign_model(tr, k);
    if (a.min_gap > 1) {
        SelectedModel1D sm;
        sm.n = m.n;
        sm.changepoints = m.locations;
        sm.signs = m.signs;
        sm = declutter(sm, a.min_gap);
        m.locations = sm.changepoints;
        m.signs = sm.signs;
    }
    write_output(a.out, a.format == "svg" ? io::step_sign_svg(m) : io::step_sign_txt(m));
}

// --- estimate-sigma -------------------------------------------------------

struct SigmaArgs {
    std::string input, out = "-";
    PenaltyArgs penalty;
    int folds = 5;
};

void cmd_sigma(const SigmaArgs& a)
{
    const Vec y = io::read_vector_csv(a.input);
    const SigmaEstimate e = estimate_sigma_cv(y, build_penalty(a.penalty, y.size()), a.folds);
    json j{{"sigma", e.sigma}, {"df", e.df}, {"chosen_step", e.chosen_step}, {"folds", a.folds},
           {"cv_error", e.cv_error}, {"cv_se", e.cv_se}};
    write_output(a.out, j.dump(2) + "\n");
}

// --- simulate -------------------------------------------------------------

struct SimArgs {
    std::string config, out = "-", summary;
    std::optional<std::string> scenario, stop;
    std::optional<long> n, reps, steps, threads, target;
    std::optional<double> delta, sigma, alpha;
    std::optional<std::uint64_t> seed;
    std::vector<long> condition;
    bool intervals = false;
    int q = 2;
};

ExperimentConfig config_from_json(const json& j)
{
    ExperimentConfig c;
    if (j.contains("scenario")) {
        const json& s = j.at("scenario");
        c.scenario.kind = scenario_kind_from_string(s.value("kind", std::string("one_jump")));
        c.scenario.n = s.value("n", c.scenario.n);
        c.scenario.delta = s.value("delta", c.scenario.delta);
        c.scenario.locations = s.value("locations", std::vector<Index>{});
        c.scenario.rows = s.value("rows", c.scenario.rows);
        c.scenario.cols = s.value("cols", c.scenario.cols);
        c.scenario.patch = s.value("patch", c.scenario.patch);
        c.scenario.ridge = s.value("ridge", c.scenario.ridge);
        c.scenario.design_seed = s.value("design_seed", c.scenario.design_seed);
    }
    c.reps = j.value("reps", c.reps);
    c.seed = j.value("seed", c.seed);
    c.sigma = j.value("sigma", c.sigma);
    c.steps = j.value("steps", c.steps);
    if (j.contains("stop") && !j.at("stop").is_null()) {
        const json& s = j.at("stop");
        ICConfig ic;
        ic.penalty = ic_penalty_from_string(s.value("penalty", std::string("bic")));
        ic.q = s.value("q", ic.q);
        ic.gamma = s.value("gamma", ic.gamma);
        c.stop = ic;
    }
    if (j.contains("contrasts")) {
        c.contrasts.clear();
        for (const auto& k : j.at("contrasts")) c.contrasts.push_back(contrast_kind_from_string(k.get<std::string>()));
    }
    c.condition_locations = j.value("condition_locations", std::vector<Index>{});
    c.intervals = j.value("intervals", c.intervals);
    c.alpha = j.value("alpha", c.alpha);
    c.target_retained = j.value("target_retained", c.target_retained);
    c.batch = j.value("batch", c.batch);
    c.threads = j.value("threads", c.threads);
    return c;
}

json summary_json(const ExperimentResult& r)
{
    const ExperimentSummary s = summarize(r);
    json j;
    j["reps"] = s.reps;
    json rf = json::object();
    for (const auto& [k, f] : s.retained_fraction) rf[std::to_string(k)] = f;
    j["retained_fraction"] = rf;
    json groups = json::array();
    for (const auto& g : s.groups)
        groups.push_back({{"step", g.step}, {"kind", to_string(g.kind)}, {"count", g.count}, {"power", g.power},
                          {"mean_p", g.mean_p}, {"ks_pvalue", g.ks_pvalue}, {"coverage", io::detail::num(g.coverage)},
                          {"naive_power", io::detail::num(g.naive_power)}});
    j["groups"] = groups;
    return j;
}

void cmd_simulate(const SimArgs& a)
{
    ExperimentConfig c = a.config.empty() ? ExperimentConfig{} : config_from_json(read_json(a.config));
    if (a.scenario) c.scenario.kind = scenario_kind_from_string(*a.scenario);
    if (a.n) c.scenario.n = *a.n;
    if (a.delta) c.scenario.delta = *a.delta;
    if (a.reps) c.reps = static_cast<std::size_t>(*a.reps);
    if (a.steps) c.steps = static_cast<std::size_t>(*a.steps);
    if (a.threads) c.threads = static_cast<unsigned>(*a.threads);
    if (a.target) c.target_retained = static_cast<std::size_t>(*a.target);
    if (a.sigma) c.sigma = *a.sigma;
    if (a.alpha) c.alpha = *a.alpha;
    if (a.seed) c.seed = *a.seed;
    if (!a.condition.empty()) c.condition_locations.assign(a.condition.begin(), a.condition.end());
    if (a.intervals) c.intervals = true;
    if (a.stop) c.stop = ic_from_flags(*a.stop, a.q, 0.5, c.sigma);
    const ExperimentResult r = run_experiment(c);
    std::ostringstream os;
    write_results_csv(os, r);
    write_output(a.out, os.str());
    if (!a.summary.empty()) write_output(a.summary, summary_json(r).dump(2) + "\n");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Selective inference for generalized lasso paths"};
    app.require_subcommand(1);

    PathArgs pa;
    auto* path = app.add_subcommand("path", "compute the dual solution path and write a trace JSON");
    path->add_option("--input", pa.input, "data CSV, one value per line")->required();
    add_penalty_options(path, pa.penalty);
    path->add_option("--max-steps", pa.max_steps, "stop after this many steps (default: full path)");
    path->add_option("--out", pa.out, "trace JSON (default stdout)");

    InferArgs ia;
    auto* infer = app.add_subcommand("infer", "TG p-value and interval for a contrast on a traced model");
    infer->add_option("--trace", ia.trace, "trace JSON from `path`")->required();
    infer->add_option("--step", ia.step, "path step to condition on (default: last traced step)");
    infer->add_option("--contrast", ia.contrast, "spike or segment")->check(CLI::IsMember({"spike", "segment", "graph_segment"}));
    infer->add_option("--location", ia.location, "changepoint / knot location, or boundary edge row for graphs (1-based)");
    infer->add_option("--min-gap", ia.min_gap, "declutter changepoints closer than this before forming the contrast");
    infer->add_option("--contrast-file", ia.contrast_file, "custom contrast vector CSV");
    infer->add_option("--sigma", ia.sigma, "noise standard deviation");
    infer->add_option("--alpha", ia.alpha, "interval level 1 - alpha")->check(CLI::Range(0.0, 1.0));
    infer->add_flag("--no-interval", ia.no_interval, "skip interval inversion");
    infer->add_option("--stop", ia.stop, "condition on an IC stopping rule instead of --step")->check(CLI::IsMember({"none", "aic", "bic", "ebic"}));
    infer->add_option("--q", ia.q, "rises required by the stopping rule");
    infer->add_option("--gamma", ia.gamma, "EBIC gamma");
    infer->add_option("--polyhedron-out", ia.polyhedron_out, "also write the conditioning polyhedron JSON");
    infer->add_option("--out", ia.out, "result JSON (default stdout)");

    StepSignArgs sa;
    auto* stepsign = app.add_subcommand("stepsign", "locations and signs of a traced model");
    stepsign->add_option("--trace", sa.trace, "trace JSON")->required();
    stepsign->add_option("--step", sa.step, "path step (default: last)");
    stepsign->add_option("--min-gap", sa.min_gap, "declutter nearby locations");
    stepsign->add_option("--format", sa.format, "txt or svg")->check(CLI::IsMember({"txt", "svg"}));
    stepsign->add_option("--out", sa.out, "output file (default stdout)");

    SigmaArgs ga;
    auto* sigma = app.add_subcommand("estimate-sigma", "noise level by cross-validation along the path");
    sigma->add_option("--input", ga.input, "data CSV")->required();
    add_penalty_options(sigma, ga.penalty);
    sigma->add_option("--folds", ga.folds, "number of folds")->check(CLI::PositiveNumber);
    sigma->add_option("--out", ga.out, "result JSON (default stdout)");

    SimArgs ma;
    auto* sim = app.add_subcommand("simulate", "run a simulation study");
    sim->add_option("--config", ma.config, "experiment JSON");
    sim->add_option("--scenario", ma.scenario, "one_jump, two_jump, tf_one_knot, grid_patch or regression_stocks");
    sim->add_option("--n", ma.n, "series length");
    sim->add_option("--delta", ma.delta, "signal size");
    sim->add_option("--reps", ma.reps, "replications");
    sim->add_option("--seed", ma.seed, "random seed");
    sim->add_option("--sigma", ma.sigma, "noise standard deviation");
    sim->add_option("--steps", ma.steps, "test at steps 1..steps");
    sim->add_option("--condition", ma.condition, "keep only reps whose model contains these locations");
    sim->add_option("--target-retained", ma.target, "stop once this many reps are retained");
    sim->add_flag("--intervals", ma.intervals, "compute TG intervals");
    sim->add_option("--alpha", ma.alpha, "interval level 1 - alpha");
    sim->add_option("--stop", ma.stop, "IC stopping rule")->check(CLI::IsMember({"none", "aic", "bic", "ebic"}));
    sim->add_option("--q", ma.q, "rises required by the stopping rule");
    sim->add_option("--threads", ma.threads, "worker threads (default GLINFER_THREADS or 1)");
    sim->add_option("--out", ma.out, "per-test results CSV (default stdout)");
    sim->add_option("--summary", ma.summary, "summary JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_input;
    }

    try {
        if (*path) cmd_path(pa);
        else if (*infer) cmd_infer(ia);
        else if (*stepsign) cmd_stepsign(sa);
        else if (*sigma) cmd_sigma(ga);
        else if (*sim) cmd_simulate(ma);
    } catch (const NumericalError& e) {
        std::cerr << "glinfer: numerical error: " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "glinfer: " << e.what() << '\n';
        return exit_input;
    } catch (const json::exception& e) {
        std::cerr << "glinfer: malformed JSON: " << e.what() << '\n';
        return exit_input;
    }
    return 0;
}
