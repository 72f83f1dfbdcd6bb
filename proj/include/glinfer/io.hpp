#pragma once
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>
#include <nlohmann/json.hpp>
#include <glinfer/contrast.hpp>
#include <glinfer/errors.hpp>
#include <glinfer/path.hpp>
#include <glinfer/penalty.hpp>
#include <glinfer/polytope.hpp>
#include <glinfer/tg.hpp>

namespace glinfer::io {

using json = nlohmann::json;

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    return out;
}

inline bool parse_double(const std::string& s, double& out)
{
    if (s.empty()) return false;
    try {
        std::size_t pos = 0;
        out = std::stod(s, &pos);
        return pos == s.size();
    } catch (const std::exception&) {
        return false;
    }
}

/// Numeric rows of a CSV file; a non-numeric first line is treated as a header.
inline std::vector<std::vector<double>> read_numeric_rows(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        bool ok = true;
        for (const auto& cell : split(line)) {
            double v;
            if (!parse_double(cell, v)) {
                ok = false;
                break;
            }
            row.push_back(v);
        }
        if (!ok) {
            if (first) {
                first = false;
                continue;
            }
            throw InputError(path + ":" + std::to_string(lineno) + ": non-numeric value");
        }
        first = false;
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json num(double x)
{
    if (std::isnan(x)) return nullptr;
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

inline double get_num(const json& j)
{
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw InputError("expected a number, got '" + s + "'");
    }
    return j.get<double>();
}

inline json vec_json(const Vec& v)
{
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
    return a;
}

inline Vec json_vec(const json& a)
{
    Vec v(static_cast<Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Index>(i)) = get_num(a[i]);
    return v;
}

} // namespace detail

/// One value per line (first column if the file has several); optional header.
inline Vec read_vector_csv(const std::string& path)
{
    const auto rows = detail::read_numeric_rows(path);
    if (rows.empty()) throw InputError("'" + path + "' contains no data");
    Vec v(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) v(static_cast<Index>(i)) = rows[i].at(0);
    return v;
}

inline Mat read_matrix_csv(const std::string& path)
{
    const auto rows = detail::read_numeric_rows(path);
    if (rows.empty()) throw InputError("'" + path + "' contains no data");
    Mat M(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) throw InputError(path + ": ragged rows");
        for (std::size_t c = 0; c < rows[r].size(); ++c) M(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    }
    return M;
}

/// Two 1-indexed integer columns (i, j) per line, returned 0-based.
inline std::vector<Edge> read_edges_csv(const std::string& path)
{
    std::vector<Edge> out;
    for (const auto& row : detail::read_numeric_rows(path)) {
        if (row.size() != 2) throw InputError(path + ": edge rows need exactly two columns");
        if (row[0] != std::floor(row[0]) || row[1] != std::floor(row[1]))
            throw InputError(path + ": edge endpoints must be integers");
        out.push_back({static_cast<Index>(row[0]) - 1, static_cast<Index>(row[1]) - 1});
    }
    return out;
}

inline json penalty_to_json(const PenaltyMatrix& D)
{
    json j;
    j["kind"] = to_string(D.kind());
    j["rows"] = D.rows();
    j["cols"] = D.cols();
    j["base_kind"] = to_string(D.meta().base_kind);
    j["alpha"] = D.meta().alpha;
    j["ridge"] = D.meta().ridge;
    json edges = json::array();
    for (const Edge& e : D.meta().edges) edges.push_back({e.i + 1, e.j + 1});
    j["edges"] = edges;
    json trip = json::array();
    for (Index r = 0; r < D.rows(); ++r)
        for (SpMat::InnerIterator it(D.sparse(), r); it; ++it) trip.push_back({r + 1, it.col() + 1, it.value()});
    j["triplets"] = trip;
    return j;
}

inline PenaltyMatrix penalty_from_json(const json& j)
{
    const Index m = j.at("rows").get<Index>(), n = j.at("cols").get<Index>();
    std::vector<Eigen::Triplet<double>> trip;
    for (const auto& t : j.at("triplets")) {
        const Index r = t.at(0).get<Index>() - 1, c = t.at(1).get<Index>() - 1;
        if (r < 0 || r >= m || c < 0 || c >= n) throw InputError("penalty: triplet out of range");
        trip.emplace_back(r, c, t.at(2).get<double>());
    }
    SpMat S(m, n);
    S.setFromTriplets(trip.begin(), trip.end());
    PenaltyMeta meta;
    meta.alpha = j.value("alpha", 0.0);
    meta.ridge = j.value("ridge", 0.0);
    meta.base_kind = penalty_kind_from_string(j.value("base_kind", std::string("custom")));
    for (const auto& e : j.value("edges", json::array())) meta.edges.push_back({e.at(0).get<Index>() - 1, e.at(1).get<Index>() - 1});
    return {std::move(S), penalty_kind_from_string(j.at("kind").get<std::string>()), std::move(meta)};
}

/// Trace document; boundary rows and locations are 1-indexed.
inline json trace_to_json(const PathTrace& t)
{
    json j;
    j["format"] = "glinfer-trace";
    j["version"] = 1;
    j["n"] = t.D.cols();
    j["y"] = detail::vec_json(t.y);
    j["penalty"] = penalty_to_json(t.D);
    j["termination"] = to_string(t.termination);
    j["knots"] = t.knots();
    json steps = json::array();
    for (std::size_t k = 0; k < t.steps.size(); ++k) {
        const ModelStep& m = t.steps[k];
        json s;
        s["step"] = k + 1;
        json b = json::array();
        for (Index r : m.boundary) b.push_back(r + 1);
        s["boundary"] = b;
        s["signs"] = m.signs;
        s["action"] = to_string(m.action);
        s["changed"] = m.changed + 1;
        s["knot"] = m.knot;
        json h = json::array();
        for (const auto& [r, sg] : m.hit_signs) h.push_back({r + 1, sg});
        s["hit_signs"] = h;
        json l = json::array();
        for (Index r : m.leave_viable) l.push_back(r + 1);
        s["leave_viable"] = l;
        s["leave_checked"] = m.leave_checked;
        steps.push_back(s);
    }
    j["steps"] = steps;
    json segs = json::array();
    for (const auto& seg : t.segments)
        segs.push_back({{"lambda_hi", detail::num(seg.lambda_hi)},
                        {"lambda_lo", detail::num(seg.lambda_lo)},
                        {"a", detail::vec_json(seg.a)},
                        {"b", detail::vec_json(seg.b)}});
    j["dual_segments"] = segs;
    return j;
}

inline Termination termination_from_string(const std::string& s)
{
    if (s == "zero_knot") return Termination::zero_knot;
    if (s == "degenerate") return Termination::degenerate;
    if (s == "max_steps") return Termination::max_steps;
    throw InputError("unknown termination '" + s + "'");
}

inline PathTrace trace_from_json(const json& j)
{
    if (j.value("format", std::string()) != "glinfer-trace") throw InputError("not a glinfer trace document");
    PathTrace t;
    t.D = penalty_from_json(j.at("penalty"));
    t.y = detail::json_vec(j.at("y"));
    if (t.y.size() != t.D.cols()) throw InputError("trace: y length does not match the penalty");
    t.termination = termination_from_string(j.at("termination").get<std::string>());
    for (const auto& s : j.at("steps")) {
        ModelStep m;
        for (const auto& r : s.at("boundary")) m.boundary.push_back(r.get<Index>() - 1);
        m.signs = s.at("signs").get<std::vector<int>>();
        m.action = s.at("action").get<std::string>() == "leave" ? Action::leave : Action::hit;
        m.changed = s.at("changed").get<Index>() - 1;
        m.knot = s.at("knot").get<double>();
        for (const auto& h : s.at("hit_signs")) m.hit_signs.emplace_back(h.at(0).get<Index>() - 1, h.at(1).get<int>());
        for (const auto& r : s.at("leave_viable")) m.leave_viable.push_back(r.get<Index>() - 1);
        m.leave_checked = s.value("leave_checked", true);
        if (m.signs.size() != m.boundary.size()) throw InputError("trace: signs and boundary differ in length");
        t.steps.push_back(std::move(m));
    }
    for (const auto& s : j.at("dual_segments")) {
        DualSegment seg;
        seg.lambda_hi = detail::get_num(s.at("lambda_hi"));
        seg.lambda_lo = detail::get_num(s.at("lambda_lo"));
        seg.a = detail::json_vec(s.at("a"));
        seg.b = detail::json_vec(s.at("b"));
        t.segments.push_back(std::move(seg));
    }
    return t;
}

inline PathTrace read_trace(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InputError(path + ": " + e.what());
    }
    return trace_from_json(j);
}

inline json polyhedron_to_json(const Polyhedron& P)
{
    json j;
    j["dim"] = P.dim;
    j["rows"] = P.rows();
    json g = json::array(), tags = json::array();
    for (Index r = 0; r < P.rows(); ++r) {
        g.push_back(detail::vec_json(P.gamma.row(r).transpose()));
        tags.push_back({{"step", P.tags[static_cast<std::size_t>(r)].step},
                        {"family", to_string(P.tags[static_cast<std::size_t>(r)].family)}});
    }
    j["gamma"] = g;
    j["offset"] = detail::vec_json(P.offset);
    j["row_scale"] = detail::vec_json(P.row_scale);
    j["tags"] = tags;
    j["degenerate_warning"] = P.degenerate_warning;
    return j;
}

inline Polyhedron polyhedron_from_json(const json& j)
{
    Polyhedron P = empty_polyhedron(j.at("dim").get<Index>());
    const auto& g = j.at("gamma");
    P.gamma.resize(static_cast<Index>(g.size()), P.dim);
    for (std::size_t r = 0; r < g.size(); ++r) P.gamma.row(static_cast<Index>(r)) = detail::json_vec(g[r]).transpose();
    P.offset = detail::json_vec(j.at("offset"));
    P.row_scale = detail::json_vec(j.at("row_scale"));
    for (const auto& t : j.at("tags")) P.tags.push_back({t.at("step").get<int>(), row_family_from_string(t.at("family").get<std::string>())});
    P.degenerate_warning = j.value("degenerate_warning", false);
    return P;
}

inline json tg_result_to_json(const TGResult& r)
{
    json j;
    j["stat"] = detail::num(r.stat);
    j["vlo"] = detail::num(r.vlo);
    j["vup"] = detail::num(r.vup);
    j["p_one"] = detail::num(r.p_one);
    j["p_two"] = detail::num(r.p_two);
    j["degenerate"] = r.degenerate;
    if (r.ci_lo && r.ci_hi) j["ci"] = {detail::num(*r.ci_lo), detail::num(*r.ci_hi)};
    else j["ci"] = nullptr;
    j["alpha"] = detail::num(r.alpha);
    return j;
}

/// "location sign" per line.
inline std::string step_sign_txt(const StepSignModel& m)
{
    std::ostringstream os;
    for (std::size_t t = 0; t < m.locations.size(); ++t) os << m.locations[t] << ' ' << (m.signs[t] > 0 ? "+1" : "-1") << '\n';
    return os.str();
}

/**
 * Step-sign plot: a horizontal segment at +1 or -1 from each location to the
 * next (the sign of the jump there) and dashed vertical markers at the
 * locations. No magnitudes.
 */
inline std::string step_sign_svg(const StepSignModel& m, int width = 640, int height = 240)
{
    const double pad = 30.0;
    const double n = static_cast<double>(std::max<Index>(m.n, 1));
    auto X = [&](double loc) { return pad + (width - 2 * pad) * loc / n; };
    auto Y = [&](double lev) { return 0.5 * height - (0.5 * height - pad) * lev; };
    std::ostringstream os;
    os.precision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << X(0) << "\" y1=\"" << Y(0) << "\" x2=\"" << X(n) << "\" y2=\"" << Y(0)
       << "\" stroke=\"lightgray\"/>\n";
    for (std::size_t t = 0; t < m.locations.size(); ++t) {
        const double x0 = static_cast<double>(m.locations[t]);
        const double x1 = t + 1 < m.locations.size() ? static_cast<double>(m.locations[t + 1]) : n;
        const double lev = m.signs[t] > 0 ? 1.0 : -1.0;
        os << "<line x1=\"" << X(x0) << "\" y1=\"" << pad << "\" x2=\"" << X(x0) << "\" y2=\"" << height - pad
           << "\" stroke=\"gray\" stroke-dasharray=\"4,3\"/>\n";
        os << "<line x1=\"" << X(x0) << "\" y1=\"" << Y(lev) << "\" x2=\"" << X(x1) << "\" y2=\"" << Y(lev)
           << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << X(x0) + 3 << "\" y=\"" << pad - 8 << "\" font-size=\"11\">" << m.locations[t]
           << (m.signs[t] > 0 ? "+" : "-") << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace glinfer::io
