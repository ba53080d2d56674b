#pragma once

/**
 * Scenario files: a surface, a Morse function or vector field, a mesh
 * resolution, a t grid and a cutoff policy. Running one produces a spectrum
 * CSV and a JSON report with Betti numbers, Morse counts, verdicts and the
 * t-windows where low-eigenvalue counts match the Morse counts.
 */

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "witten/deformation.hpp"
#include "witten/errors.hpp"
#include "witten/exterior_core.hpp"
#include "witten/geometry.hpp"
#include "witten/indices.hpp"
#include "witten/thom_smale.hpp"

namespace witten::scenario {

using nlohmann::json;

inline constexpr int schema_version = 1;

struct FieldSpec
{
    std::string kind;                 // height, deformed_sphere, rotation, constant
    double tilt = 0.0;                // height
    Eigen::Vector2d value{1.0, 0.0};  // constant

    bool scalar() const { return kind == "height" || kind == "deformed_sphere"; }
};

struct Scenario
{
    std::string name;
    std::string surface;              // sphere, embedded_torus, flat_torus
    FieldSpec field;
    int resolution = 16;
    std::vector<double> t;
    std::optional<double> cutoff;     // empty: automatic, per t
    int eigenvalues = 6;              // lowest eigenvalues written per degree and t
    std::string spectra_path;
    std::string report_path;
};

namespace detail_sc {

[[noreturn]] inline void bad(const std::string& what)
{
    throw InvalidInput("cli", "scenario", what);
}

template <class T>
T get(const json& j, const char* key)
{
    if (!j.contains(key))
        bad(std::string("missing key '") + key + "'");
    try
    {
        return j.at(key).get<T>();
    }
    catch (const json::exception&)
    {
        bad(std::string("key '") + key + "' has the wrong type: " + j.at(key).dump());
    }
}

}   // namespace detail_sc

inline Scenario parse(const json& j)
{
    using detail_sc::bad;
    using detail_sc::get;
    if (!j.is_object())
        bad("scenario must be a JSON object");
    Scenario sc;
    sc.name = get<std::string>(j, "name");
    if (sc.name.empty() || sc.name.find_first_of("/\\") != std::string::npos)
        bad("name must be a nonempty file stem, got '" + sc.name + "'");
    sc.surface = get<std::string>(j, "surface");
    if (sc.surface != "sphere" && sc.surface != "embedded_torus" && sc.surface != "flat_torus")
        bad("unknown surface '" + sc.surface + "'");

    const json& f = j.contains("field") ? j.at("field") : json();
    if (!f.is_object())
        bad("missing or malformed 'field'");
    sc.field.kind = get<std::string>(f, "kind");
    if (sc.field.kind == "height")
        sc.field.tilt = f.value("tilt", 0.0);
    else if (sc.field.kind == "constant")
    {
        const auto v = get<std::vector<double>>(f, "value");
        if (v.size() != 2)
            bad("constant field needs two components");
        sc.field.value = Eigen::Vector2d(v[0], v[1]);
    }
    else if (sc.field.kind != "deformed_sphere" && sc.field.kind != "rotation")
        bad("unknown field '" + sc.field.kind + "'");
    if ((sc.field.kind == "deformed_sphere" || sc.field.kind == "rotation") && sc.surface != "sphere")
        bad("field '" + sc.field.kind + "' is defined on the sphere only");
    if (sc.field.kind == "constant" && sc.surface == "sphere")
        bad("a constant field needs a torus");

    sc.resolution = get<int>(j, "resolution");
    if (sc.resolution < 8)
        bad("resolution must be at least 8, got " + std::to_string(sc.resolution));
    sc.t = get<std::vector<double>>(j, "t");
    if (sc.t.empty())
        bad("t grid is empty");
    for (std::size_t i = 0; i < sc.t.size(); ++i)
    {
        if (!(sc.t[i] >= 0.0) || !std::isfinite(sc.t[i]))
            bad("t values must be finite and nonnegative");
        if (i > 0 && !(sc.t[i] > sc.t[i - 1]))
            bad("t grid must be strictly ascending");
    }

    if (j.contains("cutoff"))
    {
        const json& c = j.at("cutoff");
        const auto policy = get<std::string>(c, "policy");
        if (policy == "fixed")
        {
            sc.cutoff = get<double>(c, "value");
            if (!(*sc.cutoff > 0.0))
                bad("fixed cutoff must be positive");
        }
        else if (policy != "auto")
            bad("unknown cutoff policy '" + policy + "'");
    }
    sc.eigenvalues = j.value("eigenvalues", 6);
    if (sc.eigenvalues < 1)
        bad("eigenvalues must be positive");
    sc.spectra_path = sc.name + ".spectra.csv";
    sc.report_path = sc.name + ".report.json";
    if (j.contains("outputs"))
    {
        const json& o = j.at("outputs");
        sc.spectra_path = o.value("spectra", sc.spectra_path);
        sc.report_path = o.value("report", sc.report_path);
    }
    return sc;
}

inline json to_json(const Scenario& sc)
{
    json f = {{"kind", sc.field.kind}};
    if (sc.field.kind == "height")
        f["tilt"] = sc.field.tilt;
    if (sc.field.kind == "constant")
        f["value"] = {sc.field.value(0), sc.field.value(1)};
    json j = {{"name", sc.name}, {"surface", sc.surface}, {"field", f}, {"resolution", sc.resolution},
              {"t", sc.t}, {"eigenvalues", sc.eigenvalues}};
    j["cutoff"] = sc.cutoff ? json{{"policy", "fixed"}, {"value", *sc.cutoff}} : json{{"policy", "auto"}};
    return j;
}

/** ------------------------------------------------------------------- //
 *                              BUILT-INS                               //
 *  ------------------------------------------------------------------- */

inline std::vector<double> geometric_grid(double lo, double hi, double ratio)
{
    std::vector<double> ts;
    for (double t = lo; t <= hi * (1.0 + 1e-9); t *= ratio)
        ts.push_back(std::round(t * 1e6) / 1e6);
    return ts;
}

inline std::vector<Scenario> builtin()
{
    const auto grid = geometric_grid(0.25, 32.0, std::sqrt(2.0));
    auto make = [&](std::string name, std::string surface, FieldSpec field, int res) {
        Scenario sc;
        sc.name = std::move(name);
        sc.surface = std::move(surface);
        sc.field = std::move(field);
        sc.resolution = res;
        sc.t = grid;
        sc.cutoff = 1.0;
        sc.spectra_path = sc.name + ".spectra.csv";
        sc.report_path = sc.name + ".report.json";
        return sc;
    };
    return {
        make("sphere-height", "sphere", {"height", 0.0, {1.0, 0.0}}, 8),
        make("sphere-deformed", "sphere", {"deformed_sphere", 0.0, {1.0, 0.0}}, 8),
        make("sphere-rotation", "sphere", {"rotation", 0.0, {1.0, 0.0}}, 8),
        make("torus-tilted", "embedded_torus", {"height", 0.1, {1.0, 0.0}}, 32),
        make("torus-untilted", "embedded_torus", {"height", 0.0, {1.0, 0.0}}, 32),
        make("flat-torus-constant", "flat_torus", {"constant", 0.0, {1.0, 0.3}}, 16),
    };
}

inline Scenario builtin(const std::string& name)
{
    for (const auto& sc : builtin())
        if (sc.name == name)
            return sc;
    throw InvalidInput("cli", "scenario", "no built-in scenario '" + name + "'");
}

/** ------------------------------------------------------------------- //
 *                                 RUN                                  //
 *  ------------------------------------------------------------------- */

inline geometry::ParamSurface make_surface(const Scenario& sc)
{
    if (sc.surface == "sphere")
        return geometry::ParamSurface::sphere();
    if (sc.surface == "flat_torus")
        return geometry::ParamSurface::flat_torus();
    return geometry::ParamSurface::embedded_torus();
}

inline geometry::ScalarField make_scalar(const Scenario& sc)
{
    return sc.field.kind == "deformed_sphere" ? geometry::deformed_sphere_field() : geometry::tilted_height(sc.field.tilt);
}

inline geometry::VectorField make_vector(const Scenario& sc, const geometry::ParamSurface& s)
{
    if (sc.field.kind == "rotation")
        return geometry::sphere_rotation_field();
    if (sc.field.kind == "constant")
        return geometry::constant_field(sc.field.value);
    return geometry::gradient_field(s, make_scalar(sc));
}

struct RunResult
{
    std::string csv;
    json report;
    bool pass = true;   // every verdict that applies is PASS
};

namespace detail_sc {

inline const char* verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

inline json matrix_json(const Eigen::MatrixXi& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
    {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

}   // namespace detail_sc

/**
 * Run a scenario. Vector-field scenarios use f = 0, so their spectra are the
 * undeformed Hodge spectra and the Morse verdicts are reported as SKIP.
 * Module errors propagate.
 */
inline RunResult run(const Scenario& sc, std::uint64_t seed = 0)
{
    using detail_sc::verdict;
    RunResult out;
    const auto s = make_surface(sc);
    const auto mesh = geometry::triangulate(s, sc.resolution);
    const auto betti = exterior::betti_numbers(mesh.complex);
    const bool scalar = sc.field.scalar();

    std::vector<geometry::CriticalPoint> cps;
    std::vector<long> m;
    Eigen::VectorXd f = Eigen::VectorXd::Zero(mesh.vertex_count());
    if (scalar)
    {
        const auto field = make_scalar(sc);
        cps = geometry::find_critical_points(s, field);
        m = deformation::morse_counts(cps);
        f = geometry::sample_scalar(s, field, mesh);
    }

    json& r = out.report;
    r["schema"] = schema_version;
    r["scenario"] = sc.name;
    r["seed"] = seed;
    r["input"] = to_json(sc);
    r["betti"] = betti;
    r["morse_counts"] = scalar ? json(m) : json(nullptr);
    json points = json::array();
    for (const auto& c : cps)
        points.push_back({{"index", c.index}, {"value", c.value},
                          {"position", {c.position(0), c.position(1), c.position(2)}}});
    r["critical_points"] = points;

    // spectra and counts
    std::ostringstream csv;
    csv << "scenario,degree,t,eigen_index,eigenvalue\n";
    std::vector<deformation::SweepRow> rows;
    std::vector<double> cutoffs;
    for (double t : sc.t)
    {
        const auto dc = deformation::deform(mesh.complex, mesh.masses, f, t);
        std::vector<Eigen::VectorXd> low;
        std::vector<double> all;
        for (int k = 0; k <= 2; ++k)
        {
            low.push_back(deformation::lowest_eigenvalues(dc, k, sc.eigenvalues));
            deformation::write_spectrum_csv(csv, sc.name, k, t, low.back());
            all.insert(all.end(), low.back().data(), low.back().data() + low.back().size());
        }
        const double c = sc.cutoff ? *sc.cutoff : deformation::auto_cutoff(all);
        cutoffs.push_back(c);
        deformation::SweepRow row;
        row.t = t;
        for (int k = 0; k <= 2; ++k)
        {
            const auto& v = low[static_cast<std::size_t>(k)];
            long count = (v.array() <= c).count();
            if (count == v.size())
                count = deformation::low_spectrum(dc, k, c).count();
            row.counts.push_back(count);
        }
        rows.push_back(row);
    }
    out.csv = csv.str();

    json windows = json::object();
    json per_t = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i)
        per_t.push_back({{"t", rows[i].t}, {"cutoff", cutoffs[i]}, {"counts", rows[i].counts}});
    windows["counts"] = per_t;
    deformation::Window w;
    if (scalar)
    {
        w = deformation::count_window(rows, m);
        windows["target"] = m;
        windows["found"] = w.found;
        windows["t_min"] = w.t_min;
        windows["t_max"] = w.t_max;
        windows["span"] = w.span();
    }
    r["windows"] = windows;

    json verdicts;
    const auto ph = indices::poincare_hopf(s, make_vector(sc, s), sc.resolution);
    verdicts["poincare_hopf"] = verdict(ph.pass);
    out.pass = ph.pass;
    r["poincare_hopf"] = indices::to_json(ph);

    if (!scalar)
    {
        for (const char* key : {"weak", "strong", "top_equality", "thom_smale_rank", "instanton_betti"})
            verdicts[key] = "SKIP";
        r["verdicts"] = verdicts;
        return out;
    }

    const auto morse = deformation::morse_report(m, betti);
    verdicts["weak"] = verdict(morse.weak);
    verdicts["strong"] = verdict(morse.strong);
    verdicts["top_equality"] = verdict(morse.top_equality);
    out.pass = out.pass && morse.all();

    const auto field = make_scalar(sc);
    const auto ts = thom_smale::build_complex(s, field, cps);
    const auto ranks = thom_smale::homology_ranks(ts);
    verdicts["thom_smale_rank"] = verdict(ranks == betti);
    out.pass = out.pass && ranks == betti;
    json tsj;
    tsj["generators"] = ts.generators;
    tsj["boundary_1"] = detail_sc::matrix_json(ts.boundary[1]);
    tsj["boundary_2"] = detail_sc::matrix_json(ts.boundary[2]);
    tsj["homology_ranks"] = ranks;
    r["thom_smale"] = tsj;

    // instanton complex at the grid point nearest the geometric middle of the window
    bool instanton_ok = false;
    json ij = nullptr;
    if (w.found)
    {
        const double mid = std::sqrt(w.t_min * w.t_max);
        std::size_t best = 0;
        double gap = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i].t >= w.t_min && rows[i].t <= w.t_max && std::abs(std::log(rows[i].t / mid)) < gap)
            {
                gap = std::abs(std::log(rows[i].t / mid));
                best = i;
            }
        const auto dc = deformation::deform(mesh.complex, mesh.masses, f, rows[best].t);
        // the instanton complex wants [c/2, 2c] empty; a third of the first eigenvalue above the
        // cutoff does that whenever the low cluster sits below a sixth of it
        double c = cutoffs[best], lo = 0.0, hi = std::numeric_limits<double>::infinity();
        for (int k = 0; k <= 2; ++k)
        {
            const auto e = deformation::low_spectrum(dc, k, c);
            if (e.values.size())
                lo = std::max(lo, e.values.maxCoeff());
            hi = std::min(hi, e.next_above);
        }
        if (std::isfinite(hi) && lo < hi / 6.0)
            c = hi / 3.0;
        const auto ic = deformation::instanton_complex(dc, c);
        instanton_ok = ic.betti == betti;
        const auto pinf = thom_smale::p_infinity_matrix(s, field, cps, mesh, ic.bases);
        ij = {{"t", ic.t}, {"cutoff", ic.cutoff}, {"dims", ic.dims}, {"betti", ic.betti}, {"leakage", ic.leakage},
              {"p_infinity", {{"full_rank", pinf.full_rank}, {"condition", pinf.condition}}}};
    }
    verdicts["instanton_betti"] = verdict(instanton_ok);
    out.pass = out.pass && instanton_ok;
    r["instanton"] = ij;
    r["verdicts"] = verdicts;
    return out;
}

}   // namespace witten::scenario
