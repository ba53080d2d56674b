#pragma once

/**
 * The acceptance suite: thirteen numbered checks across all modules. Each
 * check returns a pass flag, a one-line summary and a JSON payload; timings
 * are kept out of the payload so reports are byte-reproducible.
 */

#include <Eigen/Dense>

#include <chrono>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "witten/clifford.hpp"
#include "witten/deformation.hpp"
#include "witten/exterior_core.hpp"
#include "witten/geometry.hpp"
#include "witten/indices.hpp"
#include "witten/oscillator.hpp"
#include "witten/scenario.hpp"
#include "witten/thom_smale.hpp"

namespace witten::acceptance {

using nlohmann::json;

struct Result
{
    int id = 0;
    std::string module;
    std::string title;
    bool pass = false;
    std::string summary;
    json data;
    double seconds = 0.0;
};

struct Criterion
{
    int id;
    std::string module;
    std::string title;
    double time_limit;   // seconds, 0 for none
    std::function<Result(std::uint64_t)> check;
};

namespace detail_acc {

inline std::string fmt(double x)
{
    std::ostringstream s;
    s.precision(3);
    s << x;
    return s.str();
}

inline Eigen::VectorXd random_unit(int n, std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i)
        v(i) = g(rng);
    return v / v.norm();
}

inline Eigen::MatrixXd random_nondegenerate(int n, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    while (true)
    {
        Eigen::MatrixXd a(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                a(i, j) = u(rng);
        if (std::abs(a.determinant()) > 0.1)
            return a;
    }
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

struct Scene
{
    geometry::ParamSurface surface;
    geometry::ScalarField field;
    geometry::Mesh mesh;
    Eigen::VectorXd f;
    std::vector<geometry::CriticalPoint> cps;
};

inline Scene scene(const std::string& name)
{
    const auto sc = scenario::builtin(name);
    Scene s{scenario::make_surface(sc), scenario::make_scalar(sc), {}, {}, {}};
    s.mesh = geometry::triangulate(s.surface, sc.resolution);
    s.f = geometry::sample_scalar(s.surface, s.field, s.mesh);
    s.cps = geometry::find_critical_points(s.surface, s.field);
    return s;
}

}   // namespace detail_acc

/** ------------------------------------------------------------------- //
 *                              CRITERIA                                //
 *  ------------------------------------------------------------------- */

inline Result clifford_relations(std::uint64_t seed)
{
    using namespace clifford;
    Result r;
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    json per_n = json::object();
    for (int n = 2; n <= 6; ++n)
    {
        const ExteriorBasis b(n);
        const FiberOperator id = FiberOperator::Identity(b.size(), b.size());
        double w = 0.0;
        for (int trial = 0; trial < 1000; ++trial)
        {
            const Eigen::VectorXd e = detail_acc::random_unit(n, rng), f = detail_acc::random_unit(n, rng);
            const FiberOperator ce = clifford_c(b, e), cf = clifford_c(b, f);
            const FiberOperator he = clifford_chat(b, e), hf = clifford_chat(b, f);
            w = std::max(w, detail_acc::max_abs(ce * cf + cf * ce + 2.0 * e.dot(f) * id));
            w = std::max(w, detail_acc::max_abs(he * hf + hf * he - 2.0 * e.dot(f) * id));
            w = std::max(w, detail_acc::max_abs(ce * hf + hf * ce));
        }
        per_n[std::to_string(n)] = w;
        worst = std::max(worst, w);
    }
    r.pass = worst < 1e-12;
    r.summary = "max residual " + detail_acc::fmt(worst) + " over 5000 pairs";
    r.data = {{"pairs_per_n", 1000}, {"max_residual", per_n}};
    return r;
}

inline Result kernel_parity_lemma(std::uint64_t seed)
{
    using namespace clifford;
    Result r;
    std::mt19937_64 rng(seed + 1);
    int samples = 0, ok = 0;
    double min_gap = std::numeric_limits<double>::infinity();
    for (int n = 2; n <= 5; ++n)
        for (int trial = 0; trial < 200; ++trial)
        {
            const Eigen::MatrixXd a = detail_acc::random_nondegenerate(n, rng);
            const FiberOperator l = build_L(a);
            const auto ev = detail::dense_symmetric_eigen(0.5 * (l + l.transpose())).values;
            const double threshold = 1e-9 * std::max(1.0, polar_decomposition(a).s.sum());
            const long dim = (ev.array().abs() <= threshold).count();
            const double gap = ev(1) / std::max(std::abs(ev(0)), threshold);
            min_gap = std::min(min_gap, gap);
            bool good = dim == 1 && gap >= 10.0;
            if (good)
            {
                const auto info = kernel_parity(a);
                good = (info.parity == Parity::Even) == (a.determinant() > 0);
            }
            ok += good;
            ++samples;
        }
    r.pass = ok == samples;
    r.summary = std::to_string(ok) + "/" + std::to_string(samples) + " samples with a 1-dim kernel of parity sgn det A";
    r.data = {{"samples", samples}, {"agree", ok}, {"min_gap_ratio", min_gap}};
    return r;
}

inline Result eta_relations(std::uint64_t seed)
{
    using namespace clifford;
    Result r;
    std::mt19937_64 rng(seed + 2);
    double eta_worst = 0.0, recon_worst = 0.0;
    for (int n = 2; n <= 5; ++n)
        for (int trial = 0; trial < 25; ++trial)
        {
            const Eigen::MatrixXd a = detail_acc::random_nondegenerate(n, rng);
            const LocalModel lm = polar_decomposition(a);
            const ExteriorBasis b(n);
            const auto eta = eta_operators(a);
            const FiberOperator id = FiberOperator::Identity(b.size(), b.size());
            for (int i = 0; i < n; ++i)
            {
                const auto& ei = eta[static_cast<std::size_t>(i)];
                eta_worst = std::max(eta_worst, detail_acc::max_abs(ei - ei.transpose()));
                eta_worst = std::max(eta_worst, detail_acc::max_abs(ei * ei - id));
                const FiberOperator hi = clifford_chat(b, lm.W.col(i));
                eta_worst = std::max(eta_worst, detail_acc::max_abs(hi * ei + ei * hi));
                for (int j = 0; j < n; ++j)
                {
                    if (j == i)
                        continue;
                    const auto& ej = eta[static_cast<std::size_t>(j)];
                    eta_worst = std::max(eta_worst, detail_acc::max_abs(ei * ej - ej * ei));
                    const FiberOperator hj = clifford_chat(b, lm.W.col(j));
                    eta_worst = std::max(eta_worst, detail_acc::max_abs(hj * ei - ei * hj));
                }
            }
            recon_worst = std::max(recon_worst, detail_acc::max_abs(build_L(a) - L_from_eta(a)));
        }
    r.pass = eta_worst < 1e-12 && recon_worst < 1e-12;
    r.summary = "eta residual " + detail_acc::fmt(eta_worst) + ", reconstruction " + detail_acc::fmt(recon_worst);
    r.data = {{"matrices", 100}, {"eta_residual", eta_worst}, {"reconstruction_residual", recon_worst}};
    return r;
}

inline Result oscillator_spectrum(std::uint64_t)
{
    using namespace oscillator;
    Result r;
    r.pass = true;
    json rows = json::array();
    for (double a : {0.5, 1.0, 2.0})
        for (double t : {1.0, 2.0, 4.0})
        {
            const Eigen::MatrixXd am = Eigen::MatrixXd::Constant(1, 1, a);
            const GridSpec g{1, recommended_half_width(t, a), 801};
            const auto op = build_Kt(am, t, g);
            const auto sp = lowest_spectrum(op, 2);
            const double scale = 2.0 * a * t;
            const Eigen::VectorXd ground = sp.vectors.col(0) / sp.vectors.col(0).norm();
            const Eigen::VectorXd gauss = gaussian_ground_state(am, t, g);
            const double err = std::min((ground - gauss).norm(), (ground + gauss).norm());
            const double gap = sp.values(1) - sp.values(0);
            const bool ok = std::abs(sp.values(0)) < 1e-3 * scale && std::abs(gap - scale) <= 0.01 * scale && err < 1e-3;
            r.pass = r.pass && ok;
            rows.push_back({{"a", a}, {"t", t}, {"lambda0", sp.values(0)}, {"gap", gap}, {"expected_gap", scale},
                            {"ground_l2_error", err}, {"pass", ok}});
        }
    r.summary = r.pass ? "9/9 (a, t) pairs match the Hermite levels" : "some (a, t) pairs miss the Hermite levels";
    r.data = rows;
    return r;
}

inline Result hodge_betti(std::uint64_t)
{
    Result r;
    r.pass = true;
    json rows = json::array();
    auto check = [&](const std::string& name, const exterior::CellComplex& cx, const exterior::InnerProductFamily& ip,
                     const std::vector<long>& expected) {
        const auto betti = exterior::betti_numbers(cx);
        std::vector<long> ker;
        for (int k = 0; k <= cx.dim; ++k)
            ker.push_back(exterior::kernel_dimension(cx, ip, k, 1e-8));
        const bool ok = betti == expected && ker == expected;
        r.pass = r.pass && ok;
        rows.push_back({{"complex", name}, {"betti", betti}, {"kernel_dimensions", ker}, {"expected", expected}});
    };
    const auto ico = geometry::icosphere(1);
    check("icosahedron", ico.complex, ico.masses, {1, 0, 1});
    const auto torus = geometry::triangulate(geometry::ParamSurface::embedded_torus(), 16);
    check("torus-16x16", torus.complex, torus.masses, {1, 2, 1});
    const auto t5 = exterior::torus_power(5, 3);
    check("T5-cubical", t5, exterior::InnerProductFamily::identity(t5), {1, 5, 10, 10, 5, 1});
    r.summary = r.pass ? "kernel dimensions equal Betti numbers on 3 complexes" : "kernel/Betti mismatch";
    r.data = rows;
    return r;
}

inline Result deformation_invariance(std::uint64_t)
{
    Result r;
    r.pass = true;
    json rows = json::array();
    double worst = 0.0;
    for (const char* name : {"sphere-height", "torus-tilted"})
    {
        const auto sc = detail_acc::scene(name);
        const auto beta = exterior::betti_numbers(sc.mesh.complex);
        for (double t : {0.0, 1.0, 5.0, 10.0})
        {
            const auto dc = deformation::deform(sc.mesh.complex, sc.mesh.masses, sc.f, t);
            std::vector<long> ker;
            for (int k = 0; k <= 2; ++k)
                ker.push_back(deformation::kernel_dimension(dc, k));
            const double dd = dc.dd_residual();
            worst = std::max(worst, dd);
            const bool ok = ker == beta && dd < 1e-12;
            r.pass = r.pass && ok;
            rows.push_back({{"scenario", name}, {"t", t}, {"kernel_dimensions", ker}, {"betti", beta}, {"dd_residual", dd}});
        }
    }
    r.summary = std::string(r.pass ? "dim ker = Betti at t in {0,1,5,10}" : "kernel dimension changed under deformation")
              + ", dd residual " + detail_acc::fmt(worst);
    r.data = rows;
    return r;
}

inline Result morse_count_window(std::uint64_t)
{
    Result r;
    const auto sc = detail_acc::scene("torus-tilted");
    const auto ts = scenario::builtin("torus-tilted").t;
    const auto rows = deformation::sweep(sc.mesh.complex, sc.mesh.masses, sc.f, ts, 1.0);
    const auto w = deformation::count_window(rows, {1, 2, 1});
    r.pass = w.found && w.span() >= 2.0;
    json counts = json::array();
    for (const auto& row : rows)
        counts.push_back({{"t", row.t}, {"counts", row.counts}});
    r.summary = w.found ? "counts (1,2,1) for t in [" + detail_acc::fmt(w.t_min) + ", " + detail_acc::fmt(w.t_max)
                              + "], span " + detail_acc::fmt(w.span())
                        : "no window with counts (1,2,1)";
    r.data = {{"cutoff", 1.0}, {"found", w.found}, {"t_min", w.t_min}, {"t_max", w.t_max}, {"span", w.span()},
              {"rows", counts}};
    return r;
}

inline Result projection_decay(std::uint64_t)
{
    Result r;
    const auto sc = detail_acc::scene("torus-tilted");
    const auto table = deformation::projection_decay(sc.surface, sc.mesh, sc.f, sc.cps, 1.0, {2.0, 4.0, 8.0, 16.0}, 6, {32.0});
    r.pass = !table.monotone.empty();
    json points = json::array();
    for (std::size_t i = 0; i < sc.cps.size(); ++i)
    {
        r.pass = r.pass && table.monotone[i];
        std::vector<double> res;
        for (const auto& row : table.rows)
            res.push_back(row.residuals[i]);
        points.push_back({{"index", sc.cps[i].index}, {"residuals", res}, {"strictly_decreasing", bool(table.monotone[i])},
                          {"decay_order", table.decay_order[i]}, {"floor", table.floor[i]}});
    }
    double floor = 0.0;
    for (double x : table.floor)
        floor = std::max(floor, x);
    r.summary = std::string(r.pass ? "strictly decreasing" : "not decreasing") + " over t in {2,4,8,16} for all "
              + std::to_string(sc.cps.size()) + " points, largest floor " + detail_acc::fmt(floor);
    r.data = {{"t", {2.0, 4.0, 8.0, 16.0}}, {"floor_t", {32.0}}, {"points", points}, {"warnings", table.warnings}};
    return r;
}

inline Result morse_inequalities(std::uint64_t)
{
    Result r;
    r.pass = true;
    json rows = json::array();
    for (const auto& [name, expected] : {std::pair<const char*, std::vector<long>>{"sphere-height", {1, 0, 1}},
                                         {"torus-tilted", {1, 2, 1}}})
    {
        const auto sc = detail_acc::scene(name);
        const auto m = deformation::morse_counts(sc.cps);
        const auto beta = exterior::betti_numbers(sc.mesh.complex);
        const auto v = deformation::morse_report(m, beta);
        const bool ok = m == expected && v.all();
        r.pass = r.pass && ok;
        rows.push_back({{"scenario", name}, {"morse_counts", m}, {"betti", beta}, {"weak", v.weak}, {"strong", v.strong},
                        {"top_equality", v.top_equality}});
    }
    r.summary = r.pass ? "weak, strong and top equality hold on sphere and torus" : "Morse verdict failed";
    r.data = rows;
    return r;
}

inline Result poincare_hopf_sums(std::uint64_t)
{
    Result r;
    r.pass = true;
    json rows = json::array();
    std::string sums;
    for (const auto& [name, expected] : {std::pair<const char*, long>{"sphere-rotation", 2}, {"flat-torus-constant", 0},
                                         {"torus-tilted", 0}})
    {
        const auto sc = scenario::builtin(name);
        const auto s = scenario::make_surface(sc);
        const auto rep = indices::poincare_hopf(s, scenario::make_vector(sc, s), sc.resolution);
        const bool ok = rep.pass && rep.sum == expected;
        r.pass = r.pass && ok;
        auto j = indices::to_json(rep);
        j["scenario"] = name;
        rows.push_back(j);
        sums += (sums.empty() ? "" : ", ") + std::to_string(rep.sum);
    }
    r.summary = "sums " + sums + (r.pass ? " equal chi" : " (mismatch)");
    r.data = rows;
    return r;
}

inline Result thom_smale_homology(std::uint64_t)
{
    Result r;
    r.pass = true;
    json rows = json::array();
    double worst_condition = 0.0;
    for (const auto& [name, expected] : {std::pair<const char*, std::vector<long>>{"sphere-height", {1, 0, 1}},
                                         {"sphere-deformed", {1, 0, 1}}, {"torus-tilted", {1, 2, 1}}})
    {
        const auto sc = detail_acc::scene(name);
        const auto ts = thom_smale::build_complex(sc.surface, sc.field, sc.cps);
        const Eigen::MatrixXi dd = ts.boundary[1] * ts.boundary[2];
        const bool dd_zero = dd.size() == 0 || dd.cwiseAbs().maxCoeff() == 0;
        const auto h = thom_smale::homology_ranks(ts);
        const auto beta = exterior::betti_numbers(sc.mesh.complex);
        const auto dc = deformation::deform(sc.mesh.complex, sc.mesh.masses, sc.f, 8.0);
        const auto ic = deformation::instanton_complex(dc, 1.0);
        const auto pinf = thom_smale::p_infinity_matrix(sc.surface, sc.field, sc.cps, sc.mesh, ic.bases);
        worst_condition = std::max(worst_condition, pinf.condition);
        const bool ok = dd_zero && h == expected && h == beta && pinf.full_rank && pinf.condition < 1e6;
        r.pass = r.pass && ok;
        rows.push_back({{"scenario", name}, {"critical_points", sc.cps.size()}, {"dd_zero", dd_zero},
                        {"homology_ranks", h}, {"betti", beta},
                        {"boundary_1", scenario::detail_sc::matrix_json(ts.boundary[1])},
                        {"boundary_2", scenario::detail_sc::matrix_json(ts.boundary[2])},
                        {"p_infinity_full_rank", pinf.full_rank}, {"p_infinity_condition", pinf.condition},
                        {"p_infinity_coverage", pinf.blocks[2].coverage}});
    }
    r.summary = std::string(r.pass ? "ranks equal Betti on 3 scenarios" : "Thom-Smale check failed")
              + ", worst P_infinity condition " + detail_acc::fmt(worst_condition);
    r.data = rows;
    return r;
}

inline Result semicharacteristic(std::uint64_t seed)
{
    Result r;
    const auto at = indices::atiyah_consistency(1, {0.01, 0.1, 1.0, 10.0, 100.0}, seed);
    json parity = json::array();
    bool parity_ok = true;
    for (int n = 3; n <= 8; ++n)
    {
        const auto p = indices::skew_parity_check(n, 1000, seed + static_cast<std::uint64_t>(1000 * n));
        parity_ok = parity_ok && p.pass();
        parity.push_back(indices::to_json(p));
    }
    const bool t0_ok = std::isfinite(at.random_t0) && at.random_positive_at_2t0;
    r.pass = at.kervaire.k == 0 && parity_ok && at.positive_for_all_t && t0_ok;
    r.summary = "k(T^5) = " + std::to_string(at.kervaire.k) + ", skew parity " + (parity_ok ? "clean" : "violated")
              + ", random t0 = " + detail_acc::fmt(at.random_t0);
    r.data = {{"kervaire", indices::to_json(at.kervaire)}, {"skew_parity", parity},
              {"fiber", {{"t", at.tested_t}, {"min_eigenvalue", at.min_eigenvalues}, {"positive", at.positive_for_all_t},
                         {"random_t0", at.random_t0}, {"min_at_2t0", at.random_min_at_2t0}}}};
    return r;
}

/** ------------------------------------------------------------------- //
 *                                SUITES                                //
 *  ------------------------------------------------------------------- */

inline const std::vector<Criterion>& criteria()
{
    static const std::vector<Criterion> list = {
        {1, "clifford", "Clifford relations", 5.0, clifford_relations},
        {2, "clifford", "kernel of L and its parity", 30.0, kernel_parity_lemma},
        {3, "clifford", "eta relations and reconstruction of L", 0.0, eta_relations},
        {4, "oscillator", "oscillator ground state and gap", 60.0, oscillator_spectrum},
        {5, "exterior_core", "Hodge kernels equal Betti numbers", 120.0, hodge_betti},
        {6, "witten", "kernel invariance under deformation", 0.0, deformation_invariance},
        {7, "witten", "low-eigenvalue counts on a t-window", 0.0, morse_count_window},
        {8, "witten", "projection residual decay", 0.0, projection_decay},
        {9, "witten", "Morse inequalities", 0.0, morse_inequalities},
        {10, "indices", "Poincare-Hopf sums", 0.0, poincare_hopf_sums},
        {11, "thom_smale", "Thom-Smale homology and P_infinity", 120.0, thom_smale_homology},
        {12, "indices", "semicharacteristic, skew parity, fiber positivity", 0.0, semicharacteristic},
    };
    return list;
}

inline const std::vector<std::string>& suite_names()
{
    static const std::vector<std::string> names = {"all", "exterior_core", "clifford", "oscillator", "geometry",
                                                   "witten", "thom_smale", "indices", "cli"};
    return names;
}

/// Criterion ids in a suite; "cli" holds the determinism check only.
inline std::vector<int> suite(const std::string& name)
{
    if (name == "all")
        return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13};
    if (name == "geometry")
        return {9, 10};
    if (name == "cli")
        return {13};
    std::vector<int> ids;
    for (const auto& c : criteria())
        if (c.module == name)
            ids.push_back(c.id);
    if (ids.empty())
        throw InvalidInput("cli", "accept", "unknown suite '" + name + "'");
    return ids;
}

inline Result run_one(const Criterion& c, std::uint64_t seed)
{
    const auto start = std::chrono::steady_clock::now();
    Result r;
    try
    {
        r = c.check(seed);
    }
    catch (const std::exception& e)
    {
        r.pass = false;
        r.summary = std::string("error: ") + e.what();
        r.data = {{"error", e.what()}};
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.id = c.id;
    r.module = c.module;
    r.title = c.title;
    if (c.time_limit > 0.0 && r.seconds > c.time_limit)
    {
        r.pass = false;
        r.summary += " (over the " + detail_acc::fmt(c.time_limit) + " s budget)";
    }
    return r;
}

/// Report without timings: byte-identical for equal seeds.
inline json report(const std::string& suite_name, std::uint64_t seed, const std::vector<Result>& results)
{
    json list = json::array();
    for (const auto& r : results)
        list.push_back({{"id", r.id}, {"module", r.module}, {"title", r.title}, {"pass", r.pass}, {"data", r.data}});
    return {{"schema", scenario::schema_version}, {"suite", suite_name}, {"seed", seed}, {"criteria", list}};
}

/**
 * Run a suite. Criterion 13 reruns criteria 1-12 and compares the reports
 * byte for byte; `on_result` sees each result as it finishes.
 */
inline std::vector<Result> run_suite(const std::string& name, std::uint64_t seed,
                                     const std::function<void(const Result&)>& on_result = {})
{
    const auto ids = suite(name);
    std::vector<Result> results;
    for (int id : ids)
    {
        if (id == 13)
            continue;
        results.push_back(run_one(criteria()[static_cast<std::size_t>(id - 1)], seed));
        if (on_result)
            on_result(results.back());
    }
    if (std::find(ids.begin(), ids.end(), 13) != ids.end())
    {
        const auto start = std::chrono::steady_clock::now();
        Result r;
        r.id = 13;
        r.module = "cli";
        r.title = "determinism of accept reports";
        try
        {
            // the cli suite alone has no prior run to compare with
            std::vector<Result> first = results;
            if (first.empty())
                for (const auto& c : criteria())
                    first.push_back(run_one(c, seed));
            std::vector<Result> second;
            for (const auto& c : first)
                second.push_back(run_one(criteria()[static_cast<std::size_t>(c.id - 1)], seed));
            const std::string a = report("all", seed, first).dump(2), b = report("all", seed, second).dump(2);
            r.pass = a == b;
            r.summary = r.pass ? "two runs with seed " + std::to_string(seed) + " give identical reports ("
                                     + std::to_string(a.size()) + " bytes)"
                               : "reports differ between runs";
            r.data = {{"bytes", a.size()}, {"identical", r.pass}};
        }
        catch (const std::exception& e)
        {
            r.pass = false;
            r.summary = std::string("error: ") + e.what();
            r.data = {{"error", e.what()}};
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        results.push_back(r);
        if (on_result)
            on_result(r);
    }
    return results;
}

/// "criterion <id> [<module>] PASS|FAIL  <summary>  (<seconds> s)"
inline std::string format_line(const Result& r)
{
    std::ostringstream s;
    s << "criterion " << r.id << " [" << r.module << "] " << (r.pass ? "PASS" : "FAIL") << "  " << r.title << ": "
      << r.summary << "  (" << detail_acc::fmt(r.seconds) << " s)";
    return s.str();
}

}   // namespace witten::acceptance
