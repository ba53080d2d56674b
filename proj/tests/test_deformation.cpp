#include "catch_amalgamated.hpp"

#include <sstream>

#include "witten/deformation.hpp"

using namespace witten;
using namespace witten::deformation;

namespace {

struct Scene
{
    geometry::ParamSurface surface;
    geometry::ScalarField field;
    geometry::Mesh mesh;
    Eigen::VectorXd f;
    std::vector<geometry::CriticalPoint> cps;
};

Scene torus_scene(int n)
{
    Scene s{geometry::ParamSurface::embedded_torus(), geometry::tilted_height(0.1), {}, {}, {}};
    s.mesh = geometry::triangulate(s.surface, n);
    s.f = geometry::sample_scalar(s.surface, s.field, s.mesh);
    s.cps = geometry::find_critical_points(s.surface, s.field);
    return s;
}

Scene sphere_scene(int n)
{
    Scene s{geometry::ParamSurface::sphere(), geometry::tilted_height(0.0), {}, {}, {}};
    s.mesh = geometry::triangulate(s.surface, n);
    s.f = geometry::sample_scalar(s.surface, s.field, s.mesh);
    s.cps = geometry::find_critical_points(s.surface, s.field);
    return s;
}

}   // namespace

TEST_CASE("t = 0 leaves the complex untouched", "[witten]")
{
    const auto sc = sphere_scene(8);
    const auto dc = deform(sc.mesh.complex, sc.mesh.masses, sc.f, 0.0);
    for (int k = 0; k < 2; ++k)
        REQUIRE((Eigen::MatrixXd(dc.d[static_cast<std::size_t>(k)])
                 - Eigen::MatrixXd(exterior::coboundary(sc.mesh.complex, k).matrix))
                    .norm()
                == 0.0);
    for (int k = 0; k <= 2; ++k)
    {
        const Eigen::MatrixXd ref(exterior::hodge_laplacian(sc.mesh.complex, sc.mesh.masses, k).matrix);
        REQUIRE((Eigen::MatrixXd(dc.laplacian(k)) - ref).norm() < 1e-12 * ref.norm());
    }
}

TEST_CASE("kernel dimension is invariant under the deformation", "[witten]")
{
    for (const auto& sc : {sphere_scene(8), torus_scene(16)})
    {
        const auto beta = exterior::betti_numbers(sc.mesh.complex);
        for (double t : {0.0, 1.0, 5.0, 10.0})
        {
            const auto dc = deform(sc.mesh.complex, sc.mesh.masses, sc.f, t);
            REQUIRE(dc.dd_residual() < 1e-12);
            for (int k = 0; k <= 2; ++k)
                REQUIRE(kernel_dimension(dc, k) == beta[static_cast<std::size_t>(k)]);
        }
    }
}

TEST_CASE("deformed Laplacian is self-adjoint for the masses", "[witten]")
{
    const auto sc = torus_scene(8);
    const auto dc = deform(sc.mesh.complex, sc.mesh.masses, sc.f, 3.0);
    for (int k = 0; k <= 2; ++k)
    {
        const Eigen::MatrixXd ml = sc.mesh.masses.matrix(k) * Eigen::MatrixXd(dc.laplacian(k));
        REQUIRE((ml - ml.transpose()).norm() < 1e-10 * ml.norm());
        REQUIRE(lowest_eigenvalues(dc, k, 1)(0) > -1e-10);
    }
}

TEST_CASE("the deformation opens the degree-0 gap", "[witten]")
{
    const auto sc = torus_scene(16);
    const auto gap = [&](double t) {
        return lowest_eigenvalues(deform(sc.mesh.complex, sc.mesh.masses, sc.f, t), 0, 2)(1);
    };
    REQUIRE(gap(10.0) > gap(0.0));
}

TEST_CASE("low eigenvalue counts match the Morse counts on a t-window", "[witten]")
{
    const auto sc = torus_scene(32);
    std::vector<double> ts;
    for (double t = 0.25; t <= 32.0 * 1.0001; t *= std::sqrt(2.0))
        ts.push_back(t);
    const auto rows = sweep(sc.mesh.complex, sc.mesh.masses, sc.f, ts, 1.0);
    const auto beta = exterior::betti_numbers(sc.mesh.complex);
    for (const auto& row : rows)
    {
        long chi_low = 0;
        for (int k = 0; k <= 2; ++k)
        {
            REQUIRE(row.counts[static_cast<std::size_t>(k)] >= beta[static_cast<std::size_t>(k)]);
            chi_low += (k % 2 == 0 ? 1 : -1) * row.counts[static_cast<std::size_t>(k)];
        }
        REQUIRE(chi_low == 0);
    }
    const auto w = count_window(rows, {1, 2, 1});
    REQUIRE(w.found);
    REQUIRE(w.span() >= 2.0);
    REQUIRE(morse_counts(sc.cps) == std::vector<long>{1, 2, 1});
}

TEST_CASE("count window selection", "[witten]")
{
    std::vector<SweepRow> rows;
    const std::vector<std::vector<long>> counts{{1, 3, 1}, {1, 2, 1}, {1, 2, 1}, {1, 3, 2}, {1, 2, 1}};
    for (std::size_t i = 0; i < counts.size(); ++i)
        rows.push_back({static_cast<double>(1 << i), counts[i], {}, {}});
    const auto w = count_window(rows, {1, 2, 1});
    REQUIRE(w.found);
    REQUIRE(w.t_min == 2.0);
    REQUIRE(w.t_max == 4.0);
    REQUIRE_FALSE(count_window(rows, {0, 0, 0}).found);
}

TEST_CASE("reference states are normalised and disjoint", "[witten]")
{
    const auto sc = sphere_scene(8);
    const auto dc = deform(sc.mesh.complex, sc.mesh.masses, sc.f, 4.0);
    const auto states = localized_states(dc, sc.surface, sc.mesh, sc.cps, 3);
    REQUIRE(states.size() == 2);
    REQUIRE(states[0].degree == 0);
    REQUIRE(states[1].degree == 2);
    for (const auto& st : states)
    {
        REQUIRE(sc.mesh.masses.norm(st.degree, st.coeffs) == Catch::Approx(1.0).epsilon(1e-12));
        const auto hops = sc.mesh.hop_distances(st.centre_vertex);
        const auto verts = cell_vertices(sc.mesh.complex)[static_cast<std::size_t>(st.degree)];
        for (int c : st.support)
            for (int v : verts[static_cast<std::size_t>(c)])
                REQUIRE(hops[static_cast<std::size_t>(v)] <= 3);
    }
    REQUIRE_THROWS_AS(localized_state(dc, sc.surface, sc.mesh, sc.cps[0], 1), InvalidInput);
}

TEST_CASE("overlapping supports shrink the radius with a warning", "[witten]")
{
    const auto sc = torus_scene(16);
    const auto dc = deform(sc.mesh.complex, sc.mesh.masses, sc.f, 2.0);
    std::vector<std::string> warnings;
    const auto states = localized_states(dc, sc.surface, sc.mesh, sc.cps, 12, &warnings);
    REQUIRE_FALSE(warnings.empty());
    for (std::size_t i = 0; i < states.size(); ++i)
        for (std::size_t j = i + 1; j < states.size(); ++j)
            if (states[i].degree == states[j].degree)
                REQUIRE(sc.mesh.masses.inner(states[i].degree, states[i].coeffs, states[j].coeffs) == 0.0);
}

TEST_CASE("projection residual decays in t", "[witten]")
{
    const auto sc = torus_scene(32);
    const auto table = projection_decay(sc.surface, sc.mesh, sc.f, sc.cps, 1.0, {2.0, 4.0, 8.0, 16.0}, 6, {32.0});
    REQUIRE(table.rows.size() == 4);
    for (std::size_t i = 0; i < sc.cps.size(); ++i)
    {
        REQUIRE(table.monotone[i]);
        REQUIRE(table.decay_order[i] > 0.0);
        REQUIRE(std::isfinite(table.floor[i]));
    }
    // the extrema converge far below the level where the saddles flatten out
    REQUIRE(table.rows.back().residuals.front() < 1e-3);
    REQUIRE(table.rows.back().residuals.back() < 1e-2);
}

TEST_CASE("projection onto the whole spectrum is the identity", "[witten]")
{
    const auto sc = sphere_scene(8);
    const auto dc = deform(sc.mesh.complex, sc.mesh.masses, sc.f, 2.0);
    for (const auto& p : sc.cps)
    {
        const auto st = localized_state(dc, sc.surface, sc.mesh, p, 2);
        const auto all = low_spectrum(dc, st.degree, 1e6 * detail::norm_bound(dc.symmetric_laplacian(st.degree)));
        REQUIRE(all.count() == sc.mesh.complex.count(st.degree));
        REQUIRE(projection_residual(sc.mesh.masses, all, st) < 1e-12);
    }
}

TEST_CASE("low eigenvectors concentrate near critical points", "[witten]")
{
    const auto sc = torus_scene(32);
    std::vector<int> centres;
    for (const auto& p : sc.cps)
        centres.push_back(sc.mesh.nearest_vertex(p.position));
    for (int k = 0; k <= 2; ++k)
    {
        double previous = -1.0;
        for (double t : {2.0, 4.0, 8.0, 16.0})
        {
            const auto dc = deform(sc.mesh.complex, sc.mesh.masses, sc.f, t);
            const double mass = localization_mass(sc.mesh, sc.mesh.masses, low_spectrum(dc, k, 1.0), centres, 4);
            REQUIRE(mass >= previous - 1e-12);
            previous = mass;
        }
        REQUIRE(previous > 0.5);
    }
}

TEST_CASE("block norms of D_t on the span of the reference states", "[witten]")
{
    const auto sc = torus_scene(32);
    std::vector<double> d2;
    for (double t : {4.0, 8.0, 16.0})
    {
        const auto dc = deform(sc.mesh.complex, sc.mesh.masses, sc.f, t);
        const auto b = block_norms(dc, localized_states(dc, sc.surface, sc.mesh, sc.cps, 6));
        REQUIRE(std::isfinite(b.d1));
        REQUIRE(b.d2 >= 0.0);
        d2.push_back(b.d2 / std::sqrt(t));
    }
    // off-diagonal block grows slower than the sqrt(t) scale of D_t away from the critical points
    REQUIRE(d2.back() < d2.front());
}

TEST_CASE("instanton complex", "[witten]")
{
    SECTION("tilted torus")
    {
        const auto sc = torus_scene(32);
        const auto ic = instanton_complex(deform(sc.mesh.complex, sc.mesh.masses, sc.f, 8.0), 1.0);
        REQUIRE(ic.dims == std::vector<long>{1, 2, 1});
        REQUIRE(ic.betti == std::vector<long>{1, 2, 1});
        REQUIRE(ic.euler_characteristic() == 0);
        for (std::size_t k = 0; k < ic.differential.size(); ++k)
        {
            REQUIRE(ic.differential[k].norm() < 1e-8);
            REQUIRE(ic.leakage[k] < 1e-8);
        }
    }
    SECTION("sphere height")
    {
        const auto sc = sphere_scene(8);
        const auto ic = instanton_complex(deform(sc.mesh.complex, sc.mesh.masses, sc.f, 8.0), 1.0);
        REQUIRE(ic.dims == std::vector<long>{1, 0, 1});
        REQUIRE(ic.betti == std::vector<long>{1, 0, 1});
        REQUIRE(ic.euler_characteristic() == 2);
        for (const auto& d : ic.differential)
            REQUIRE(d.size() == 0);
    }
    SECTION("cutoff inside the spectrum is rejected")
    {
        const auto sc = torus_scene(16);
        const auto dc = deform(sc.mesh.complex, sc.mesh.masses, sc.f, 0.0);
        const double lambda1 = lowest_eigenvalues(dc, 0, 2)(1);
        REQUIRE_THROWS_AS(instanton_complex(dc, lambda1), NumericalError);
    }
}

TEST_CASE("Morse inequality verdicts", "[witten]")
{
    REQUIRE(morse_report({1, 2, 1}, {1, 2, 1}).all());
    REQUIRE(morse_report({1, 0, 1}, {1, 0, 1}).all());
    const auto bad = morse_report({2, 3, 1}, {1, 0, 1});
    REQUIRE(bad.weak);
    REQUIRE(bad.strong);
    REQUIRE_FALSE(bad.top_equality);
    REQUIRE_FALSE(bad.violations.empty());
    const auto weak = morse_report({0, 2, 1}, {1, 2, 1});
    REQUIRE_FALSE(weak.weak);
    REQUIRE_THROWS_AS(morse_report({1, 2}, {1, 2, 1}), InvalidInput);
}

TEST_CASE("automatic cutoff sits in the largest relative jump", "[witten]")
{
    // zeros against the first positive eigenvalue is the widest jump
    REQUIRE(auto_cutoff({0.0, 1e-14, 0.2, 0.25, 9.0}) == Catch::Approx(0.5 * (1e-14 + 0.2)).epsilon(1e-12));
    REQUIRE(auto_cutoff({0.01, 0.012, 3.0, 3.5}) == Catch::Approx(0.5 * (0.012 + 3.0)).epsilon(1e-12));
    REQUIRE_THROWS_AS(auto_cutoff({1.0}), InvalidInput);
}

TEST_CASE("large t f is refused", "[witten]")
{
    const auto sc = torus_scene(8);
    REQUIRE_THROWS_AS(deform(sc.mesh.complex, sc.mesh.masses, sc.f, 200.0), OverflowError);
    // the mean is removed before the check: a constant offset changes nothing
    const Eigen::VectorXd shifted = sc.f.array() + 1e4;
    REQUIRE_NOTHROW(deform(sc.mesh.complex, sc.mesh.masses, shifted, 10.0));
}

TEST_CASE("spectrum CSV rows", "[witten]")
{
    std::ostringstream out;
    write_spectrum_csv(out, "torus", 1, 2.5, Eigen::Vector2d(0.0, 1.5));
    REQUIRE(out.str() == "torus,1,2.5,0,0\ntorus,1,2.5,1,1.5\n");
}
