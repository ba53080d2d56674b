#include "catch_amalgamated.hpp"

#include "witten/indices.hpp"

using namespace witten;
using namespace witten::indices;
using geometry::ParamSurface;

TEST_CASE("Poincare-Hopf on the built-in fields", "[indices]")
{
    SECTION("sphere rotation: two centres")
    {
        const auto r = poincare_hopf(ParamSurface::sphere(), geometry::sphere_rotation_field(), 8);
        REQUIRE(r.signs == std::vector<int>{1, 1});
        REQUIRE(r.sum == 2);
        REQUIRE(r.chi_cells == 2);
        REQUIRE(r.chi_betti == 2);
        REQUIRE(r.pass);
    }
    SECTION("flat torus constant field: no zeros")
    {
        const auto r = poincare_hopf(ParamSurface::flat_torus(), geometry::constant_field({1.0, 0.3}));
        REQUIRE(r.zeros.empty());
        REQUIRE(r.sum == 0);
        REQUIRE(r.chi_betti == 0);
        REQUIRE(r.pass);
    }
    SECTION("gradient of the tilted torus height")
    {
        const auto s = ParamSurface::embedded_torus();
        const auto r = poincare_hopf(s, geometry::gradient_field(s, geometry::tilted_height(0.1)));
        REQUIRE(r.signs.size() == 4);
        REQUIRE(std::count(r.signs.begin(), r.signs.end(), -1) == 2);
        REQUIRE(r.sum == 0);
        REQUIRE(r.pass);
    }
    SECTION("mesh refinement leaves the chi side alone")
    {
        const auto s = ParamSurface::sphere();
        for (int res : {8, 12, 16})
            REQUIRE(poincare_hopf(s, geometry::sphere_rotation_field(), res).pass);
    }
}

TEST_CASE("gradient signs follow the Hessian signature", "[indices]")
{
    const auto s = ParamSurface::embedded_torus();
    const auto f = geometry::tilted_height(0.1);
    const auto cps = geometry::find_critical_points(s, f);
    const auto r = poincare_hopf(s, geometry::gradient_field(s, f));
    for (const auto& z : r.zeros)
    {
        const auto it = std::find_if(cps.begin(), cps.end(),
                                     [&](const auto& c) { return (c.position - z.position).norm() < 1e-8; });
        REQUIRE(it != cps.end());
        REQUIRE(z.sign == (it->index == 1 ? -1 : 1));
    }
}

TEST_CASE("finite index is rank-nullity", "[indices]")
{
    REQUIRE(finite_index(Eigen::MatrixXd::Identity(4, 4)) == 0);
    REQUIRE(finite_index(Eigen::MatrixXd::Zero(1, 3)) == 2);
    const auto p = index_parts(Eigen::MatrixXd::Zero(1, 3));
    REQUIRE(p.kernel == 3);
    REQUIRE(p.cokernel == 1);
    REQUIRE(finite_index(Eigen::MatrixXd(0, 2)) == 2);

    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> dim(1, 9);
    for (int trial = 0; trial < 50; ++trial)
    {
        const int rows = dim(rng), cols = dim(rng);
        Eigen::MatrixXd t = Eigen::MatrixXd::Random(rows, cols);
        if (trial % 3 == 0)
            t.col(0).setZero();
        REQUIRE(finite_index(t) == cols - rows);
    }
}

TEST_CASE("Dirac block of the icosahedron has index chi", "[indices]")
{
    const auto m = geometry::icosphere(1);
    REQUIRE(m.complex.count(0) == 12);
    REQUIRE(m.complex.count(1) == 30);
    REQUIRE(m.complex.count(2) == 20);
    const Eigen::MatrixXd d = dirac_even_to_odd(m.complex, m.masses);
    REQUIRE(d.rows() == 30);
    REQUIRE(d.cols() == 32);
    const auto p = index_parts(d);
    REQUIRE(p.index() == 2);
    // kernel = even harmonic forms, cokernel = odd ones
    REQUIRE(p.kernel == 2);
    REQUIRE(p.cokernel == 0);

    // same index with unit masses and on a torus
    REQUIRE(finite_index(dirac_even_to_odd(m.complex, exterior::InnerProductFamily::identity(m.complex))) == 2);
    const auto tm = geometry::triangulate(ParamSurface::embedded_torus(), 8);
    const auto tp = index_parts(dirac_even_to_odd(tm.complex, tm.masses));
    REQUIRE(tp.index() == 0);
    REQUIRE(tp.kernel == 2);
    REQUIRE(tp.cokernel == 2);
}

TEST_CASE("index is constant along linear paths", "[indices]")
{
    const auto m = geometry::icosphere(1);
    const Eigen::MatrixXd d = dirac_even_to_odd(m.complex, m.masses);
    const auto r = index_homotopy_check(d, Eigen::MatrixXd::Zero(d.rows(), d.cols()), 10);
    REQUIRE(r.constant);
    REQUIRE(r.index.front() == 2);

    // toward the block-diagonal part: only the degree 0 -> 1 block kept
    Eigen::MatrixXd diag_part = Eigen::MatrixXd::Zero(d.rows(), d.cols());
    diag_part.topLeftCorner(30, 12) = d.topLeftCorner(30, 12);
    const auto r2 = index_homotopy_check(d, diag_part, 20);
    REQUIRE(r2.constant);
    REQUIRE(r2.index.size() == 21);
    REQUIRE(r2.index.back() == 2);

    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    Eigen::MatrixXd a(5, 7), b(5, 7);
    for (Eigen::Index i = 0; i < a.size(); ++i)
        a.data()[i] = g(rng), b.data()[i] = g(rng);
    const auto r3 = index_homotopy_check(a, b, 10);
    REQUIRE(r3.constant);
    REQUIRE(r3.index.front() == 2);

    REQUIRE_THROWS_AS(index_homotopy_check(a, Eigen::MatrixXd::Zero(7, 5)), InvalidInput);
}

TEST_CASE("Kervaire semicharacteristic", "[indices]")
{
    const auto t5 = exterior::betti_numbers(exterior::torus_power(5, 3));
    REQUIRE(t5 == std::vector<long>{1, 5, 10, 10, 5, 1});
    const auto k = kervaire(t5);
    REQUIRE(k.q == 1);
    REQUIRE(k.even_sum == 16);
    REQUIRE(k.k == 0);
    REQUIRE(kervaire({1, 0, 0, 0, 0, 1}).k == 1);
    REQUIRE(kervaire({1, 1}).k == 1);   // circle
    REQUIRE_THROWS_AS(kervaire({1, 0, 1}), InvalidInput);
    REQUIRE_THROWS_AS(kervaire({1, 0, 0, 1}), InvalidInput);
    REQUIRE_THROWS_AS(kervaire({0, 0, 0, 0, 0, 0}), InvalidInput);
}

TEST_CASE("skew matrices keep kernel parity", "[indices]")
{
    for (int n = 3; n <= 8; ++n)
    {
        const auto r = skew_parity_check(n, 1000, 42);
        INFO("N = " << n);
        REQUIRE(r.violations == 0);
        REQUIRE(r.path_violations == 0);
        REQUIRE(r.path_samples == 250 * 9);
        for (const auto& [ker, count] : r.kernel_histogram)
            REQUIRE(ker % 2 == n % 2);
        // both generic and low-rank draws occur
        REQUIRE(r.kernel_histogram.size() >= 2);
    }
    REQUIRE(skew_parity_check(5, 20, 1).kernel_histogram.begin()->first >= 1);
    REQUIRE(skew_parity_check(4, 20, 1).kernel_histogram.count(0) == 1);
    REQUIRE(skew_parity_check(1, 5, 1).kernel_histogram.at(1) == 5);
    REQUIRE_THROWS_AS(skew_parity_check(0, 5, 1), InvalidInput);

    const auto a = skew_parity_check(6, 100, 9), b = skew_parity_check(6, 100, 9);
    REQUIRE(to_json(a).dump() == to_json(b).dump());
}

TEST_CASE("T^5 fiber positivity", "[indices]")
{
    const auto r = atiyah_consistency(1);
    REQUIRE(r.n == 5);
    REQUIRE(r.kervaire.k == 0);
    REQUIRE(r.positive_for_all_t);
    // with gradX = 0 the operator is t^2 Id
    for (std::size_t i = 0; i < r.tested_t.size(); ++i)
        REQUIRE(r.min_eigenvalues[i] == Catch::Approx(r.tested_t[i] * r.tested_t[i]).epsilon(1e-12));
    REQUIRE(r.random_t0 > 0.0);
    REQUIRE(std::isfinite(r.random_t0));
    REQUIRE(r.random_positive_at_2t0);
    REQUIRE(r.random_min_at_2t0 > 0.0);
    REQUIRE_THROWS_AS(atiyah_consistency(2), InvalidInput);

    Eigen::VectorXd v = Eigen::VectorXd::Zero(5), x = Eigen::VectorXd::Zero(5);
    v(0) = 1.0;
    x(0) = 0.6;
    x(1) = 0.8;
    REQUIRE_THROWS_AS(clifford::signature_fiber_checks(5, v, x, Eigen::MatrixXd::Zero(5, 5), 1.0), InvalidInput);
}
