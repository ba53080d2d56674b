#include "catch_amalgamated.hpp"

#include <random>

#include "witten/geometry.hpp"

using namespace witten;
using namespace witten::geometry;

namespace {

std::vector<int> indices(const std::vector<CriticalPoint>& cps)
{
    std::vector<int> out;
    for (const auto& c : cps)
        out.push_back(c.index);
    return out;
}

}   // namespace

TEST_CASE("chart derivatives agree with finite differences", "[geometry]")
{
    std::mt19937_64 rng(3);
    const double h = 1e-5;
    for (const auto& s : {ParamSurface::sphere(), ParamSurface::embedded_torus()})
        for (int k = 0; k < 100; ++k)
        {
            const ChartPoint p = s.random_point(rng);
            const Tangent t = s.tangent(p);
            const auto sec = s.second(p);
            const auto dg = s.metric_derivative(p);
            for (int a = 0; a < 2; ++a)
            {
                ChartPoint plus = p, minus = p;
                plus.u(a) += h;
                minus.u(a) -= h;
                REQUIRE(((s.position(plus) - s.position(minus)) / (2 * h) - t.col(a)).norm() < 1e-8);
                const Tangent dt = (s.tangent(plus) - s.tangent(minus)) / (2 * h);
                for (int b = 0; b < 2; ++b)
                    REQUIRE((dt.col(b) - sec[b][a]).norm() < 1e-8);
                REQUIRE(((s.metric(plus) - s.metric(minus)) / (2 * h) - dg[a]).norm() < 1e-7);
            }
            // charts are oriented by the outward normal
            const Vector3d n = t.col(0).cross(t.col(1));
            const Vector3d x = s.position(p);
            const Vector3d outward = s.kind() == SurfaceKind::Sphere
                                       ? x
                                       : Vector3d(x - s.big_radius() * Vector3d(0, x(1), x(2)).normalized());
            REQUIRE(n.dot(outward) > 0);
            REQUIRE(s.distance(s.locate(x), p) < 1e-12);
        }
}

TEST_CASE("sphere charts overlap consistently", "[geometry]")
{
    const auto s = ParamSurface::sphere();
    std::mt19937_64 rng(9);
    for (int k = 0; k < 100; ++k)
    {
        ChartPoint p = s.random_point(rng);
        ChartPoint q = s.in_chart(p, 1 - p.chart);
        REQUIRE((s.position(p) - s.position(q)).norm() < 1e-12);
    }
}

TEST_CASE("height function on the sphere has two poles", "[geometry]")
{
    const auto s = ParamSurface::sphere();
    auto cps = find_critical_points(s, tilted_height(0.0));
    REQUIRE(cps.size() == 2);
    REQUIRE(indices(cps) == std::vector<int>{0, 2});
    REQUIRE((cps[0].position - Vector3d(0, 0, -1)).norm() < 1e-10);
    REQUIRE((cps[1].position - Vector3d(0, 0, 1)).norm() < 1e-10);
    for (const auto& c : cps)
        REQUIRE(c.gradient_norm < 1e-10);
}

TEST_CASE("tilted torus height has four critical points", "[geometry]")
{
    const auto s = ParamSurface::embedded_torus();
    auto cps = find_critical_points(s, tilted_height(0.1));
    REQUIRE(indices(cps) == std::vector<int>{0, 1, 1, 2});
    // analytic locations: theta = +-pi/2 and tan(phi) = 0.1 / sin(theta)
    const double phi = std::atan(0.1);
    REQUIRE(std::abs(cps[0].where.u(0) + pi / 2) < 1e-10);
    REQUIRE(std::abs(cps[0].where.u(1) + phi) < 1e-10);
    REQUIRE(std::abs(cps[3].where.u(0) - pi / 2) < 1e-10);
    REQUIRE(std::abs(cps[3].where.u(1) - phi) < 1e-10);
    // f at the maximum is R + r cos(phi) + 0.1 r sin(phi)
    REQUIRE(cps[3].value == Catch::Approx(2.0 + std::sqrt(1.01)).epsilon(1e-12));
    for (const auto& c : cps)
        REQUIRE(c.margin > 1e-3);
}

TEST_CASE("deformed sphere field has four critical points", "[geometry]")
{
    auto cps = find_critical_points(ParamSurface::sphere(), deformed_sphere_field());
    REQUIRE(indices(cps) == std::vector<int>{0, 1, 2, 2});
    REQUIRE((cps[0].position - Vector3d(0, 0, -1)).norm() < 1e-10);
    REQUIRE((cps[1].position - Vector3d(0, 0, 1)).norm() < 1e-10);
    // maxima at x^2 = 1 - z^2 with 2z = 0.5 / ... : z = 0.25
    REQUIRE(cps[2].position(2) == Catch::Approx(0.25).epsilon(1e-10));
}

TEST_CASE("degenerate functions are rejected", "[geometry]")
{
    REQUIRE_THROWS_AS(find_critical_points(ParamSurface::sphere(), degenerate_sphere_field()), DegenerateError);
}

TEST_CASE("wrong closed-form derivatives are caught", "[geometry]")
{
    auto bad = tilted_height(0.1);
    bad.ambient_gradient = [](const Vector3d&) { return Vector3d(0.0, 0.0, 1.0); };
    REQUIRE_THROWS_AS(validate_scalar_field(ParamSurface::embedded_torus(), bad), InvalidInput);
    auto badv = sphere_rotation_field();
    badv.jacobian = [](const ChartPoint&) { return Matrix2d::Identity(); };
    REQUIRE_THROWS_AS(validate_vector_field(ParamSurface::sphere(), badv), InvalidInput);
}

TEST_CASE("vector field zeros and signs", "[geometry]")
{
    SECTION("rotation on the sphere")
    {
        auto zs = find_vector_field_zeros(ParamSurface::sphere(), sphere_rotation_field());
        REQUIRE(zs.size() == 2);
        for (const auto& z : zs)
        {
            REQUIRE(z.sign == 1);
            REQUIRE(std::abs(std::abs(z.position(2)) - 1.0) < 1e-12);
            // a rotation generator in an orthonormal frame
            REQUIRE((z.A + z.A.transpose()).norm() < 1e-12);
        }
    }
    SECTION("constant field on the flat torus")
    {
        REQUIRE(find_vector_field_zeros(ParamSurface::flat_torus(), constant_field(Vector2d(1.0, 0.3))).empty());
    }
    SECTION("gradient of the tilted torus height")
    {
        const auto s = ParamSurface::embedded_torus();
        const auto f = tilted_height(0.1);
        auto zs = find_vector_field_zeros(s, gradient_field(s, f));
        auto cps = find_critical_points(s, f);
        REQUIRE(zs.size() == 4);
        int sum = 0;
        for (const auto& z : zs)
        {
            sum += z.sign;
            // matching critical point: sign = (-1)^index, A is the Hessian in the frame
            const CriticalPoint* match = nullptr;
            for (const auto& c : cps)
                if ((c.position - z.position).norm() < 1e-8)
                    match = &c;
            REQUIRE(match != nullptr);
            REQUIRE(z.sign == (match->index % 2 == 0 ? 1 : -1));
            REQUIRE((z.A - z.A.transpose()).norm() < 1e-10);
            Eigen::SelfAdjointEigenSolver<Matrix2d> es(z.A);
            REQUIRE((es.eigenvalues() - match->hessian_eigenvalues).norm() < 1e-10);
        }
        REQUIRE(sum == 0);
    }
}

TEST_CASE("gradient field Jacobian is exact", "[geometry]")
{
    for (const auto& s : {ParamSurface::sphere(), ParamSurface::embedded_torus()})
        REQUIRE_NOTHROW(validate_vector_field(s, gradient_field(s, deformed_sphere_field())));
}

TEST_CASE("triangulations have the right topology", "[geometry]")
{
    auto ico = icosphere(1);
    REQUIRE(ico.complex.cells == std::vector<long>{12, 30, 20});
    REQUIRE(exterior::betti_numbers(ico.complex) == std::vector<long>{1, 0, 1});

    const auto sphere = ParamSurface::sphere();
    auto s8 = triangulate(sphere, 8);
    auto s16 = triangulate(sphere, 16);
    REQUIRE(exterior::betti_numbers(s8.complex) == std::vector<long>{1, 0, 1});
    REQUIRE(exterior::betti_numbers(s16.complex) == std::vector<long>{1, 0, 1});
    REQUIRE(s8.complex.cells[0] == 10 * 64 + 2);
    REQUIRE(s16.masses.diagonal[0].sum() == Catch::Approx(4 * pi).epsilon(5e-3));

    const auto torus = ParamSurface::embedded_torus();
    auto t16 = triangulate(torus, 16);
    auto t32 = triangulate(torus, 32);
    REQUIRE(exterior::betti_numbers(t16.complex) == std::vector<long>{1, 2, 1});
    REQUIRE(exterior::betti_numbers(t32.complex) == std::vector<long>{1, 2, 1});
    REQUIRE(exterior::euler_characteristic(t16.complex) == 0);
    REQUIRE(t32.masses.diagonal[0].sum() == Catch::Approx(8 * pi * pi).epsilon(1e-2));

    auto flat = triangulate(ParamSurface::flat_torus(), 16);
    REQUIRE(flat.masses.diagonal[0].sum() == Catch::Approx(4 * pi * pi).epsilon(1e-12));
    // right isosceles triangles: diagonal edges carry zero cotan weight, the lumped mass stays positive
    REQUIRE(flat.masses.diagonal[1].minCoeff() > 0.0);

    REQUIRE_THROWS_AS(triangulate(torus, 7), InvalidInput);
}

TEST_CASE("lumped edge masses match cotangent weights on equilateral triangles", "[geometry]")
{
    // a single equilateral triangle's contribution: (2/3) A / l^2 = 1/(2 sqrt 3) = cot(60)/2
    const double l = 1.0, area = std::sqrt(3.0) / 4.0;
    REQUIRE((2.0 / 3.0) * area / (l * l) == Catch::Approx(0.5 / std::tan(pi / 3)).epsilon(1e-14));
}

TEST_CASE("sampled fields", "[geometry]")
{
    const auto sphere = ParamSurface::sphere();
    auto m = triangulate(sphere, 8);
    auto z = sample_scalar(sphere, tilted_height(0.0), m);
    Eigen::Index top;
    z.maxCoeff(&top);
    REQUIRE((m.positions[static_cast<std::size_t>(top)] - Vector3d(0, 0, 1)).norm() < 1e-12);
    auto c = sample_scalar(sphere, quadratic_field(0.0, 0.0, 0.0, "zero"), m);
    REQUIRE(c.cwiseAbs().maxCoeff() == 0.0);

    const auto torus = ParamSurface::embedded_torus();
    const auto f = tilted_height(0.1);
    auto tm = triangulate(torus, 32);
    auto v = sample_scalar(torus, f, tm);
    auto cps = find_critical_points(torus, f);
    Eigen::Index lo, hi;
    v.minCoeff(&lo);
    v.maxCoeff(&hi);
    const double cell = 2.0 * pi / 32 * 3.0;   // longest edge of the grid (outer equator, R + r)
    REQUIRE((tm.positions[static_cast<std::size_t>(lo)] - cps.front().position).norm() < cell);
    REQUIRE((tm.positions[static_cast<std::size_t>(hi)] - cps.back().position).norm() < cell);
}
