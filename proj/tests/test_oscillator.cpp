#include "catch_amalgamated.hpp"

#include <sstream>

#include "witten/oscillator.hpp"

using namespace witten;
using namespace witten::oscillator;

namespace {

Eigen::MatrixXd scalar(double a)
{
    return Eigen::MatrixXd::Constant(1, 1, a);
}

}   // namespace

TEST_CASE("1-d oscillator matches the Hermite spectrum", "[oscillator]")
{
    GridSpec g{1, 8.0, 801};
    auto kt = build_Kt(scalar(1.0), 1.0, g);
    auto sp = lowest_spectrum(kt, 5);
    REQUIRE(std::abs(sp.values(0)) < 1e-3);
    for (int k = 1; k < 5; ++k)
        REQUIRE(sp.values(k) == Catch::Approx(2.0 * k).epsilon(1e-3));

    // Gaussian is (nearly) annihilated
    Eigen::VectorXd v = gaussian_ground_state(scalar(1.0), 1.0, g);
    REQUIRE((kt.matrix * v).norm() < 1e-3 * v.norm());
}

TEST_CASE("non-unit coefficient uses the square-root ground state", "[oscillator]")
{
    const double a = 2.0, t = 1.5;
    GridSpec g{1, recommended_half_width(t, a), 801};
    auto kt = build_Kt(scalar(a), t, g);
    Eigen::VectorXd v = gaussian_ground_state(scalar(a), t, g);
    REQUIRE((kt.matrix * v).norm() < 1e-3 * v.norm());
    auto sp = lowest_spectrum(kt, 3);
    REQUIRE(sp.values(1) == Catch::Approx(2.0 * t * a).epsilon(2e-3));
}

TEST_CASE("ground energy decreases towards zero as the grid is refined", "[oscillator]")
{
    double previous = 1e300;
    for (int n : {201, 401, 801})
    {
        auto sp = lowest_spectrum(build_Kt(scalar(1.0), 1.0, GridSpec{1, 8.0, n}), 1);
        REQUIRE(std::abs(sp.values(0)) < previous);
        previous = std::abs(sp.values(0));
    }
}

TEST_CASE("spectral gap scales linearly in t", "[oscillator]")
{
    std::vector<double> ratio;
    for (double t : {1.0, 2.0, 4.0, 8.0})
    {
        GridSpec g{1, recommended_half_width(t), 801};
        auto sp = lowest_spectrum(build_Kt(scalar(1.0), t, g), 2);
        ratio.push_back(sp.values(1) / t);
    }
    for (std::size_t i = 1; i < ratio.size(); ++i)
        REQUIRE(std::abs(ratio[i] - ratio[0]) <= 0.02 * ratio[0]);
}

TEST_CASE("2-d oscillator spectrum follows 2t(|a| k1 + |b| k2)", "[oscillator]")
{
    Eigen::MatrixXd a = Eigen::Vector2d(1.0, 2.0).asDiagonal();
    const double t = 1.0;
    GridSpec g{2, recommended_half_width(t), 121};
    auto sp = lowest_spectrum(build_Kt(a, t, g), 4);
    // levels 0, 2, 4 (twice: k1=2 and k2=1)
    REQUIRE(std::abs(sp.values(0)) < 2e-2);
    REQUIRE(sp.values(1) == Catch::Approx(2.0).epsilon(2e-2));
    REQUIRE(sp.values(2) == Catch::Approx(4.0).epsilon(2e-2));
    REQUIRE(sp.values(3) == Catch::Approx(4.0).epsilon(2e-2));
}

TEST_CASE("model Laplacian has a one-dimensional factorised kernel", "[oscillator]")
{
    SECTION("n = 1")
    {
        GridSpec g{1, 8.0, 801};
        auto op = build_model_laplacian(scalar(1.0), 1.0, g);
        auto sp = lowest_spectrum(op, 3);
        REQUIRE(std::abs(sp.values(0)) < 1e-3);
        REQUIRE(sp.values(1) >= 10.0 * std::max(std::abs(sp.values(0)), 1e-6));
        REQUIRE(factorisation_error(op, sp.vectors.col(0)) < 1e-3);
        REQUIRE(fiber_even_weight(op, sp.vectors.col(0)) > 1.0 - 1e-8);
    }
    SECTION("n = 2, orientation reversing")
    {
        Eigen::MatrixXd a = Eigen::Vector2d(1.0, -1.0).asDiagonal();
        GridSpec g{2, 8.0, 101};
        auto op = build_model_laplacian(a, 1.0, g);
        auto sp = lowest_spectrum(op, 3);
        REQUIRE(sp.values(1) >= 10.0 * std::max(std::abs(sp.values(0)), 1e-6));
        REQUIRE(fiber_even_weight(op, sp.vectors.col(0)) < 1e-8);
        REQUIRE(factorisation_error(op, sp.vectors.col(0)) < 1e-2);
    }
}

TEST_CASE("model Laplacian gap constant is stable in t", "[oscillator]")
{
    std::vector<double> c;
    for (double t : {1.0, 2.0, 4.0, 8.0})
    {
        GridSpec g{1, recommended_half_width(t), 801};
        auto sp = lowest_spectrum(build_model_laplacian(scalar(1.0), t, g), 2);
        c.push_back(sp.values(1) / t);
    }
    const double lo = *std::min_element(c.begin(), c.end()), hi = *std::max_element(c.begin(), c.end());
    REQUIRE((hi - lo) / lo < 0.10);
}

TEST_CASE("bad grids and parameters are rejected", "[oscillator]")
{
    REQUIRE_THROWS_AS(build_Kt(scalar(1.0), 50.0, GridSpec{1, 8.0, 101}), InvalidInput);
    REQUIRE_THROWS_AS(build_Kt(scalar(1.0), 1.0, GridSpec{1, 8.0, 50}), InvalidInput);
    REQUIRE_THROWS_AS(build_Kt(scalar(1.0), -1.0, GridSpec{1, 8.0, 101}), InvalidInput);
    REQUIRE_THROWS_AS(build_Kt(Eigen::MatrixXd::Identity(2, 2), 1.0, GridSpec{1, 8.0, 101}), InvalidInput);
    REQUIRE_THROWS_AS(build_Kt(scalar(0.0), 1.0, GridSpec{1, 8.0, 101}), InvalidInput);
}

TEST_CASE("spectrum CSV layout", "[oscillator]")
{
    std::ostringstream out;
    write_spectrum_csv(out, 2.0, Eigen::Vector2d(0.0, 4.0));
    REQUIRE(out.str() == "t,index,eigenvalue\n2,0,0\n2,1,4\n");
}
