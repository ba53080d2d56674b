#include "catch_amalgamated.hpp"

#include <random>
#include <sstream>

#include "witten/clifford.hpp"

using namespace witten;
using namespace witten::clifford;

namespace {

Eigen::VectorXd random_unit(int n, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal;
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i)
        v(i) = normal(rng);
    return v / v.norm();
}

Eigen::MatrixXd random_matrix(int n, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            a(i, j) = u(rng);
    return a;
}

Eigen::MatrixXd random_nondegenerate(int n, std::mt19937_64& rng)
{
    while (true)
    {
        Eigen::MatrixXd a = random_matrix(n, rng);
        if (std::abs(a.determinant()) > 0.1)
            return a;
    }
}

}   // namespace

TEST_CASE("basis is ordered by degree then lexicographically", "[clifford]")
{
    ExteriorBasis b(3);
    std::vector<std::vector<int>> expected = {{}, {0}, {1}, {2}, {0, 1}, {0, 2}, {1, 2}, {0, 1, 2}};
    REQUIRE(b.size() == 8);
    for (int i = 0; i < 8; ++i)
        REQUIRE(b.subset(i) == expected[static_cast<std::size_t>(i)]);
}

TEST_CASE("c(e_1) maps the empty wedge to e^1", "[clifford]")
{
    ExteriorBasis b(3);
    FiberOperator c1 = clifford_c(b, unit(3, 0));
    Eigen::VectorXd one = Eigen::VectorXd::Unit(8, 0);
    Eigen::VectorXd out = c1 * one;
    REQUIRE((out - Eigen::VectorXd::Unit(8, b.index(1u))).norm() == 0.0);
    // e^2 ^ e^1 = -e^1 ^ e^2
    FiberOperator w0 = wedge(b, 0);
    Eigen::VectorXd e2 = Eigen::VectorXd::Unit(8, b.index(2u));
    REQUIRE((w0 * e2)(b.index(3u)) == 1.0);
    REQUIRE((wedge(b, 1) * Eigen::VectorXd::Unit(8, b.index(1u)))(b.index(3u)) == -1.0);
}

TEST_CASE("Clifford anticommutation relations on random pairs", "[clifford]")
{
    std::mt19937_64 rng(2024);
    for (int n = 2; n <= 6; ++n)
    {
        ExteriorBasis b(n);
        const FiberOperator id = FiberOperator::Identity(b.size(), b.size());
        double worst = 0.0;
        for (int trial = 0; trial < 1000; ++trial)
        {
            Eigen::VectorXd e = random_unit(n, rng), f = random_unit(n, rng);
            FiberOperator ce = clifford_c(b, e), cf = clifford_c(b, f);
            FiberOperator he = clifford_chat(b, e), hf = clifford_chat(b, f);
            worst = std::max(worst, (ce * cf + cf * ce + 2.0 * e.dot(f) * id).cwiseAbs().maxCoeff());
            worst = std::max(worst, (he * hf + hf * he - 2.0 * e.dot(f) * id).cwiseAbs().maxCoeff());
            worst = std::max(worst, (ce * hf + hf * ce).cwiseAbs().maxCoeff());
            worst = std::max(worst, (ce + ce.transpose()).cwiseAbs().maxCoeff());
            worst = std::max(worst, (he - he.transpose()).cwiseAbs().maxCoeff());
        }
        REQUIRE(worst < 1e-12);
    }
}

TEST_CASE("signed product of c(e_i)c^(e_i) is the parity operator", "[clifford]")
{
    for (int n = 1; n <= 6; ++n)
    {
        ExteriorBasis b(n);
        FiberOperator p = FiberOperator::Identity(b.size(), b.size());
        for (int i = 0; i < n; ++i)
            p = p * clifford_c(b, unit(n, i)) * clifford_chat(b, unit(n, i));
        if (n % 2)
            p = -p;
        REQUIRE((p - parity_operator(b)).norm() < 1e-12);
    }
}

TEST_CASE("L for the identity doubles the degree", "[clifford]")
{
    FiberOperator l = build_L(Eigen::MatrixXd::Identity(2, 2));
    Eigen::Matrix4d expected = Eigen::Vector4d(0, 2, 2, 4).asDiagonal();
    REQUIRE((l - expected).norm() < 1e-12);
    auto info = kernel_parity(Eigen::MatrixXd::Identity(4, 4));
    REQUIRE(info.parity == Parity::Even);
    REQUIRE(std::abs(info.kernel_vector(0)) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("L kernel is odd for an orientation-reversing linearisation", "[clifford]")
{
    Eigen::MatrixXd a = Eigen::Vector2d(-1, 1).asDiagonal();
    auto info = kernel_parity(a);
    REQUIRE(info.dim == 1);
    REQUIRE(info.parity == Parity::Odd);
    // kernel is spanned by e^1
    REQUIRE(std::abs(info.kernel_vector(1)) == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("kernel parity follows the sign of det A", "[clifford]")
{
    std::mt19937_64 rng(77);
    int agree = 0, total = 0;
    for (int n = 2; n <= 5; ++n)
        for (int trial = 0; trial < 50; ++trial)
        {
            Eigen::MatrixXd a = random_nondegenerate(n, rng);
            auto info = kernel_parity(a);
            // independent oracle: direct eigensolve of the operator
            auto es = detail::dense_symmetric_eigen(build_L(a));
            REQUIRE(es.values(0) > -1e-10);
            REQUIRE(es.values(1) > 1e-6);
            agree += (info.parity == Parity::Even) == (a.determinant() > 0);
            ++total;
        }
    REQUIRE(total == 200);
    REQUIRE(agree == total);
}

TEST_CASE("eta operators are commuting symmetric involutions reconstructing L", "[clifford]")
{
    std::mt19937_64 rng(5);
    for (int n = 2; n <= 5; ++n)
        for (int trial = 0; trial < 10; ++trial)
        {
            Eigen::MatrixXd a = random_nondegenerate(n, rng);
            const LocalModel lm = polar_decomposition(a);
            REQUIRE(lm.reconstruction_residual() < 1e-10);
            REQUIRE(lm.W.determinant() == Catch::Approx(1.0).epsilon(1e-12));
            REQUIRE((lm.U.transpose() * lm.U - Eigen::MatrixXd::Identity(n, n)).norm() < 1e-12);
            ExteriorBasis b(n);
            const auto eta = eta_operators(a);
            const FiberOperator id = FiberOperator::Identity(b.size(), b.size());
            for (int i = 0; i < n; ++i)
            {
                const auto& ei = eta[static_cast<std::size_t>(i)];
                REQUIRE((ei - ei.transpose()).cwiseAbs().maxCoeff() < 1e-12);
                REQUIRE((ei * ei - id).cwiseAbs().maxCoeff() < 1e-12);
                const FiberOperator hf = clifford_chat(b, lm.W.col(i));
                REQUIRE((hf * ei + ei * hf).cwiseAbs().maxCoeff() < 1e-12);
                for (int j = 0; j < n; ++j)
                {
                    if (j == i)
                        continue;
                    const auto& ej = eta[static_cast<std::size_t>(j)];
                    REQUIRE((ei * ej - ej * ei).cwiseAbs().maxCoeff() < 1e-12);
                    const FiberOperator hfj = clifford_chat(b, lm.W.col(j));
                    REQUIRE((hfj * ei - ei * hfj).cwiseAbs().maxCoeff() < 1e-12);
                }
            }
            const FiberOperator l = build_L(a);
            REQUIRE((l - L_from_eta(a)).cwiseAbs().maxCoeff() < 1e-12);
            REQUIRE((l - l.transpose()).cwiseAbs().maxCoeff() < 1e-12);
            auto ev = detail::dense_symmetric_eigen(l).values;
            REQUIRE(ev(0) > -1e-10);
            REQUIRE(ev(1) >= lm.s.minCoeff() - 1e-10);
        }
}

TEST_CASE("eta for the identity has balanced +-1 eigenspaces", "[clifford]")
{
    const auto eta = eta_operators(Eigen::MatrixXd::Identity(3, 3));
    ExteriorBasis b(3);
    for (int j = 0; j < 3; ++j)
    {
        FiberOperator expected = clifford_c(b, unit(3, j)) * clifford_chat(b, unit(3, j));
        REQUIRE((eta[static_cast<std::size_t>(j)] - expected).norm() < 1e-12);
        REQUIRE(eta[static_cast<std::size_t>(j)].trace() == Catch::Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("singular linearisations are rejected", "[clifford]")
{
    Eigen::MatrixXd a(2, 2);
    a << 1, 2, 2, 4;
    REQUIRE_THROWS_AS(build_L(a), InvalidInput);
    REQUIRE_THROWS_AS(kernel_parity(a), InvalidInput);
    REQUIRE_THROWS_AS(eta_operators(a), InvalidInput);
}

TEST_CASE("signature fibre identities in dimension five", "[clifford]")
{
    const Eigen::VectorXd v = unit(5, 0), x = unit(5, 1);
    auto flat = signature_fiber_checks(5, v, x, Eigen::MatrixXd::Zero(5, 5), 0.7);
    REQUIRE(flat.complex_structure_residual < 1e-12);
    REQUIRE(flat.sig_symbol_skew_residual < 1e-12);
    REQUIRE(flat.deformation_skew_residual < 1e-12);
    REQUIRE(flat.t0 == 0.0);
    REQUIRE(flat.min_eigenvalue_at_t == Catch::Approx(0.49).epsilon(1e-12));

    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 5; ++trial)
    {
        Eigen::MatrixXd g = random_matrix(5, rng, -1.0, 1.0);
        auto r = signature_fiber_checks(5, v, x, g, 0.1);
        REQUIRE(std::isfinite(r.t0));
        REQUIRE(r.positive_at_verified_t);
        // independent: eigenvalues of tQ + t^2 are t*mu + t^2
        ExteriorBasis b(5);
        auto mu = detail::dense_symmetric_eigen(curvature_term(b, v, g)).values(0);
        REQUIRE(r.min_eigenvalue_at_t == Catch::Approx(0.1 * mu + 0.01).margin(1e-12));
    }

    REQUIRE_THROWS_AS(signature_fiber_checks(5, v, v, Eigen::MatrixXd::Zero(5, 5), 1.0), InvalidInput);
    REQUIRE_THROWS_AS(signature_fiber_checks(4, unit(4, 0), unit(4, 1), Eigen::MatrixXd::Zero(4, 4), 1.0), InvalidInput);
    REQUIRE_THROWS_AS(signature_fiber_checks(5, 2.0 * v, x, Eigen::MatrixXd::Zero(5, 5), 1.0), InvalidInput);
}

TEST_CASE("fibre operators export to CSV", "[clifford]")
{
    std::ostringstream out;
    write_csv(out, build_L(Eigen::MatrixXd::Identity(2, 2)));
    REQUIRE(out.str() == "0,0,0,0\n0,2,0,0\n0,0,2,0\n0,0,0,4\n");
    REQUIRE_THROWS_AS(write_csv(out, FiberOperator::Zero(3, 3)), InvalidInput);
}
