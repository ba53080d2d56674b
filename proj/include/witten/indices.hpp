#pragma once

/**
 * Index computations: Poincare-Hopf sums of vector-field zeros, the
 * finite-dimensional analytic index, the cochain Dirac block, the Kervaire
 * semicharacteristic, and mod-2 kernel parity of skew-symmetric matrices.
 */

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "witten/clifford.hpp"
#include "witten/errors.hpp"
#include "witten/exterior_core.hpp"
#include "witten/geometry.hpp"

namespace witten::indices {

using geometry::ParamSurface;
using geometry::VectorField;

/** ------------------------------------------------------------------- //
 *                           POINCARE-HOPF                              //
 *  ------------------------------------------------------------------- */

struct IndexReport
{
    std::string surface;
    std::string field;
    std::vector<geometry::VectorFieldZero> zeros;
    std::vector<int> signs;
    long sum = 0;
    long chi_cells = 0;
    long chi_betti = 0;
    std::vector<long> betti;
    bool pass = false;
};

/// Sum of sgn det A_p over the zeros of V against chi of a triangulation of the surface.
inline IndexReport poincare_hopf(const ParamSurface& s, const VectorField& v, int resolution = 16)
{
    IndexReport r;
    r.surface = s.name();
    r.field = v.name;
    r.zeros = geometry::find_vector_field_zeros(s, v);
    for (const auto& z : r.zeros)
    {
        r.signs.push_back(z.sign);
        r.sum += z.sign;
    }
    const auto mesh = geometry::triangulate(s, resolution);
    for (int k = 0; k <= mesh.complex.dim; ++k)
        r.chi_cells += (k % 2 == 0 ? 1 : -1) * static_cast<long>(mesh.complex.count(k));
    r.betti = exterior::betti_numbers(mesh.complex);
    for (std::size_t k = 0; k < r.betti.size(); ++k)
        r.chi_betti += (k % 2 == 0 ? 1 : -1) * r.betti[k];
    r.pass = r.sum == r.chi_cells && r.chi_cells == r.chi_betti;
    return r;
}

/** ------------------------------------------------------------------- //
 *                         FINITE INDEX                                 //
 *  ------------------------------------------------------------------- */

struct IndexParts
{
    long kernel = 0;
    long cokernel = 0;
    long rank = 0;
    long index() const { return kernel - cokernel; }
};

inline constexpr double rank_threshold = 1e-10;

/// Kernel and cokernel dimensions from singular values above 1e-10 * sigma_max.
inline IndexParts index_parts(const Eigen::MatrixXd& t)
{
    IndexParts p;
    if (t.rows() > 0 && t.cols() > 0)
    {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(t);
        const auto& sv = svd.singularValues();
        const double cut = rank_threshold * (sv.size() ? sv(0) : 0.0);
        for (Eigen::Index i = 0; i < sv.size(); ++i)
            p.rank += sv(i) > cut && sv(i) > 0.0;
    }
    p.kernel = t.cols() - p.rank;
    p.cokernel = t.rows() - p.rank;
    if (p.index() != t.cols() - t.rows())
        throw NumericalError("indices", "finite_index", "rank-nullity violated");
    return p;
}

inline long finite_index(const Eigen::MatrixXd& t) { return index_parts(t).index(); }

/**
 * The even-to-odd block of d + delta, written in whitened coordinates so the
 * adjoint is a plain transpose. Columns: even cells by degree; rows: odd cells.
 */
inline Eigen::MatrixXd dirac_even_to_odd(const exterior::CellComplex& cx, const exterior::InnerProductFamily& ip)
{
    ip.validate(cx);
    std::vector<Eigen::Index> offset(static_cast<std::size_t>(cx.dim + 1), 0);
    Eigen::Index even = 0, odd = 0;
    for (int k = 0; k <= cx.dim; ++k)
    {
        auto& counter = k % 2 == 0 ? even : odd;
        offset[static_cast<std::size_t>(k)] = counter;
        counter += cx.count(k);
    }
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(odd, even);
    for (int k = 0; k < cx.dim; ++k)
    {
        const Eigen::MatrixXd b = Eigen::MatrixXd(exterior::whitened(
            exterior::coboundary(cx, k).matrix, exterior::Whitening::of(ip, k), exterior::Whitening::of(ip, k + 1)));
        const Eigen::Index ok = offset[static_cast<std::size_t>(k)];
        const Eigen::Index ok1 = offset[static_cast<std::size_t>(k + 1)];
        if (k % 2 == 0)
            out.block(ok1, ok, b.rows(), b.cols()) = b;                 // d: C^k -> C^{k+1}
        else
            out.block(ok, ok1, b.cols(), b.rows()) = b.transpose();     // delta: C^{k+1} -> C^k
    }
    return out;
}

struct HomotopyReport
{
    std::vector<double> s;
    std::vector<long> index;
    bool constant = true;
};

/// finite_index along (1-s) T0 + s T1 at steps+1 equally spaced s.
inline HomotopyReport index_homotopy_check(const Eigen::MatrixXd& t0, const Eigen::MatrixXd& t1, int steps = 10)
{
    if (t0.rows() != t1.rows() || t0.cols() != t1.cols())
        throw InvalidInput("indices", "index_homotopy_check",
                           "shape mismatch " + std::to_string(t0.rows()) + "x" + std::to_string(t0.cols()) + " vs "
                           + std::to_string(t1.rows()) + "x" + std::to_string(t1.cols()));
    if (steps < 1)
        throw InvalidInput("indices", "index_homotopy_check", "steps must be positive");
    HomotopyReport r;
    for (int i = 0; i <= steps; ++i)
    {
        const double s = static_cast<double>(i) / steps;
        r.s.push_back(s);
        r.index.push_back(finite_index((1.0 - s) * t0 + s * t1));
        r.constant = r.constant && r.index.back() == r.index.front();
    }
    return r;
}

/** ------------------------------------------------------------------- //
 *                    SEMICHARACTERISTIC AND PARITY                     //
 *  ------------------------------------------------------------------- */

struct SemicharacteristicReport
{
    std::vector<long> betti;
    int q = 0;
    long even_sum = 0;
    int k = 0;
};

inline SemicharacteristicReport kervaire(const std::vector<long>& betti)
{
    if (betti.size() % 4 != 2)
        throw InvalidInput("indices", "kervaire",
                           "need a Betti list of length 4q+2, got " + std::to_string(betti.size()));
    if (betti[0] < 1)
        throw InvalidInput("indices", "kervaire", "beta_0 must be at least 1 for a connected manifold");
    for (long b : betti)
        if (b < 0)
            throw InvalidInput("indices", "kervaire", "negative Betti number");
    SemicharacteristicReport r;
    r.betti = betti;
    r.q = static_cast<int>((betti.size() - 2) / 4);
    for (std::size_t i = 0; i < betti.size(); i += 2)
        r.even_sum += betti[i];
    r.k = static_cast<int>(r.even_sum % 2);
    return r;
}

/// Kernel dimension by singular values, threshold 1e-10 * sigma_max; the zero matrix has full kernel.
inline long kernel_dimension(const Eigen::MatrixXd& a) { return index_parts(a).kernel; }

struct SkewParityReport
{
    int n = 0;
    int trials = 0;
    std::uint64_t seed = 0;
    std::map<long, int> kernel_histogram;
    int violations = 0;
    int path_samples = 0;
    int path_violations = 0;
    bool pass() const { return violations == 0 && path_violations == 0; }
};

namespace detail_idx {

/// Skew matrix of rank at most 2*pairs; pairs = n/2 gives a generic one.
inline Eigen::MatrixXd random_skew(int n, int pairs, std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    if (2 * pairs >= n)
    {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                a(i, j) = g(rng);
        return a - a.transpose();
    }
    for (int p = 0; p < pairs; ++p)
    {
        Eigen::VectorXd u(n), v(n);
        for (int i = 0; i < n; ++i)
            u(i) = g(rng);
        for (int i = 0; i < n; ++i)
            v(i) = g(rng);
        a += u * v.transpose() - v * u.transpose();
    }
    return a;
}

}   // namespace detail_idx

/**
 * Kernel parity of random skew N x N matrices. Trial i uses its own engine
 * seeded with seed + i and alternates generic and low-rank draws; every
 * fourth trial also samples a skew path to a second matrix.
 */
inline SkewParityReport skew_parity_check(int n, int trials = 1000, std::uint64_t seed = 1)
{
    if (n < 1)
        throw InvalidInput("indices", "skew_parity_check", "N must be at least 1");
    if (trials < 0)
        throw InvalidInput("indices", "skew_parity_check", "trial count must be nonnegative");
    SkewParityReport r;
    r.n = n;
    r.trials = trials;
    r.seed = seed;
    const long parity = n % 2;
    for (int i = 0; i < trials; ++i)
    {
        std::mt19937_64 rng(seed + static_cast<std::uint64_t>(i));
        const int pairs = i % 2 == 0 ? n / 2 : static_cast<int>(rng() % static_cast<std::uint64_t>(n / 2 + 1));
        const Eigen::MatrixXd a = detail_idx::random_skew(n, pairs, rng);
        const long ker = kernel_dimension(a);
        ++r.kernel_histogram[ker];
        r.violations += (ker % 2) != parity;
        if (i % 4 != 0)
            continue;
        const Eigen::MatrixXd b = detail_idx::random_skew(n, n / 2, rng);
        for (int j = 0; j <= 8; ++j)
        {
            const double s = j / 8.0;
            ++r.path_samples;
            r.path_violations += (kernel_dimension((1.0 - s) * a + s * b) % 2) != parity;
        }
    }
    return r;
}

/** ------------------------------------------------------------------- //
 *                        PARALLELIZABLE 4q+1 TORUS                     //
 *  ------------------------------------------------------------------- */

struct AtiyahReport
{
    int q = 0;
    int n = 0;
    SemicharacteristicReport kervaire;
    Eigen::VectorXd v, x;
    std::vector<double> tested_t;
    std::vector<double> min_eigenvalues;
    bool positive_for_all_t = false;
    std::uint64_t seed = 0;
    double random_t0 = 0.0;
    double random_min_at_2t0 = 0.0;
    bool random_positive_at_2t0 = false;
};

/// k(T^{4q+1}) from the cubical torus, then fiber positivity for constant and random gradX.
inline AtiyahReport atiyah_consistency(int q = 1, const std::vector<double>& ts = {0.01, 0.1, 1.0, 10.0, 100.0},
                                       std::uint64_t seed = 1)
{
    if (q != 1)
        throw InvalidInput("indices", "atiyah_consistency", "only q = 1 (T^5) is buildable here, got q = " + std::to_string(q));
    AtiyahReport r;
    r.q = q;
    r.n = 4 * q + 1;
    r.seed = seed;
    r.kervaire = kervaire(exterior::betti_numbers(exterior::torus_power(r.n, 3)));
    // coordinate fields on a torus are constant and orthonormal everywhere
    r.v = clifford::unit(r.n, 0);
    r.x = clifford::unit(r.n, 1);
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(r.n, r.n);
    r.positive_for_all_t = !ts.empty();
    for (double t : ts)
    {
        if (!(t > 0.0))
            throw InvalidInput("indices", "atiyah_consistency", "tested t must be positive");
        const auto rep = clifford::signature_fiber_checks(r.n, r.v, r.x, zero, t);
        r.tested_t.push_back(t);
        r.min_eigenvalues.push_back(rep.min_eigenvalue_at_t);
        r.positive_for_all_t = r.positive_for_all_t && rep.min_eigenvalue_at_t > 0.0;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd grad(r.n, r.n);
    for (int i = 0; i < r.n; ++i)
        for (int j = 0; j < r.n; ++j)
            grad(i, j) = g(rng);
    const auto rep = clifford::signature_fiber_checks(r.n, r.v, r.x, grad, 1.0);
    r.random_t0 = rep.t0;
    r.random_min_at_2t0 = rep.min_eigenvalue_at_verified_t;
    r.random_positive_at_2t0 = rep.positive_at_verified_t;
    return r;
}

/** ------------------------------------------------------------------- //
 *                                 JSON                                 //
 *  ------------------------------------------------------------------- */

inline nlohmann::json to_json(const IndexReport& r)
{
    return {{"surface", r.surface}, {"field", r.field}, {"signs", r.signs}, {"sum", r.sum},
            {"chi_cells", r.chi_cells}, {"chi_betti", r.chi_betti}, {"betti", r.betti},
            {"verdict", r.pass ? "PASS" : "FAIL"}};
}

inline nlohmann::json to_json(const SemicharacteristicReport& r)
{
    return {{"betti", r.betti}, {"q", r.q}, {"even_sum", r.even_sum}, {"k", r.k}};
}

inline nlohmann::json to_json(const SkewParityReport& r)
{
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [ker, count] : r.kernel_histogram)
        hist[std::to_string(ker)] = count;
    return {{"n", r.n}, {"trials", r.trials}, {"seed", r.seed}, {"kernel_histogram", hist},
            {"violations", r.violations}, {"path_samples", r.path_samples},
            {"path_violations", r.path_violations}, {"verdict", r.pass() ? "PASS" : "FAIL"}};
}

}   // namespace witten::indices
