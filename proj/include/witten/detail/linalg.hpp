#pragma once

/**
 * Linear-algebra kernels shared by the modules: exact integer rank of sparse
 * incidence matrices, dense and sparse symmetric eigensolvers, numerical rank.
 */

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "witten/errors.hpp"

namespace witten::detail {

using SparseInt = Eigen::SparseMatrix<int>;
using SparseReal = Eigen::SparseMatrix<double>;

/** ------------------------------------------------------------------- //
 *                        EXACT INTEGER ELIMINATION                     //
 *  ------------------------------------------------------------------- */
namespace int_elim {

using Entry = std::pair<int, std::int64_t>;   // (row, value), rows ascending
using Column = std::vector<Entry>;

inline std::int64_t checked(__int128 v)
{
    if (v > std::numeric_limits<std::int64_t>::max() || v < std::numeric_limits<std::int64_t>::min())
        throw OverflowError("linalg", "integer_rank", "coefficient overflow during fraction-free elimination");
    return static_cast<std::int64_t>(v);
}

/**
 * Replace col by (b * col - a * pivot) / g where a, b are the trailing
 * entries, then divide by the gcd of the remaining content.
 */
inline void eliminate(Column& col, const Column& pivot)
{
    const std::int64_t a = col.back().second;
    const std::int64_t b = pivot.back().second;
    const std::int64_t g = std::gcd(a, b);
    const std::int64_t ca = b / g;
    const std::int64_t cp = a / g;

    Column out;
    out.reserve(col.size() + pivot.size());
    std::size_t i = 0, j = 0;
    while (i < col.size() || j < pivot.size())
    {
        if (j == pivot.size() || (i < col.size() && col[i].first < pivot[j].first))
        {
            out.emplace_back(col[i].first, checked(static_cast<__int128>(ca) * col[i].second));
            ++i;
        }
        else if (i == col.size() || pivot[j].first < col[i].first)
        {
            out.emplace_back(pivot[j].first, checked(-static_cast<__int128>(cp) * pivot[j].second));
            ++j;
        }
        else
        {
            const __int128 v = static_cast<__int128>(ca) * col[i].second
                             - static_cast<__int128>(cp) * pivot[j].second;
            if (v != 0)
                out.emplace_back(col[i].first, checked(v));
            ++i;
            ++j;
        }
    }

    std::int64_t content = 0;
    for (const auto& e : out)
        content = std::gcd(content, e.second);
    if (content > 1)
        for (auto& e : out)
            e.second /= content;
    col.swap(out);
}

}   // namespace int_elim

/**
 * Rank over the rationals of an integer matrix, computed by fraction-free
 * column elimination with trailing-row pivots. Every intermediate value is
 * an exact 64-bit integer; overflow raises OverflowError instead of
 * silently wrapping.
 */
inline long integer_rank(const SparseInt& m)
{
    using namespace int_elim;
    std::vector<Column> reduced;
    std::vector<int> pivot_of(static_cast<std::size_t>(m.rows()), -1);
    long rank = 0;

    for (int c = 0; c < m.outerSize(); ++c)
    {
        Column col;
        for (SparseInt::InnerIterator it(m, c); it; ++it)
            if (it.value() != 0)
                col.emplace_back(static_cast<int>(it.row()), it.value());
        std::sort(col.begin(), col.end());

        while (!col.empty())
        {
            const int low = col.back().first;
            const int p = pivot_of[static_cast<std::size_t>(low)];
            if (p < 0)
            {
                pivot_of[static_cast<std::size_t>(low)] = static_cast<int>(reduced.size());
                reduced.push_back(std::move(col));
                ++rank;
                break;
            }
            eliminate(col, reduced[static_cast<std::size_t>(p)]);
        }
    }
    return rank;
}

/** ------------------------------------------------------------------- //
 *                         NUMERICAL LINEAR ALGEBRA                     //
 *  ------------------------------------------------------------------- */

/// Number of singular values above rel_tol * sigma_max.
inline long numerical_rank(const Eigen::MatrixXd& a, double rel_tol = 1e-10)
{
    if (a.size() == 0)
        return 0;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0)
        return 0;
    long r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > rel_tol * s(0))
            ++r;
    return r;
}

struct EigenPairs
{
    Eigen::VectorXd values;    // ascending
    Eigen::MatrixXd vectors;   // orthonormal columns
};

inline EigenPairs dense_symmetric_eigen(const Eigen::MatrixXd& a)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success)
        throw NumericalError("linalg", "dense_symmetric_eigen", "eigensolver did not converge");
    return {es.eigenvalues(), es.eigenvectors()};
}

/// Upper bound on the spectral radius (max absolute row sum).
inline double norm_bound(const SparseReal& a)
{
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(a.rows());
    for (int k = 0; k < a.outerSize(); ++k)
        for (SparseReal::InnerIterator it(a, k); it; ++it)
            rows(it.row()) += std::abs(it.value());
    return a.rows() == 0 ? 0.0 : rows.maxCoeff();
}

/// Largest eigenvalue of a symmetric matrix by Lanczos with full reorthogonalisation.
inline double largest_eigenvalue(const SparseReal& a, int steps = 60, std::uint64_t seed = 7)
{
    const Eigen::Index n = a.rows();
    if (n == 0)
        return 0.0;
    if (n <= 400)
        return dense_symmetric_eigen(Eigen::MatrixXd(a)).values(n - 1);

    const int m = static_cast<int>(std::min<Eigen::Index>(steps, n));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd q(n, m);
    Eigen::VectorXd alpha(m), beta(m);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v(i) = normal(rng);
    v.normalize();

    int used = 0;
    for (int j = 0; j < m; ++j)
    {
        q.col(j) = v;
        Eigen::VectorXd w = a * v;
        alpha(j) = v.dot(w);
        for (int pass = 0; pass < 2; ++pass)
            w -= q.leftCols(j + 1) * (q.leftCols(j + 1).transpose() * w);
        beta(j) = w.norm();
        used = j + 1;
        if (beta(j) < 1e-12 * std::abs(alpha(j)) + 1e-300)
            break;
        v = w / beta(j);
    }
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(used, used);
    for (int j = 0; j < used; ++j)
    {
        t(j, j) = alpha(j);
        if (j + 1 < used)
            t(j, j + 1) = t(j + 1, j) = beta(j);
    }
    return dense_symmetric_eigen(t).values(used - 1);
}

/**
 * Lowest `count` eigenpairs of a sparse symmetric positive semidefinite
 * matrix by shift-and-invert block subspace iteration with Rayleigh-Ritz
 * projection. A block larger than `count` carries guard vectors so that
 * clustered or repeated eigenvalues converge together.
 */
inline EigenPairs lowest_eigenpairs(const SparseReal& a, int count, double tol = 1e-10,
                                    std::uint64_t seed = 11, int dense_limit = 500)
{
    const Eigen::Index n = a.rows();
    if (count <= 0 || n == 0)
        return {Eigen::VectorXd(0), Eigen::MatrixXd(n, 0)};
    count = static_cast<int>(std::min<Eigen::Index>(count, n));

    if (n <= dense_limit || 2 * count + 10 >= n)
    {
        auto all = dense_symmetric_eigen(Eigen::MatrixXd(a));
        return {all.values.head(count), all.vectors.leftCols(count)};
    }

    const double scale = norm_bound(a);
    const int block = static_cast<int>(std::min<Eigen::Index>(count + std::max(8, count / 2), n));
    // a small shift keeps the factorisation definite without swamping eigenvalues of order one
    const double shift = std::max(1e-12 * scale, 1e-300);
    const double roundoff = 10.0 * std::numeric_limits<double>::epsilon() * scale;

    SparseReal shifted = a;
    for (Eigen::Index i = 0; i < n; ++i)
        shifted.coeffRef(i, i) += shift;
    shifted.makeCompressed();
    Eigen::SimplicialLDLT<SparseReal> solver(shifted);
    if (solver.info() != Eigen::Success)
        throw NumericalError("linalg", "lowest_eigenpairs", "factorisation of shifted operator failed");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd x(n, block);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int j = 0; j < block; ++j)
            x(i, j) = normal(rng);

    auto orthonormalise = [](const Eigen::MatrixXd& m) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
        return Eigen::MatrixXd(qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols()));
    };

    x = orthonormalise(x);
    Eigen::VectorXd theta;
    for (int iter = 0; iter < 500; ++iter)
    {
        Eigen::MatrixXd y = solver.solve(x);
        Eigen::MatrixXd q = orthonormalise(y);
        Eigen::MatrixXd aq = a * q;
        Eigen::MatrixXd h = q.transpose() * aq;
        h = 0.5 * (h + h.transpose()).eval();
        auto small = dense_symmetric_eigen(h);
        x = q * small.vectors;
        theta = small.values;

        Eigen::MatrixXd r = aq * small.vectors - x * theta.asDiagonal();
        bool converged = true;
        for (int j = 0; j < count; ++j)
            if (r.col(j).norm() > std::max(tol * std::max(std::abs(theta(j)), 1.0), roundoff))
            {
                converged = false;
                break;
            }
        if (converged)
            return {theta.head(count), x.leftCols(count)};
    }
    throw NumericalError("linalg", "lowest_eigenpairs", "subspace iteration did not converge");
}

/**
 * All eigenpairs with eigenvalue <= cutoff (plus, when available, the first
 * eigenvalue above it, returned as `next_above`). The block is doubled until
 * it reaches past the cutoff.
 */
struct SpectrumBelow
{
    EigenPairs below;
    double next_above = std::numeric_limits<double>::infinity();
};

inline SpectrumBelow eigenpairs_below(const SparseReal& a, double cutoff, int initial = 8,
                                      std::uint64_t seed = 11)
{
    const Eigen::Index n = a.rows();
    int want = static_cast<int>(std::min<Eigen::Index>(std::max(initial, 1), n));
    if (n > 0 && cutoff >= norm_bound(a))
        want = static_cast<int>(n);   // the whole spectrum
    while (true)
    {
        EigenPairs ep = lowest_eigenpairs(a, want, 1e-10, seed);
        const Eigen::Index got = ep.values.size();
        Eigen::Index k = 0;
        while (k < got && ep.values(k) <= cutoff)
            ++k;
        if (k < got || got == n)
        {
            SpectrumBelow out;
            out.below.values = ep.values.head(k);
            out.below.vectors = ep.vectors.leftCols(k);
            if (k < got)
                out.next_above = ep.values(k);
            return out;
        }
        want = static_cast<int>(std::min<Eigen::Index>(2 * want, n));
    }
}

/// Sparse diagonal matrix from a vector.
inline SparseReal sparse_diagonal(const Eigen::VectorXd& d)
{
    SparseReal m(d.size(), d.size());
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(d.size()));
    for (Eigen::Index i = 0; i < d.size(); ++i)
        t.emplace_back(static_cast<int>(i), static_cast<int>(i), d(i));
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

inline SparseReal to_real(const SparseInt& m)
{
    return m.cast<double>();
}

}   // namespace witten::detail
