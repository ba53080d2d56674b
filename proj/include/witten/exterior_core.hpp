#pragma once

/**
 * Finite-dimensional exterior calculus on cell complexes.
 *
 * A CellComplex stores signed integer incidence matrices; k-cochains are
 * coefficient vectors on k-cells, the coboundary is the transposed
 * incidence, and an InnerProductFamily (one SPD mass matrix per degree)
 * supplies the codifferential, the Hodge Laplacian and the Hodge
 * decomposition. Betti numbers are computed exactly over the integers and
 * never depend on the masses.
 */

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "witten/detail/linalg.hpp"
#include "witten/errors.hpp"

namespace witten::exterior {

using detail::SparseInt;
using detail::SparseReal;

enum class CellKind
{
    Simplicial,   // each k-cell has k+1 faces
    Cubical,      // each k-cell has 2k faces
    General
};

inline std::string to_string(CellKind kind)
{
    switch (kind)
    {
        case CellKind::Simplicial: return "simplicial";
        case CellKind::Cubical: return "cubical";
        default: return "general";
    }
}

inline CellKind cell_kind_from_string(const std::string& s)
{
    if (s == "simplicial")
        return CellKind::Simplicial;
    if (s == "cubical")
        return CellKind::Cubical;
    if (s == "general")
        return CellKind::General;
    throw InvalidInput("exterior_core", "cell_kind_from_string", "unknown cell kind '" + s + "'");
}

/**
 * Graded cells with signed incidence. boundary[k] is the matrix of the
 * boundary map from k-cells to (k-1)-cells (rows: (k-1)-cells, columns:
 * k-cells); boundary[0] is an empty placeholder.
 */
struct CellComplex
{
    int dim = 0;
    std::vector<long> cells;
    std::vector<SparseInt> boundary;
    std::vector<int> orientation;
    CellKind kind = CellKind::General;

    long count(int k) const
    {
        return (k < 0 || k > dim) ? 0 : cells[static_cast<std::size_t>(k)];
    }

    const SparseInt& boundary_matrix(int k) const
    {
        if (k < 1 || k > dim)
            throw InvalidInput("exterior_core", "boundary_matrix", "degree " + std::to_string(k) + " out of range");
        return boundary[static_cast<std::size_t>(k)];
    }

    /**
     * Check shapes, the face-count convention and that the boundary of a
     * boundary vanishes exactly as an integer matrix.
     */
    void validate() const
    {
        if (dim < 0 || cells.size() != static_cast<std::size_t>(dim + 1)
            || boundary.size() != static_cast<std::size_t>(dim + 1))
            throw InvalidInput("exterior_core", "validate", "cells/boundary lists do not match dim");
        for (int k = 1; k <= dim; ++k)
        {
            const auto& b = boundary[static_cast<std::size_t>(k)];
            if (b.rows() != count(k - 1) || b.cols() != count(k))
                throw InvalidInput("exterior_core", "validate", "boundary " + std::to_string(k) + " has wrong shape");
            if (kind == CellKind::General)
                continue;
            const long faces = kind == CellKind::Simplicial ? k + 1 : 2 * k;
            for (int c = 0; c < b.outerSize(); ++c)
            {
                long nnz = 0;
                for (SparseInt::InnerIterator it(b, c); it; ++it)
                {
                    if (it.value() != 0)
                        ++nnz;
                    if (std::abs(it.value()) != 1 && it.value() != 0)
                        throw InvalidInput("exterior_core", "validate", "incidence entries must be in {-1,0,1}");
                }
                if (nnz != faces)
                    throw InvalidInput("exterior_core", "validate",
                                       "cell " + std::to_string(c) + " of dimension " + std::to_string(k)
                                       + " has " + std::to_string(nnz) + " faces, expected " + std::to_string(faces));
            }
        }
        for (int k = 2; k <= dim; ++k)
        {
            SparseInt bb = boundary[static_cast<std::size_t>(k - 1)] * boundary[static_cast<std::size_t>(k)];
            for (int c = 0; c < bb.outerSize(); ++c)
                for (SparseInt::InnerIterator it(bb, c); it; ++it)
                    if (it.value() != 0)
                        throw InvalidInput("exterior_core", "validate",
                                           "boundary of boundary nonzero in degree " + std::to_string(k));
        }
        if (!orientation.empty() && orientation.size() != static_cast<std::size_t>(count(dim)))
            throw InvalidInput("exterior_core", "validate", "orientation length must equal number of top cells");
    }
};

/**
 * Per-degree SPD mass matrices. Diagonal (lumped) masses are the default;
 * `dense` may be filled instead for adjointness stress tests.
 */
struct InnerProductFamily
{
    std::vector<Eigen::VectorXd> diagonal;
    std::vector<Eigen::MatrixXd> dense;

    bool is_dense() const { return !dense.empty(); }

    static InnerProductFamily identity(const CellComplex& cx)
    {
        InnerProductFamily ip;
        for (int k = 0; k <= cx.dim; ++k)
            ip.diagonal.push_back(Eigen::VectorXd::Ones(cx.count(k)));
        return ip;
    }

    Eigen::MatrixXd matrix(int k) const
    {
        if (is_dense())
            return dense.at(static_cast<std::size_t>(k));
        return diagonal.at(static_cast<std::size_t>(k)).asDiagonal();
    }

    Eigen::VectorXd apply(int k, const Eigen::VectorXd& x) const
    {
        if (is_dense())
            return dense.at(static_cast<std::size_t>(k)) * x;
        return diagonal.at(static_cast<std::size_t>(k)).cwiseProduct(x);
    }

    double inner(int k, const Eigen::VectorXd& x, const Eigen::VectorXd& y) const
    {
        return x.dot(apply(k, y));
    }

    double norm(int k, const Eigen::VectorXd& x) const { return std::sqrt(inner(k, x, x)); }

    /// Throws InvalidInput unless every mass matrix is SPD with the right size.
    void validate(const CellComplex& cx) const
    {
        const std::size_t degrees = static_cast<std::size_t>(cx.dim + 1);
        if (is_dense())
        {
            if (dense.size() != degrees)
                throw InvalidInput("exterior_core", "inner_product", "one mass matrix per degree required");
            for (int k = 0; k <= cx.dim; ++k)
            {
                const auto& m = dense[static_cast<std::size_t>(k)];
                if (m.rows() != cx.count(k) || m.cols() != cx.count(k))
                    throw InvalidInput("exterior_core", "inner_product", "mass matrix " + std::to_string(k) + " has wrong size");
                if ((m - m.transpose()).norm() > 1e-12 * std::max(1.0, m.norm()))
                    throw InvalidInput("exterior_core", "inner_product", "mass matrix " + std::to_string(k) + " is not symmetric");
                Eigen::LLT<Eigen::MatrixXd> llt(m);
                if (llt.info() != Eigen::Success)
                    throw InvalidInput("exterior_core", "inner_product", "mass matrix " + std::to_string(k) + " is not positive definite");
            }
            return;
        }
        if (diagonal.size() != degrees)
            throw InvalidInput("exterior_core", "inner_product", "one mass vector per degree required");
        for (int k = 0; k <= cx.dim; ++k)
        {
            const auto& d = diagonal[static_cast<std::size_t>(k)];
            if (d.size() != cx.count(k))
                throw InvalidInput("exterior_core", "inner_product", "mass vector " + std::to_string(k) + " has wrong size");
            for (Eigen::Index i = 0; i < d.size(); ++i)
                if (!(d(i) > 0.0) || !std::isfinite(d(i)))
                    throw InvalidInput("exterior_core", "inner_product",
                                       "mass " + std::to_string(k) + "[" + std::to_string(i) + "] is not positive");
        }
    }
};

struct Cochain
{
    int degree = 0;
    Eigen::VectorXd coeffs;
};

/// A single block of a graded operator: degree `source` to degree `source + shift`.
struct GradedOperator
{
    int source = 0;
    int shift = 0;
    SparseReal matrix;

    int target() const { return source + shift; }

    Cochain apply(const Cochain& c) const
    {
        if (c.degree != source || c.coeffs.size() != matrix.cols())
            throw InvalidInput("exterior_core", "apply", "cochain degree/length does not match operator");
        return {target(), matrix * c.coeffs};
    }
};

/** ------------------------------------------------------------------- //
 *                              OPERATIONS                              //
 *  ------------------------------------------------------------------- */

/// d_k = transpose of the boundary from (k+1)-cells, as an exact integer matrix.
inline SparseInt coboundary_exact(const CellComplex& cx, int k)
{
    if (k < 0 || k >= cx.dim)
        throw InvalidInput("exterior_core", "coboundary", "degree " + std::to_string(k) + " out of range [0, "
                           + std::to_string(cx.dim) + ")");
    return SparseInt(cx.boundary[static_cast<std::size_t>(k + 1)].transpose());
}

inline GradedOperator coboundary(const CellComplex& cx, int k)
{
    return {k, +1, detail::to_real(coboundary_exact(cx, k))};
}

namespace detail_ext {

inline SparseReal dense_to_sparse(const Eigen::MatrixXd& m, double drop = 0.0)
{
    SparseReal s = m.sparseView(1.0, drop);
    s.makeCompressed();
    return s;
}

inline SparseReal mass_inverse_times(const InnerProductFamily& ip, int k, const SparseReal& x)
{
    if (ip.is_dense())
    {
        Eigen::LLT<Eigen::MatrixXd> llt(ip.dense[static_cast<std::size_t>(k)]);
        return dense_to_sparse(llt.solve(Eigen::MatrixXd(x)));
    }
    return detail::sparse_diagonal(ip.diagonal[static_cast<std::size_t>(k)].cwiseInverse()) * x;
}

inline SparseReal mass_times(const InnerProductFamily& ip, int k, const SparseReal& x)
{
    if (ip.is_dense())
        return dense_to_sparse(ip.dense[static_cast<std::size_t>(k)] * Eigen::MatrixXd(x));
    return detail::sparse_diagonal(ip.diagonal[static_cast<std::size_t>(k)]) * x;
}

}   // namespace detail_ext

/**
 * Adjoint of d_{k-1} with respect to the mass matrices,
 * delta_k = M_{k-1}^{-1} d_{k-1}^T M_k.
 */
inline GradedOperator codifferential(const CellComplex& cx, const InnerProductFamily& ip, int k)
{
    if (k < 1 || k > cx.dim)
        throw InvalidInput("exterior_core", "codifferential", "degree " + std::to_string(k) + " out of range [1, "
                           + std::to_string(cx.dim) + "]");
    ip.validate(cx);
    SparseReal dt = SparseReal(coboundary(cx, k - 1).matrix.transpose());
    SparseReal m_dt_mk = detail_ext::mass_inverse_times(ip, k - 1, SparseReal(dt * detail_ext::mass_times(ip, k, [&] {
        SparseReal id(cx.count(k), cx.count(k));
        id.setIdentity();
        return id;
    }())));
    return {k, -1, m_dt_mk};
}

/// Delta_k = delta_{k+1} d_k + d_{k-1} delta_k, omitting terms outside [0, n].
inline GradedOperator hodge_laplacian(const CellComplex& cx, const InnerProductFamily& ip, int k)
{
    if (k < 0 || k > cx.dim)
        throw InvalidInput("exterior_core", "hodge_laplacian", "degree " + std::to_string(k) + " out of range");
    ip.validate(cx);
    SparseReal lap(cx.count(k), cx.count(k));
    if (k < cx.dim)
        lap += codifferential(cx, ip, k + 1).matrix * coboundary(cx, k).matrix;
    if (k > 0)
        lap += coboundary(cx, k - 1).matrix * codifferential(cx, ip, k).matrix;
    lap.makeCompressed();
    return {k, 0, lap};
}

/**
 * Whitening factor F_k with <x, y>_{M_k} = (F_k x) . (F_k y): sqrt of the
 * diagonal for lumped masses, the transposed Cholesky factor otherwise.
 */
struct Whitening
{
    Eigen::MatrixXd upper;      // dense case
    Eigen::VectorXd sqrt_diag;  // lumped case

    bool dense() const { return upper.size() > 0; }

    static Whitening of(const InnerProductFamily& ip, int k)
    {
        Whitening w;
        if (ip.is_dense())
        {
            Eigen::LLT<Eigen::MatrixXd> llt(ip.dense[static_cast<std::size_t>(k)]);
            w.upper = llt.matrixU();
        }
        else
            w.sqrt_diag = ip.diagonal[static_cast<std::size_t>(k)].cwiseSqrt();
        return w;
    }

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const
    {
        return dense() ? Eigen::VectorXd(upper * x) : Eigen::VectorXd(sqrt_diag.cwiseProduct(x));
    }

    Eigen::VectorXd inverse(const Eigen::VectorXd& y) const
    {
        return dense() ? Eigen::VectorXd(upper.triangularView<Eigen::Upper>().solve(y))
                       : Eigen::VectorXd(y.cwiseQuotient(sqrt_diag));
    }

    /// F * A
    SparseReal left(const SparseReal& a) const
    {
        if (dense())
            return detail_ext::dense_to_sparse(upper * Eigen::MatrixXd(a));
        return detail::sparse_diagonal(sqrt_diag) * a;
    }

    /// A * F^{-1}
    SparseReal right_inverse(const SparseReal& a) const
    {
        if (dense())
        {
            Eigen::MatrixXd at = Eigen::MatrixXd(a).transpose();
            Eigen::MatrixXd solved = upper.transpose().triangularView<Eigen::Lower>().solve(at);
            return detail_ext::dense_to_sparse(solved.transpose());
        }
        return a * detail::sparse_diagonal(sqrt_diag.cwiseInverse());
    }
};

/// F_{k+1} D F_k^{-1} for an operator D from degree k to degree k+1.
inline SparseReal whitened(const SparseReal& d, const Whitening& from, const Whitening& to)
{
    return from.right_inverse(to.left(d));
}

/**
 * Symmetric form S_k = F_k Delta_k F_k^{-1} of the Hodge Laplacian, built
 * from whitened coboundaries as B^T B + C C^T. Same spectrum as Delta_k.
 */
inline SparseReal symmetric_laplacian(const std::vector<SparseReal>& d, const InnerProductFamily& ip,
                                      int k, int dim)
{
    const Whitening wk = Whitening::of(ip, k);
    SparseReal s;
    bool set = false;
    if (k < dim)
    {
        SparseReal b = whitened(d[static_cast<std::size_t>(k)], wk, Whitening::of(ip, k + 1));
        s = SparseReal(b.transpose()) * b;
        set = true;
    }
    if (k > 0)
    {
        SparseReal c = whitened(d[static_cast<std::size_t>(k - 1)], Whitening::of(ip, k - 1), wk);
        SparseReal cc = c * SparseReal(c.transpose());
        if (set)
            s += cc;
        else
            s = cc;
        set = true;
    }
    if (!set)
    {
        // dimension-0 complex: Laplacian is zero
        s = SparseReal(d.empty() ? 0 : 0, 0);
    }
    s.makeCompressed();
    return s;
}

inline std::vector<SparseReal> coboundaries(const CellComplex& cx)
{
    std::vector<SparseReal> d;
    for (int k = 0; k < cx.dim; ++k)
        d.push_back(coboundary(cx, k).matrix);
    return d;
}

inline SparseReal symmetric_laplacian(const CellComplex& cx, const InnerProductFamily& ip, int k)
{
    ip.validate(cx);
    if (cx.dim == 0)
        return SparseReal(cx.count(0), cx.count(0));
    return symmetric_laplacian(coboundaries(cx), ip, k, cx.dim);
}

/// Betti numbers from exact integer ranks of the incidence matrices.
inline std::vector<long> betti_numbers(const CellComplex& cx)
{
    std::vector<long> rank(static_cast<std::size_t>(cx.dim + 2), 0);
    for (int k = 1; k <= cx.dim; ++k)
        rank[static_cast<std::size_t>(k)] = detail::integer_rank(cx.boundary[static_cast<std::size_t>(k)]);
    std::vector<long> betti;
    for (int k = 0; k <= cx.dim; ++k)
        betti.push_back(cx.count(k) - rank[static_cast<std::size_t>(k)] - rank[static_cast<std::size_t>(k + 1)]);
    return betti;
}

/// chi from cell counts, cross-checked against the alternating Betti sum.
inline long euler_characteristic(const CellComplex& cx, const std::vector<long>* betti = nullptr)
{
    long chi = 0, chi_b = 0;
    const std::vector<long> b = betti ? *betti : betti_numbers(cx);
    for (int k = 0; k <= cx.dim; ++k)
    {
        const long sign = (k % 2 == 0) ? 1 : -1;
        chi += sign * cx.count(k);
        chi_b += sign * b[static_cast<std::size_t>(k)];
    }
    if (chi != chi_b)
        throw InvalidInput("exterior_core", "euler_characteristic",
                           "cell-count chi " + std::to_string(chi) + " differs from Betti chi "
                           + std::to_string(chi_b) + ": broken complex");
    return chi;
}

/**
 * Number of eigenvalues of Delta_k below rel_threshold * lambda_max.
 */
inline long kernel_dimension(const SparseReal& symmetric, double rel_threshold = 1e-8)
{
    if (symmetric.rows() == 0)
        return 0;
    const double lmax = detail::largest_eigenvalue(symmetric);
    if (lmax <= 0.0)
        return symmetric.rows();
    auto below = detail::eigenpairs_below(symmetric, rel_threshold * lmax, 8);
    return below.below.values.size();
}

inline long kernel_dimension(const CellComplex& cx, const InnerProductFamily& ip, int k,
                             double rel_threshold = 1e-8)
{
    return kernel_dimension(symmetric_laplacian(cx, ip, k), rel_threshold);
}

struct HodgeParts
{
    Cochain harmonic;
    Cochain exact;
    Cochain coexact;
};

/**
 * Split omega into M-orthogonal harmonic, exact (image of d) and coexact
 * (image of delta) parts by least-squares projection in whitened
 * coordinates.
 */
inline HodgeParts hodge_decompose(const CellComplex& cx, const InnerProductFamily& ip, const Cochain& omega)
{
    const int k = omega.degree;
    if (k < 0 || k > cx.dim || omega.coeffs.size() != cx.count(k))
        throw InvalidInput("exterior_core", "hodge_decompose", "cochain degree/length invalid");
    ip.validate(cx);

    const Whitening wk = Whitening::of(ip, k);
    const Eigen::VectorXd y = wk.forward(omega.coeffs);
    Eigen::VectorXd exact_w = Eigen::VectorXd::Zero(y.size());
    Eigen::VectorXd coexact_w = Eigen::VectorXd::Zero(y.size());

    auto project = [](const Eigen::MatrixXd& basis, const Eigen::VectorXd& v) -> Eigen::VectorXd {
        if (basis.cols() == 0)
            return Eigen::VectorXd::Zero(v.size());
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(basis);
        cod.setThreshold(1e-12);
        return basis * cod.solve(v);
    };

    if (k > 0)
    {
        SparseReal c = whitened(coboundary(cx, k - 1).matrix, Whitening::of(ip, k - 1), wk);
        exact_w = project(Eigen::MatrixXd(c), y);
    }
    if (k < cx.dim)
    {
        SparseReal b = whitened(coboundary(cx, k).matrix, wk, Whitening::of(ip, k + 1));
        coexact_w = project(Eigen::MatrixXd(b.transpose()), y);
    }
    const Eigen::VectorXd harmonic_w = y - exact_w - coexact_w;
    return {{k, wk.inverse(harmonic_w)}, {k, wk.inverse(exact_w)}, {k, wk.inverse(coexact_w)}};
}

/** ------------------------------------------------------------------- //
 *                          COMPLEX CONSTRUCTION                        //
 *  ------------------------------------------------------------------- */

inline CellComplex point_complex()
{
    CellComplex cx;
    cx.dim = 0;
    cx.cells = {1};
    cx.boundary = {SparseInt(0, 1)};
    cx.orientation = {1};
    cx.kind = CellKind::Simplicial;
    return cx;
}

/// Cycle with n vertices and n edges, edge i = [v_i, v_{i+1}].
inline CellComplex circle_complex(int n)
{
    if (n < 2)
        throw InvalidInput("exterior_core", "circle_complex", "a circle needs at least 2 vertices");
    CellComplex cx;
    cx.dim = 1;
    cx.cells = {n, n};
    cx.boundary.push_back(SparseInt(0, n));
    SparseInt b(n, n);
    std::vector<Eigen::Triplet<int>> t;
    for (int i = 0; i < n; ++i)
    {
        t.emplace_back(i, i, -1);
        t.emplace_back((i + 1) % n, i, 1);
    }
    b.setFromTriplets(t.begin(), t.end());
    cx.boundary.push_back(b);
    cx.orientation.assign(static_cast<std::size_t>(n), 1);
    cx.kind = n >= 3 ? CellKind::Simplicial : CellKind::Cubical;
    return cx;
}

namespace detail_ext {

inline bool cubical_compatible(const CellComplex& cx)
{
    return cx.kind == CellKind::Cubical || (cx.kind == CellKind::Simplicial && cx.dim <= 1);
}

}   // namespace detail_ext

/**
 * Cellular product. Cells of degree k are the pairs (s, t) with
 * dim s + dim t = k, ordered by dim s, then s, then t. The boundary is
 * d(s x t) = ds x t + (-1)^{dim s} s x dt.
 */
inline CellComplex product_complex(const CellComplex& a, const CellComplex& b)
{
    a.validate();
    b.validate();
    CellComplex p;
    p.dim = a.dim + b.dim;
    p.cells.assign(static_cast<std::size_t>(p.dim + 1), 0);

    // offset[i][j] = first index of the (i, j) block among degree i+j cells
    std::vector<std::vector<long>> offset(static_cast<std::size_t>(a.dim + 1),
                                          std::vector<long>(static_cast<std::size_t>(b.dim + 1), 0));
    for (int k = 0; k <= p.dim; ++k)
    {
        long running = 0;
        for (int i = 0; i <= a.dim; ++i)
        {
            const int j = k - i;
            if (j < 0 || j > b.dim)
                continue;
            offset[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = running;
            running += a.count(i) * b.count(j);
        }
        p.cells[static_cast<std::size_t>(k)] = running;
    }

    auto index = [&](int i, long s, int j, long t) {
        return offset[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] + s * b.count(j) + t;
    };

    p.boundary.push_back(SparseInt(0, p.count(0)));
    for (int k = 1; k <= p.dim; ++k)
    {
        std::vector<Eigen::Triplet<int>> trip;
        for (int i = 0; i <= a.dim; ++i)
        {
            const int j = k - i;
            if (j < 0 || j > b.dim)
                continue;
            const int sign = (i % 2 == 0) ? 1 : -1;
            for (long s = 0; s < a.count(i); ++s)
                for (long t = 0; t < b.count(j); ++t)
                {
                    const long col = index(i, s, j, t);
                    if (i > 0)
                        for (SparseInt::InnerIterator it(a.boundary[static_cast<std::size_t>(i)], static_cast<int>(s)); it; ++it)
                            trip.emplace_back(static_cast<int>(index(i - 1, it.row(), j, t)), static_cast<int>(col), it.value());
                    if (j > 0)
                        for (SparseInt::InnerIterator it(b.boundary[static_cast<std::size_t>(j)], static_cast<int>(t)); it; ++it)
                            trip.emplace_back(static_cast<int>(index(i, s, j - 1, it.row())), static_cast<int>(col), sign * it.value());
                }
        }
        SparseInt m(p.count(k - 1), p.count(k));
        m.setFromTriplets(trip.begin(), trip.end());
        m.makeCompressed();
        p.boundary.push_back(m);
    }

    for (long s = 0; s < a.count(a.dim); ++s)
        for (long t = 0; t < b.count(b.dim); ++t)
        {
            const int oa = a.orientation.empty() ? 1 : a.orientation[static_cast<std::size_t>(s)];
            const int ob = b.orientation.empty() ? 1 : b.orientation[static_cast<std::size_t>(t)];
            p.orientation.push_back(oa * ob);
        }

    if (a.dim == 0)
        p.kind = b.kind;
    else if (b.dim == 0)
        p.kind = a.kind;
    else if (detail_ext::cubical_compatible(a) && detail_ext::cubical_compatible(b))
        p.kind = CellKind::Cubical;
    else
        p.kind = CellKind::General;
    return p;
}

/// circle^n as an iterated cellular product.
inline CellComplex torus_power(int n, int circle_vertices = 3)
{
    CellComplex t = point_complex();
    for (int i = 0; i < n; ++i)
        t = product_complex(t, circle_complex(circle_vertices));
    return t;
}

/** ------------------------------------------------------------------- //
 *                              JSON FORMAT                             //
 *  ------------------------------------------------------------------- */

/**
 * {"dim": n, "cells": [c0..cn], "boundary": [[[row, col, value], ...] for
 * k = 1..n], "masses": [diagonal of M_0, ..., diagonal of M_n]}, plus
 * "kind" and "orientation".
 */
inline nlohmann::json to_json(const CellComplex& cx, const InnerProductFamily* ip = nullptr)
{
    nlohmann::json j;
    j["dim"] = cx.dim;
    j["cells"] = cx.cells;
    nlohmann::json boundary = nlohmann::json::array();
    for (int k = 1; k <= cx.dim; ++k)
    {
        nlohmann::json trip = nlohmann::json::array();
        const auto& m = cx.boundary[static_cast<std::size_t>(k)];
        for (int c = 0; c < m.outerSize(); ++c)
            for (SparseInt::InnerIterator it(m, c); it; ++it)
                if (it.value() != 0)
                    trip.push_back({it.row(), it.col(), it.value()});
        boundary.push_back(trip);
    }
    j["boundary"] = boundary;
    if (ip != nullptr)
    {
        if (ip->is_dense())
            throw InvalidInput("exterior_core", "to_json", "only diagonal masses are serialisable");
        nlohmann::json masses = nlohmann::json::array();
        for (const auto& d : ip->diagonal)
            masses.push_back(std::vector<double>(d.data(), d.data() + d.size()));
        j["masses"] = masses;
    }
    j["kind"] = to_string(cx.kind);
    j["orientation"] = cx.orientation;
    return j;
}

struct ComplexWithMasses
{
    CellComplex complex;
    InnerProductFamily masses;
};

inline ComplexWithMasses from_json(const nlohmann::json& j)
{
    ComplexWithMasses out;
    auto& cx = out.complex;
    try
    {
        cx.dim = j.at("dim").get<int>();
        cx.cells = j.at("cells").get<std::vector<long>>();
        cx.kind = j.contains("kind") ? cell_kind_from_string(j["kind"].get<std::string>()) : CellKind::General;
        if (j.contains("orientation"))
            cx.orientation = j["orientation"].get<std::vector<int>>();
        const auto& boundary = j.at("boundary");
        if (cx.dim < 0 || cx.cells.size() != static_cast<std::size_t>(cx.dim + 1)
            || boundary.size() != static_cast<std::size_t>(cx.dim))
            throw InvalidInput("exterior_core", "from_json", "dim, cells and boundary lengths disagree");
        cx.boundary.push_back(SparseInt(0, cx.count(0)));
        for (int k = 1; k <= cx.dim; ++k)
        {
            std::vector<Eigen::Triplet<int>> trip;
            for (const auto& e : boundary[static_cast<std::size_t>(k - 1)])
            {
                const int r = e.at(0).get<int>(), c = e.at(1).get<int>(), v = e.at(2).get<int>();
                if (r < 0 || r >= cx.count(k - 1) || c < 0 || c >= cx.count(k))
                    throw InvalidInput("exterior_core", "from_json", "boundary triplet out of range");
                trip.emplace_back(r, c, v);
            }
            SparseInt m(cx.count(k - 1), cx.count(k));
            m.setFromTriplets(trip.begin(), trip.end());
            cx.boundary.push_back(m);
        }
        if (j.contains("masses"))
        {
            for (const auto& d : j["masses"])
            {
                auto v = d.get<std::vector<double>>();
                out.masses.diagonal.push_back(Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
            }
        }
        else
            out.masses = InnerProductFamily::identity(cx);
    }
    catch (const nlohmann::json::exception& e)
    {
        throw InvalidInput("exterior_core", "from_json", e.what());
    }
    cx.validate();
    out.masses.validate(cx);
    return out;
}

}   // namespace witten::exterior
