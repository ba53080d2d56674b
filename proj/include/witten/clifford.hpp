#pragma once

/**
 * Clifford actions on the exterior algebra of R^n, the localisation
 * operator L of a nondegenerate linear vector field, its commuting
 * involutions eta_j, and fibrewise identities for the twisted signature
 * operator in dimension 4q+1.
 *
 * Basis of the exterior algebra: subsets of {0..n-1} ordered by degree,
 * then lexicographically. e^{i_1} ^ ... ^ e^{i_k} is stored as a bitmask.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "witten/detail/linalg.hpp"
#include "witten/errors.hpp"

namespace witten::clifford {

using FiberOperator = Eigen::MatrixXd;

inline constexpr int max_export_dimension = 12;
inline constexpr int max_dimension = 14;

/**
 * Ordered basis of the exterior algebra of R^n.
 */
class ExteriorBasis
{
    public:
        explicit ExteriorBasis(int n) : n_(n)
        {
            if (n < 1 || n > max_dimension)
                throw InvalidInput("clifford", "basis", "dimension " + std::to_string(n) + " out of range [1, "
                                   + std::to_string(max_dimension) + "]");
            const std::uint32_t size = 1u << n;
            masks_.resize(size);
            for (std::uint32_t m = 0; m < size; ++m)
                masks_[m] = m;
            std::sort(masks_.begin(), masks_.end(), [](std::uint32_t a, std::uint32_t b) {
                const int da = std::popcount(a), db = std::popcount(b);
                if (da != db)
                    return da < db;
                // lexicographic on the sorted index lists
                std::uint32_t x = a, y = b;
                while (x && y)
                {
                    const int ix = std::countr_zero(x), iy = std::countr_zero(y);
                    if (ix != iy)
                        return ix < iy;
                    x &= x - 1;
                    y &= y - 1;
                }
                return false;
            });
            position_.resize(size);
            for (std::uint32_t i = 0; i < size; ++i)
                position_[masks_[i]] = static_cast<int>(i);
        }

        int n() const { return n_; }
        int size() const { return static_cast<int>(masks_.size()); }
        std::uint32_t mask(int index) const { return masks_[static_cast<std::size_t>(index)]; }
        int index(std::uint32_t mask) const { return position_[mask]; }
        int degree(int index) const { return std::popcount(mask(index)); }
        bool even(int index) const { return degree(index) % 2 == 0; }

        std::vector<int> subset(int index) const
        {
            std::vector<int> out;
            for (std::uint32_t m = mask(index); m; m &= m - 1)
                out.push_back(std::countr_zero(m));
            return out;
        }

    private:
        int n_;
        std::vector<std::uint32_t> masks_;
        std::vector<int> position_;
};

/// (-1)^{number of occupied indices below i}
inline double wedge_sign(std::uint32_t mask, int i)
{
    return (std::popcount(mask & ((1u << i) - 1u)) % 2 == 0) ? 1.0 : -1.0;
}

/// Exterior multiplication by the dual of e_i.
inline FiberOperator wedge(const ExteriorBasis& basis, int i)
{
    FiberOperator m = FiberOperator::Zero(basis.size(), basis.size());
    for (int c = 0; c < basis.size(); ++c)
    {
        const std::uint32_t s = basis.mask(c);
        if (s & (1u << i))
            continue;
        m(basis.index(s | (1u << i)), c) = wedge_sign(s, i);
    }
    return m;
}

/// Interior multiplication by e_i (the transpose of wedge).
inline FiberOperator contraction(const ExteriorBasis& basis, int i)
{
    return wedge(basis, i).transpose();
}

namespace detail_cl {

inline void check_vector(const ExteriorBasis& basis, const Eigen::VectorXd& v, const char* op)
{
    if (v.size() != basis.n())
        throw InvalidInput("clifford", op, "vector has length " + std::to_string(v.size()) + ", expected "
                           + std::to_string(basis.n()));
}

inline FiberOperator combine(const ExteriorBasis& basis, const Eigen::VectorXd& v, double contraction_sign)
{
    FiberOperator m = FiberOperator::Zero(basis.size(), basis.size());
    for (int c = 0; c < basis.size(); ++c)
    {
        const std::uint32_t s = basis.mask(c);
        for (int i = 0; i < basis.n(); ++i)
        {
            if (v(i) == 0.0)
                continue;
            const std::uint32_t bit = 1u << i;
            if (s & bit)
                m(basis.index(s & ~bit), c) += contraction_sign * wedge_sign(s, i) * v(i);
            else
                m(basis.index(s | bit), c) += wedge_sign(s, i) * v(i);
        }
    }
    return m;
}

}   // namespace detail_cl

/// c(v) = v^ - i_v
inline FiberOperator clifford_c(const ExteriorBasis& basis, const Eigen::VectorXd& v)
{
    detail_cl::check_vector(basis, v, "clifford_c");
    return detail_cl::combine(basis, v, -1.0);
}

/// c^(v) = v^ + i_v
inline FiberOperator clifford_chat(const ExteriorBasis& basis, const Eigen::VectorXd& v)
{
    detail_cl::check_vector(basis, v, "clifford_chat");
    return detail_cl::combine(basis, v, +1.0);
}

inline Eigen::VectorXd unit(int n, int i)
{
    return Eigen::VectorXd::Unit(n, i);
}

/// +1 on even forms, -1 on odd forms.
inline FiberOperator parity_operator(const ExteriorBasis& basis)
{
    FiberOperator p = FiberOperator::Zero(basis.size(), basis.size());
    for (int i = 0; i < basis.size(); ++i)
        p(i, i) = basis.even(i) ? 1.0 : -1.0;
    return p;
}

/** ------------------------------------------------------------------- //
 *                       LOCAL MODEL AND OPERATOR L                     //
 *  ------------------------------------------------------------------- */

/**
 * Polar data of the linearisation A of a vector field at a zero, with
 * A = U W diag(s) W^T, U orthogonal and W a rotation.
 */
struct LocalModel
{
    Eigen::MatrixXd A;
    Eigen::VectorXd s;
    Eigen::MatrixXd U;
    Eigen::MatrixXd W;

    int n() const { return static_cast<int>(A.rows()); }

    double reconstruction_residual() const
    {
        return (U * W * s.asDiagonal() * W.transpose() - A).norm() / std::max(1.0, A.norm());
    }
};

inline LocalModel polar_decomposition(const Eigen::MatrixXd& a)
{
    if (a.rows() != a.cols() || a.rows() < 1)
        throw InvalidInput("clifford", "polar_decomposition", "A must be square and nonempty");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd s = svd.singularValues();
    if (!(s(s.size() - 1) > 1e-12 * std::max(1.0, s(0))))
        throw InvalidInput("clifford", "polar_decomposition", "A is singular (smallest singular value "
                           + std::to_string(s(s.size() - 1)) + ")");
    Eigen::MatrixXd p = svd.matrixU();
    Eigen::MatrixXd q = svd.matrixV();
    if (q.determinant() < 0)
    {
        const Eigen::Index last = q.cols() - 1;
        q.col(last) *= -1.0;
        p.col(last) *= -1.0;
    }
    LocalModel lm{a, s, p * q.transpose(), q};
    return lm;
}

/// L = (sum s_i) Id + sum_i c(e_i) c^(e_i A), with e_i A the i-th row of A.
inline FiberOperator build_L(const Eigen::MatrixXd& a)
{
    const LocalModel lm = polar_decomposition(a);
    const ExteriorBasis basis(lm.n());
    FiberOperator l = lm.s.sum() * FiberOperator::Identity(basis.size(), basis.size());
    for (int i = 0; i < lm.n(); ++i)
        l += clifford_c(basis, unit(lm.n(), i)) * clifford_chat(basis, a.row(i).transpose());
    return l;
}

/// eta_j = c(U w_j) c^(w_j) with w_j the j-th column of W.
inline std::vector<FiberOperator> eta_operators(const Eigen::MatrixXd& a)
{
    const LocalModel lm = polar_decomposition(a);
    const ExteriorBasis basis(lm.n());
    std::vector<FiberOperator> eta;
    for (int j = 0; j < lm.n(); ++j)
    {
        const Eigen::VectorXd w = lm.W.col(j);
        eta.push_back(clifford_c(basis, lm.U * w) * clifford_chat(basis, w));
    }
    return eta;
}

/// sum_j s_j (Id + eta_j)
inline FiberOperator L_from_eta(const Eigen::MatrixXd& a)
{
    const LocalModel lm = polar_decomposition(a);
    const auto eta = eta_operators(a);
    const int dim = 1 << lm.n();
    FiberOperator l = FiberOperator::Zero(dim, dim);
    for (int j = 0; j < lm.n(); ++j)
        l += lm.s(j) * (FiberOperator::Identity(dim, dim) + eta[static_cast<std::size_t>(j)]);
    return l;
}

enum class Parity { Even, Odd };

inline std::string to_string(Parity p) { return p == Parity::Even ? "even" : "odd"; }

struct KernelInfo
{
    int dim = 0;
    Parity parity = Parity::Even;
    Eigen::VectorXd kernel_vector;
    double lambda0 = 0.0;
    double lambda1 = 0.0;
};

/**
 * Kernel of L. Requires a clean one-dimensional kernel: |lambda_0| below
 * the threshold and lambda_1 at least 10x above it, and a kernel vector
 * of pure parity. Anything else raises NumericalError.
 */
inline KernelInfo kernel_parity(const Eigen::MatrixXd& a)
{
    const LocalModel lm = polar_decomposition(a);
    const ExteriorBasis basis(lm.n());
    const FiberOperator l = build_L(a);
    const auto es = detail::dense_symmetric_eigen(0.5 * (l + l.transpose()));
    const double scale = std::max(1.0, lm.s.sum());
    const double threshold = 1e-9 * scale;

    KernelInfo info;
    info.lambda0 = es.values(0);
    info.lambda1 = es.values.size() > 1 ? es.values(1) : std::numeric_limits<double>::infinity();
    if (std::abs(info.lambda0) > threshold || info.lambda1 < 10.0 * threshold)
        throw NumericalError("clifford", "kernel_parity",
                             "ambiguous kernel: lambda0=" + std::to_string(info.lambda0) + ", lambda1="
                             + std::to_string(info.lambda1) + ", threshold=" + std::to_string(threshold));
    info.dim = 1;
    Eigen::VectorXd v = es.vectors.col(0);
    double even_weight = 0.0;
    for (int i = 0; i < basis.size(); ++i)
        if (basis.even(i))
            even_weight += v(i) * v(i);
    if (even_weight > 1.0 - 1e-8)
        info.parity = Parity::Even;
    else if (even_weight < 1e-8)
        info.parity = Parity::Odd;
    else
        throw NumericalError("clifford", "kernel_parity", "kernel vector has mixed parity (even weight "
                             + std::to_string(even_weight) + ")");
    // deterministic sign: largest-magnitude coefficient positive
    Eigen::Index big;
    v.cwiseAbs().maxCoeff(&big);
    if (v(big) < 0)
        v = -v;
    info.kernel_vector = v / v.norm();
    return info;
}

/** ------------------------------------------------------------------- //
 *                    SIGNATURE OPERATOR FIBRE CHECKS                   //
 *  ------------------------------------------------------------------- */

struct SignatureFiberReport
{
    int n = 0;
    /// max_j || P_j (x) K + (P_j (x) K)^T || with P_j = vol^ c(e_j), K a skew difference stencil
    double sig_symbol_skew_residual = 0.0;
    /// || c^(V)c^(X) + (c^(V)c^(X))^T ||, the deformation term must be skew
    double deformation_skew_residual = 0.0;
    /// || (c^(V)c^(X))^2 + Id ||
    double complex_structure_residual = 0.0;
    /// lowest eigenvalue mu of the curvature term Q
    double curvature_min_eigenvalue = 0.0;
    /// smallest eigenvalue of tQ + t^2 Id at the requested t
    double min_eigenvalue_at_t = 0.0;
    /// tQ + t^2 Id is positive definite for all t > t0
    double t0 = 0.0;
    double verified_t = 0.0;
    double min_eigenvalue_at_verified_t = 0.0;
    bool positive_at_verified_t = false;
};

/// Periodic centred first difference on `points` nodes: a skew-symmetric matrix.
inline Eigen::MatrixXd skew_difference_stencil(int points)
{
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(points, points);
    for (int i = 0; i < points; ++i)
    {
        k(i, (i + 1) % points) += 0.5;
        k(i, (i + points - 1) % points) -= 0.5;
    }
    return k;
}

/// The curvature term sum_i (c(e_i) c^(G_i) - <G_i, V> c(e_i) c^(V)), G_i = column i of gradX.
inline FiberOperator curvature_term(const ExteriorBasis& basis, const Eigen::VectorXd& v,
                                    const Eigen::MatrixXd& grad_x)
{
    const int n = basis.n();
    FiberOperator q = FiberOperator::Zero(basis.size(), basis.size());
    const FiberOperator chat_v = clifford_chat(basis, v);
    for (int i = 0; i < n; ++i)
    {
        const Eigen::VectorXd g = grad_x.col(i);
        const FiberOperator ci = clifford_c(basis, unit(n, i));
        q += ci * clifford_chat(basis, g) - g.dot(v) * ci * chat_v;
    }
    return q;
}

inline SignatureFiberReport signature_fiber_checks(int n, const Eigen::VectorXd& v, const Eigen::VectorXd& x,
                                                   const Eigen::MatrixXd& grad_x, double t)
{
    if (n < 1 || n % 4 != 1)
        throw InvalidInput("clifford", "signature_fiber_checks", "dimension must be 4q+1, got " + std::to_string(n));
    if (v.size() != n || x.size() != n || grad_x.rows() != n || grad_x.cols() != n)
        throw InvalidInput("clifford", "signature_fiber_checks", "V, X, gradX must have dimension n");
    if (std::abs(v.norm() - 1.0) > 1e-10 || std::abs(x.norm() - 1.0) > 1e-10 || std::abs(v.dot(x)) > 1e-10)
        throw InvalidInput("clifford", "signature_fiber_checks", "V and X must be orthonormal (|V|="
                           + std::to_string(v.norm()) + ", |X|=" + std::to_string(x.norm())
                           + ", <V,X>=" + std::to_string(v.dot(x)) + ")");

    const ExteriorBasis basis(n);
    const int dim = basis.size();
    SignatureFiberReport r;
    r.n = n;

    FiberOperator vol = FiberOperator::Identity(dim, dim);
    for (int i = 0; i < n; ++i)
        vol = vol * clifford_chat(basis, unit(n, i));
    const Eigen::MatrixXd stencil = skew_difference_stencil(7);
    for (int j = 0; j < n; ++j)
    {
        const FiberOperator pj = vol * clifford_c(basis, unit(n, j));
        Eigen::MatrixXd op(dim * stencil.rows(), dim * stencil.cols());
        for (Eigen::Index a = 0; a < stencil.rows(); ++a)
            for (Eigen::Index b = 0; b < stencil.cols(); ++b)
                op.block(a * dim, b * dim, dim, dim) = stencil(a, b) * pj;
        r.sig_symbol_skew_residual = std::max(r.sig_symbol_skew_residual, (op + op.transpose()).norm());
    }

    const FiberOperator j_op = clifford_chat(basis, v) * clifford_chat(basis, x);
    r.deformation_skew_residual = (j_op + j_op.transpose()).norm();
    r.complex_structure_residual = (j_op * j_op + FiberOperator::Identity(dim, dim)).norm();

    const FiberOperator q = curvature_term(basis, v, grad_x);
    const auto es = detail::dense_symmetric_eigen(0.5 * (q + q.transpose()));
    r.curvature_min_eigenvalue = es.values(0);
    auto min_at = [&](double tt) {
        return detail::dense_symmetric_eigen(0.5 * tt * (q + q.transpose())
                                             + tt * tt * FiberOperator::Identity(dim, dim)).values(0);
    };
    r.min_eigenvalue_at_t = min_at(t);
    r.t0 = std::max(0.0, -r.curvature_min_eigenvalue);
    r.verified_t = r.t0 > 0.0 ? 2.0 * r.t0 : 1.0;
    r.min_eigenvalue_at_verified_t = min_at(r.verified_t);
    r.positive_at_verified_t = r.min_eigenvalue_at_verified_t > 0.0;
    return r;
}

/** ------------------------------------------------------------------- //
 *                                EXPORT                                //
 *  ------------------------------------------------------------------- */

/// Dense row-major CSV, one matrix row per line.
inline void write_csv(std::ostream& out, const FiberOperator& m)
{
    const int size = static_cast<int>(m.rows());
    if (m.rows() != m.cols() || size < 2 || (size & (size - 1)) != 0)
        throw InvalidInput("clifford", "write_csv", "not a fibre operator shape");
    if (std::countr_zero(static_cast<unsigned>(size)) > max_export_dimension)
        throw InvalidInput("clifford", "write_csv", "export limited to n <= 12");
    const auto old_precision = out.precision(17);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
    {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
        {
            if (j)
                out << ',';
            out << m(i, j);
        }
        out << '\n';
    }
    out.precision(old_precision);
}

}   // namespace witten::clifford
