#pragma once

/**
 * Finite-difference model of the rescaled harmonic oscillator K_t on a box
 * [-R, R]^m with Dirichlet ends, and of the local model Laplacian
 * K_t (x) Id + t Id (x) L acting on exterior-algebra valued functions.
 *
 * Operators are stored sparse; the grid factor uses second-order central
 * differences.
 */

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "witten/clifford.hpp"
#include "witten/detail/linalg.hpp"
#include "witten/errors.hpp"

namespace witten::oscillator {

using detail::SparseReal;

struct GridSpec
{
    int m = 1;          // spatial dimension, 1 or 2
    double R = 8.0;     // half-width
    int N = 801;        // points per axis, odd

    double h() const { return 2.0 * R / (N - 1); }

    double coordinate(int i) const { return -R + i * h(); }

    long points() const { return m == 1 ? N : static_cast<long>(N) * N; }

    void validate() const
    {
        if (m != 1 && m != 2)
            throw InvalidInput("oscillator", "grid", "dimension must be 1 or 2");
        if (N < 51 || N % 2 == 0)
            throw InvalidInput("oscillator", "grid", "N must be odd and at least 51, got " + std::to_string(N));
        if (!(R > 0.0))
            throw InvalidInput("oscillator", "grid", "half-width must be positive");
    }
};

/// Half-width with Gaussian tail below 1e-8 for the slowest-decaying direction.
inline double recommended_half_width(double t, double smallest_singular_value = 1.0)
{
    return std::max(8.0 / std::sqrt(t * smallest_singular_value), 4.0);
}

struct ModelOperator
{
    SparseReal matrix;
    double t = 0.0;
    Eigen::MatrixXd A;
    GridSpec grid;
    int fiber_dim = 1;   // 1 for K_t, 2^n for the model Laplacian
};

namespace detail_osc {

inline SparseReal kron(const SparseReal& a, const SparseReal& b)
{
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
    for (int ca = 0; ca < a.outerSize(); ++ca)
        for (SparseReal::InnerIterator ia(a, ca); ia; ++ia)
            for (int cb = 0; cb < b.outerSize(); ++cb)
                for (SparseReal::InnerIterator ib(b, cb); ib; ++ib)
                    t.emplace_back(static_cast<int>(ia.row() * b.rows() + ib.row()),
                                   static_cast<int>(ia.col() * b.cols() + ib.col()), ia.value() * ib.value());
    SparseReal k(a.rows() * b.rows(), a.cols() * b.cols());
    k.setFromTriplets(t.begin(), t.end());
    return k;
}

inline SparseReal identity(long n)
{
    SparseReal id(n, n);
    id.setIdentity();
    return id;
}

/// -d^2/dy^2 with Dirichlet ends on N nodes.
inline SparseReal second_difference(const GridSpec& g)
{
    const double h2 = g.h() * g.h();
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < g.N; ++i)
    {
        t.emplace_back(i, i, 2.0 / h2);
        if (i > 0)
            t.emplace_back(i, i - 1, -1.0 / h2);
        if (i + 1 < g.N)
            t.emplace_back(i, i + 1, -1.0 / h2);
    }
    SparseReal d(g.N, g.N);
    d.setFromTriplets(t.begin(), t.end());
    return d;
}

inline void check_inputs(const Eigen::MatrixXd& a, double t, const GridSpec& g, const char* op)
{
    g.validate();
    if (a.rows() != a.cols() || a.rows() != g.m)
        throw InvalidInput("oscillator", op, "A must be " + std::to_string(g.m) + "x" + std::to_string(g.m));
    if (!(t > 0.0))
        throw InvalidInput("oscillator", op, "t must be positive");
    const double ht = g.h() * t;
    if (ht * ht > 0.5)
        throw InvalidInput("oscillator", op, "grid too coarse: h^2 t^2 = " + std::to_string(ht * ht)
                           + " > 0.5; increase N to at least " + std::to_string(static_cast<int>(std::ceil(2.0 * g.R * t / std::sqrt(0.5))) + 2));
}

/// Grid point coordinates for flat index p (x-major, y fastest).
inline Eigen::VectorXd point(const GridSpec& g, long p)
{
    Eigen::VectorXd y(g.m);
    if (g.m == 1)
        y(0) = g.coordinate(static_cast<int>(p));
    else
    {
        y(0) = g.coordinate(static_cast<int>(p / g.N));
        y(1) = g.coordinate(static_cast<int>(p % g.N));
    }
    return y;
}

}   // namespace detail_osc

/**
 * K_t = -sum d^2/dy_i^2 - t sum s_i + t^2 <y A A^T, y> with y a row vector.
 */
inline ModelOperator build_Kt(const Eigen::MatrixXd& a, double t, const GridSpec& grid)
{
    detail_osc::check_inputs(a, t, grid, "build_Kt");
    const auto lm = clifford::polar_decomposition(a);
    const SparseReal d2 = detail_osc::second_difference(grid);
    SparseReal lap = grid.m == 1 ? d2
                                 : SparseReal(detail_osc::kron(d2, detail_osc::identity(grid.N))
                                              + detail_osc::kron(detail_osc::identity(grid.N), d2));
    const Eigen::MatrixXd aat = a * a.transpose();
    const double shift = t * lm.s.sum();
    Eigen::VectorXd potential(grid.points());
    for (long p = 0; p < grid.points(); ++p)
    {
        const Eigen::VectorXd y = detail_osc::point(grid, p);
        potential(p) = t * t * y.dot(aat * y) - shift;
    }
    ModelOperator op;
    op.matrix = lap + detail::sparse_diagonal(potential);
    op.matrix.makeCompressed();
    op.t = t;
    op.A = a;
    op.grid = grid;
    return op;
}

/// K_t (x) Id + t Id (x) L, ordered grid-major with the fibre index fastest.
inline ModelOperator build_model_laplacian(const Eigen::MatrixXd& a, double t, const GridSpec& grid)
{
    ModelOperator kt = build_Kt(a, t, grid);
    const clifford::FiberOperator l = clifford::build_L(a);
    const long fiber = l.rows();
    SparseReal lsparse = l.sparseView(1.0, 1e-300);
    ModelOperator op;
    op.matrix = detail_osc::kron(kt.matrix, detail_osc::identity(fiber))
              + t * detail_osc::kron(detail_osc::identity(grid.points()), lsparse);
    op.matrix.makeCompressed();
    op.t = t;
    op.A = a;
    op.grid = grid;
    op.fiber_dim = static_cast<int>(fiber);
    return op;
}

/// Sampled ground state exp(-t y sqrt(A A^T) y^T / 2), unit l2 norm.
inline Eigen::VectorXd gaussian_ground_state(const Eigen::MatrixXd& a, double t, const GridSpec& grid)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a * a.transpose());
    const Eigen::MatrixXd root = es.operatorSqrt();
    Eigen::VectorXd g(grid.points());
    for (long p = 0; p < grid.points(); ++p)
    {
        const Eigen::VectorXd y = detail_osc::point(grid, p);
        g(p) = std::exp(-0.5 * t * y.dot(root * y));
    }
    return g / g.norm();
}

struct Spectrum
{
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};

inline Spectrum lowest_spectrum(const ModelOperator& op, int count)
{
    auto ep = detail::lowest_eigenpairs(op.matrix, count, 1e-10);
    return {ep.values, ep.vectors};
}

/**
 * Distance in l2 between the normalised ground vector and
 * gaussian (x) kernel(L), minimised over sign.
 */
inline double factorisation_error(const ModelOperator& op, const Eigen::VectorXd& ground)
{
    const Eigen::VectorXd g = gaussian_ground_state(op.A, op.t, op.grid);
    const Eigen::VectorXd k = clifford::kernel_parity(op.A).kernel_vector;
    Eigen::VectorXd prod(g.size() * k.size());
    for (Eigen::Index p = 0; p < g.size(); ++p)
        prod.segment(p * k.size(), k.size()) = g(p) * k;
    const Eigen::VectorXd v = ground / ground.norm();
    return std::min((v - prod).norm(), (v + prod).norm());
}

/// Even weight of the fibre part of a vector on the model Laplacian grid.
inline double fiber_even_weight(const ModelOperator& op, const Eigen::VectorXd& v)
{
    const clifford::ExteriorBasis basis(op.A.rows());
    double even = 0.0, total = v.squaredNorm();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (basis.even(static_cast<int>(i % op.fiber_dim)))
            even += v(i) * v(i);
    return even / total;
}

/// CSV rows "t,index,eigenvalue".
inline void write_spectrum_csv(std::ostream& out, double t, const Eigen::VectorXd& values, bool header = true)
{
    if (header)
        out << "t,index,eigenvalue\n";
    const auto old_precision = out.precision(17);
    for (Eigen::Index i = 0; i < values.size(); ++i)
        out << t << ',' << i << ',' << values(i) << '\n';
    out.precision(old_precision);
}

}   // namespace witten::oscillator
