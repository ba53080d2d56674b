#pragma once

/**
 * Witten deformation of a cochain complex by a vertex function f:
 * d_t = e^{-tf} d e^{tf} with f extended to k-cells by vertex averages,
 * the deformed Laplacian, low spectra and t-sweeps, Gaussian reference
 * states at critical points, projection residuals, the small (instanton)
 * complex spanned by low eigenvectors, and Morse inequality verdicts.
 */

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "witten/detail/linalg.hpp"
#include "witten/errors.hpp"
#include "witten/exterior_core.hpp"
#include "witten/geometry.hpp"

namespace witten::deformation {

using detail::SparseReal;
using exterior::CellComplex;
using exterior::InnerProductFamily;

inline constexpr double max_exponent = 300.0;

/// Vertex sets of every cell, degree by degree, read off the boundary matrices.
inline std::vector<std::vector<std::vector<int>>> cell_vertices(const CellComplex& cx)
{
    std::vector<std::vector<std::vector<int>>> out(static_cast<std::size_t>(cx.dim + 1));
    for (long v = 0; v < cx.count(0); ++v)
        out[0].push_back({static_cast<int>(v)});
    for (int k = 1; k <= cx.dim; ++k)
    {
        const auto& b = cx.boundary[static_cast<std::size_t>(k)];
        auto& cur = out[static_cast<std::size_t>(k)];
        cur.resize(static_cast<std::size_t>(cx.count(k)));
        for (int c = 0; c < b.outerSize(); ++c)
        {
            std::set<int> verts;
            for (exterior::SparseInt::InnerIterator it(b, c); it; ++it)
                for (int v : out[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(it.row())])
                    verts.insert(v);
            cur[static_cast<std::size_t>(c)].assign(verts.begin(), verts.end());
        }
    }
    return out;
}

/**
 * Weights w_sigma = exp(t f(sigma)), stored as exponents t f(sigma) after
 * f has been recentred to mean zero.
 */
struct DeformationWeights
{
    double t = 0.0;
    double shift = 0.0;                  // mean subtracted from the vertex values
    std::vector<Eigen::VectorXd> cell_values;   // recentred f(sigma) per degree

    Eigen::VectorXd weights(int k) const
    {
        return (t * cell_values.at(static_cast<std::size_t>(k))).array().exp();
    }
};

struct DeformedComplex
{
    const CellComplex* base = nullptr;
    const InnerProductFamily* masses = nullptr;
    DeformationWeights weights;
    std::vector<SparseReal> d;   // d_t in degrees 0..n-1

    double t() const { return weights.t; }
    int dim() const { return base->dim; }

    /// Symmetric form F Delta_t F^{-1} with F the mass whitening.
    SparseReal symmetric_laplacian(int k) const
    {
        if (k < 0 || k > dim())
            throw InvalidInput("witten", "laplacian", "degree " + std::to_string(k) + " out of range");
        if (dim() == 0)
            return SparseReal(base->count(0), base->count(0));
        return exterior::symmetric_laplacian(d, *masses, k, dim());
    }

    /// delta_t in degree k (maps k-cochains to (k-1)-cochains).
    SparseReal codifferential(int k) const
    {
        const SparseReal dt = SparseReal(d[static_cast<std::size_t>(k - 1)].transpose());
        if (masses->is_dense())
        {
            Eigen::MatrixXd m = masses->matrix(k - 1).llt().solve(Eigen::MatrixXd(dt) * masses->matrix(k));
            return m.sparseView();
        }
        return detail::sparse_diagonal(masses->diagonal[static_cast<std::size_t>(k - 1)].cwiseInverse()) * dt
             * detail::sparse_diagonal(masses->diagonal[static_cast<std::size_t>(k)]);
    }

    /// Delta_t = delta_t d_t + d_t delta_t in degree k.
    SparseReal laplacian(int k) const
    {
        SparseReal lap(base->count(k), base->count(k));
        if (k < dim())
            lap += codifferential(k + 1) * d[static_cast<std::size_t>(k)];
        if (k > 0)
            lap += d[static_cast<std::size_t>(k - 1)] * codifferential(k);
        return lap;
    }

    /// max_k ||d_{k+1} d_k|| / (||d_{k+1}|| ||d_k||)
    double dd_residual() const
    {
        double worst = 0.0;
        for (int k = 0; k + 1 < dim(); ++k)
        {
            const SparseReal dd = d[static_cast<std::size_t>(k + 1)] * d[static_cast<std::size_t>(k)];
            const double scale = d[static_cast<std::size_t>(k + 1)].norm() * d[static_cast<std::size_t>(k)].norm();
            if (scale > 0.0)
                worst = std::max(worst, dd.norm() / scale);
        }
        return worst;
    }
};

/**
 * Conjugate the coboundary by the diagonal weights exp(t f(sigma)). f is
 * recentred to mean zero first; exponents beyond 300 in magnitude raise
 * OverflowError.
 */
inline DeformedComplex deform(const CellComplex& cx, const InnerProductFamily& ip, const Eigen::VectorXd& f_vertex,
                              double t)
{
    if (!(t >= 0.0))
        throw InvalidInput("witten", "deform", "t must be nonnegative");
    if (f_vertex.size() != cx.count(0))
        throw InvalidInput("witten", "deform", "one value per vertex required");
    ip.validate(cx);

    DeformedComplex dc;
    dc.base = &cx;
    dc.masses = &ip;
    dc.weights.t = t;
    dc.weights.shift = f_vertex.mean();
    const Eigen::VectorXd f = f_vertex.array() - dc.weights.shift;

    const auto verts = cell_vertices(cx);
    for (int k = 0; k <= cx.dim; ++k)
    {
        Eigen::VectorXd v(cx.count(k));
        for (long c = 0; c < cx.count(k); ++c)
        {
            double s = 0.0;
            const auto& vs = verts[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];
            for (int x : vs)
                s += f(x);
            v(c) = s / static_cast<double>(vs.size());
        }
        if (v.size() > 0 && t * v.cwiseAbs().maxCoeff() > max_exponent)
            throw OverflowError("witten", "deform", "t * f reaches " + std::to_string(t * v.cwiseAbs().maxCoeff())
                                + " after recentring; rescale f or reduce t");
        dc.weights.cell_values.push_back(v);
    }

    for (int k = 0; k < cx.dim; ++k)
    {
        SparseReal dk = exterior::coboundary(cx, k).matrix;
        const auto& fk = dc.weights.cell_values[static_cast<std::size_t>(k)];
        const auto& fk1 = dc.weights.cell_values[static_cast<std::size_t>(k + 1)];
        for (int c = 0; c < dk.outerSize(); ++c)
            for (SparseReal::InnerIterator it(dk, c); it; ++it)
                it.valueRef() *= std::exp(t * (fk(it.col()) - fk1(it.row())));
        dc.d.push_back(dk);
    }
    return dc;
}

/** ------------------------------------------------------------------- //
 *                                SPECTRA                               //
 *  ------------------------------------------------------------------- */

struct SpectrumEntry
{
    int degree = 0;
    double t = 0.0;
    double cutoff = 0.0;
    Eigen::VectorXd values;        // ascending, all <= cutoff
    Eigen::MatrixXd vectors;       // M-orthonormal eigenvectors of Delta_t
    double next_above = std::numeric_limits<double>::infinity();
    long count() const { return values.size(); }
};

namespace detail_def {

inline Eigen::MatrixXd unwhiten(const InnerProductFamily& ip, int k, const Eigen::MatrixXd& y)
{
    const auto w = exterior::Whitening::of(ip, k);
    Eigen::MatrixXd v(y.rows(), y.cols());
    for (Eigen::Index j = 0; j < y.cols(); ++j)
        v.col(j) = w.inverse(y.col(j));
    return v;
}

}   // namespace detail_def

/// Eigenpairs of Delta_t at a degree with eigenvalue <= c.
inline SpectrumEntry low_spectrum(const DeformedComplex& dc, int degree, double c)
{
    if (!(c > 0.0))
        throw InvalidInput("witten", "low_spectrum", "cutoff must be positive");
    const SparseReal s = dc.symmetric_laplacian(degree);
    SpectrumEntry e;
    e.degree = degree;
    e.t = dc.t();
    e.cutoff = c;
    if (s.rows() == 0)
        return e;
    auto below = detail::eigenpairs_below(s, c, 8);
    e.values = below.below.values;
    e.vectors = detail_def::unwhiten(*dc.masses, degree, below.below.vectors);
    e.next_above = below.next_above;
    return e;
}

/// Lowest `count` eigenvalues of Delta_t at a degree.
inline Eigen::VectorXd lowest_eigenvalues(const DeformedComplex& dc, int degree, int count)
{
    const SparseReal s = dc.symmetric_laplacian(degree);
    return detail::lowest_eigenpairs(s, std::min<int>(count, static_cast<int>(s.rows()))).values;
}

/// dim ker Delta_t: eigenvalues below rel * lambda_max.
inline long kernel_dimension(const DeformedComplex& dc, int degree, double rel = 1e-8)
{
    return exterior::kernel_dimension(dc.symmetric_laplacian(degree), rel);
}

/// CSV rows "scenario,degree,t,eigen_index,eigenvalue".
inline void write_spectrum_csv(std::ostream& out, const std::string& scenario, int degree, double t,
                               const Eigen::VectorXd& values)
{
    const auto old = out.precision(12);
    for (Eigen::Index i = 0; i < values.size(); ++i)
        out << scenario << ',' << degree << ',' << t << ',' << i << ',' << values(i) << '\n';
    out.precision(old);
}

/**
 * Cutoff at the midpoint of the largest relative jump in a sorted
 * spectrum (eigenvalues below `floor` count as zero).
 */
inline double auto_cutoff(std::vector<double> values, double floor = 1e-12)
{
    std::sort(values.begin(), values.end());
    if (values.size() < 2)
        throw InvalidInput("witten", "auto_cutoff", "need at least two eigenvalues");
    double best = -1.0, cutoff = 0.0;
    for (std::size_t i = 0; i + 1 < values.size(); ++i)
    {
        const double ratio = values[i + 1] / std::max(values[i], floor);
        if (ratio > best)
        {
            best = ratio;
            cutoff = 0.5 * (std::max(values[i], 0.0) + values[i + 1]);
        }
    }
    return cutoff;
}

/** ------------------------------------------------------------------- //
 *                            t-WINDOW SWEEP                            //
 *  ------------------------------------------------------------------- */

struct SweepRow
{
    double t = 0.0;
    std::vector<long> counts;
    std::vector<double> next_above;
    std::vector<Eigen::VectorXd> low_values;
};

struct Window
{
    bool found = false;
    double t_min = 0.0;
    double t_max = 0.0;
    double span() const { return found && t_min > 0.0 ? t_max / t_min : 0.0; }
};

/// Counts of eigenvalues <= c per degree at each t.
inline std::vector<SweepRow> sweep(const CellComplex& cx, const InnerProductFamily& ip, const Eigen::VectorXd& f,
                                   const std::vector<double>& ts, double c)
{
    std::vector<SweepRow> rows;
    for (double t : ts)
    {
        const auto dc = deform(cx, ip, f, t);
        SweepRow row;
        row.t = t;
        for (int k = 0; k <= cx.dim; ++k)
        {
            const auto e = low_spectrum(dc, k, c);
            row.counts.push_back(e.count());
            row.next_above.push_back(e.next_above);
            row.low_values.push_back(e.values);
        }
        rows.push_back(row);
    }
    return rows;
}

/// Longest contiguous run of the sweep whose counts equal `target`.
inline Window count_window(const std::vector<SweepRow>& rows, const std::vector<long>& target)
{
    Window best;
    std::size_t i = 0;
    while (i < rows.size())
    {
        if (rows[i].counts != target)
        {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < rows.size() && rows[j + 1].counts == target)
            ++j;
        Window w{true, rows[i].t, rows[j].t};
        if (!best.found || w.span() > best.span() || (w.span() == best.span() && w.t_max - w.t_min > best.t_max - best.t_min))
            best = w;
        i = j + 1;
    }
    return best;
}

/** ------------------------------------------------------------------- //
 *                           LOCALIZED STATES                           //
 *  ------------------------------------------------------------------- */

struct LocalizedState
{
    int degree = 0;
    int centre_vertex = 0;
    int radius = 0;
    Eigen::VectorXd coeffs;     // unit M-norm
    std::vector<int> support;   // cells with nonzero coefficient
};

namespace detail_def {

/// Coordinates of a point in the orthonormal Hessian frame at p (tangent-plane projection).
inline Eigen::Vector2d local_coordinates(const geometry::ParamSurface& s, const geometry::CriticalPoint& p,
                                         const geometry::Mesh& m, int vertex)
{
    const auto& q = m.params[static_cast<std::size_t>(vertex)];
    Eigen::Vector2d y;
    if (s.kind() == geometry::SurfaceKind::FlatTorus)
    {
        const Eigen::Vector2d du(geometry::wrap_angle(q.u(0) - p.where.u(0)), geometry::wrap_angle(q.u(1) - p.where.u(1)));
        y = p.frame.inverse() * du;
    }
    else
    {
        const Eigen::Matrix<double, 3, 2> axes = s.tangent(p.where) * p.frame;
        y = axes.transpose() * (m.positions[static_cast<std::size_t>(vertex)] - p.position);
    }
    // components along the Hessian eigenvectors
    return p.hessian_eigenvectors.transpose() * y;
}

}   // namespace detail_def

enum class StateProfile
{
    /// exp(-t sum_i |lambda_i| y_i^2 / 2) from the Hessian at p
    Quadratic,
    /// the same Gaussian read off the sampled f through the conjugation weights
    Conjugated
};

/**
 * Localized reference state at a critical point p: a Gaussian in the
 * Hessian eigenframe times the representative of the kernel form (the
 * constant at index 0, the negative-eigenvector 1-form at index 1, the
 * area cochain at index 2). Cut off at `radius` graph hops from the vertex
 * nearest p and normalised in the mass inner product.
 *
 * With the Conjugated profile the Gaussian factor is exp(-t (f - f(p))) on
 * vertices, exp(t (f - f(p))) on triangles, and on edges
 * exp(-t (f_e - f(p))) times the difference of
 * h(y) = int_0^y exp(-t |lambda_neg| s^2) ds along the negative direction.
 * To second order at p this is the Quadratic profile.
 */
inline LocalizedState localized_state(const DeformedComplex& dc, const geometry::ParamSurface& s,
                                      const geometry::Mesh& m, const geometry::CriticalPoint& p, int radius,
                                      StateProfile profile = StateProfile::Conjugated)
{
    if (radius < 2)
        throw InvalidInput("witten", "localized_state", "radius must be at least 2 mesh cells");
    if (dc.base != &m.complex)
        throw InvalidInput("witten", "localized_state", "deformed complex was not built on this mesh");
    const double t = dc.t();
    LocalizedState st;
    st.degree = p.index;
    st.radius = radius;
    st.centre_vertex = m.nearest_vertex(p.position);
    const auto hops = m.hop_distances(st.centre_vertex);
    auto inside = [&](int v) {
        const int h = hops[static_cast<std::size_t>(v)];
        return h >= 0 && h <= radius;
    };
    const Eigen::Vector2d lam = p.hessian_eigenvalues.cwiseAbs();
    auto gauss = [&](const Eigen::Vector2d& y) {
        return std::exp(-0.5 * t * (lam(0) * y(0) * y(0) + lam(1) * y(1) * y(1)));
    };
    // recentred cell values of f, relative to f(p)
    const double fp = p.value - dc.weights.shift;
    auto rel = [&](int k, long cell) { return dc.weights.cell_values[static_cast<std::size_t>(k)](cell) - fp; };
    auto primitive = [&](double y) {
        const double a = std::sqrt(std::max(t * lam(0), 1e-300));
        return t > 0.0 ? 0.5 * std::sqrt(std::numbers::pi) / a * std::erf(a * y) : y;
    };

    st.coeffs = Eigen::VectorXd::Zero(m.complex.count(p.index));
    if (p.index == 0)
    {
        for (int v = 0; v < m.vertex_count(); ++v)
            if (inside(v))
                st.coeffs(v) = profile == StateProfile::Quadratic ? gauss(detail_def::local_coordinates(s, p, m, v))
                                                                  : std::exp(-t * rel(0, v));
    }
    else if (p.index == 1)
    {
        // eigenvalues ascending: component 0 is the negative direction
        for (std::size_t e = 0; e < m.edges.size(); ++e)
        {
            const auto& ed = m.edges[e];
            if (!inside(ed[0]) || !inside(ed[1]))
                continue;
            const Eigen::Vector2d a = detail_def::local_coordinates(s, p, m, ed[0]);
            const Eigen::Vector2d b = detail_def::local_coordinates(s, p, m, ed[1]);
            st.coeffs(static_cast<Eigen::Index>(e)) =
                profile == StateProfile::Quadratic
                    ? gauss(0.5 * (a + b)) * (b(0) - a(0))
                    : std::exp(-t * rel(1, static_cast<long>(e))) * (primitive(b(0)) - primitive(a(0)));
        }
    }
    else
    {
        for (std::size_t f = 0; f < m.triangles.size(); ++f)
        {
            const auto& tr = m.triangles[f];
            if (!inside(tr[0]) || !inside(tr[1]) || !inside(tr[2]))
                continue;
            double g;
            if (profile == StateProfile::Quadratic)
            {
                Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
                for (int v : tr)
                    centroid += detail_def::local_coordinates(s, p, m, v) / 3.0;
                g = gauss(centroid);
            }
            else
                g = std::exp(t * rel(2, static_cast<long>(f)));
            st.coeffs(static_cast<Eigen::Index>(f)) = g * m.areas[f];
        }
    }
    const double norm = dc.masses->norm(p.index, st.coeffs);
    if (!(norm > 0.0) || !std::isfinite(norm))
        throw NumericalError("witten", "localized_state", "state vanishes or overflows on its support");
    st.coeffs /= norm;
    for (Eigen::Index i = 0; i < st.coeffs.size(); ++i)
        if (st.coeffs(i) != 0.0)
            st.support.push_back(static_cast<int>(i));
    return st;
}

/// States for every critical point, shrinking the radius until supports of the same degree are disjoint.
inline std::vector<LocalizedState> localized_states(const DeformedComplex& dc, const geometry::ParamSurface& s,
                                                    const geometry::Mesh& m,
                                                    const std::vector<geometry::CriticalPoint>& cps, int radius,
                                                    std::vector<std::string>* warnings = nullptr,
                                                    StateProfile profile = StateProfile::Conjugated)
{
    for (int r = radius; r >= 2; --r)
    {
        std::vector<LocalizedState> states;
        for (const auto& p : cps)
            states.push_back(localized_state(dc, s, m, p, r, profile));
        bool overlap = false;
        for (std::size_t i = 0; i < states.size() && !overlap; ++i)
            for (std::size_t j = i + 1; j < states.size() && !overlap; ++j)
            {
                if (states[i].degree != states[j].degree)
                    continue;
                std::vector<int> common;
                std::set_intersection(states[i].support.begin(), states[i].support.end(), states[j].support.begin(),
                                      states[j].support.end(), std::back_inserter(common));
                overlap = !common.empty();
            }
        if (!overlap)
            return states;
        if (warnings)
            warnings->push_back("supports overlap at radius " + std::to_string(r) + "; reducing");
    }
    throw NumericalError("witten", "localized_states", "critical points too close for disjoint supports at radius 2");
}

/// ||P_c u - u|| in the mass norm, P_c the spectral projection onto eigenvalues <= c.
inline double projection_residual(const InnerProductFamily& ip, const SpectrumEntry& low, const LocalizedState& u)
{
    Eigen::VectorXd proj = Eigen::VectorXd::Zero(u.coeffs.size());
    const Eigen::VectorXd mu = ip.apply(u.degree, u.coeffs);
    for (Eigen::Index j = 0; j < low.vectors.cols(); ++j)
        proj += low.vectors.col(j) * low.vectors.col(j).dot(mu);
    return ip.norm(u.degree, proj - u.coeffs);
}

struct DecayRow
{
    double t = 0.0;
    std::vector<double> residuals;   // one per critical point
};

struct DecayTable
{
    std::vector<DecayRow> rows;
    std::vector<bool> monotone;          // per critical point, strictly decreasing over the rows
    std::vector<double> decay_order;     // fitted -slope of log residual vs log t
    std::vector<double> floor;           // smallest residual seen at the floor probes
    std::vector<std::string> warnings;
};

/**
 * Residuals ||P_c u_p - u_p|| along a list of t values, with the
 * discretisation floor estimated at the `floor_ts` probes.
 */
inline DecayTable projection_decay(const geometry::ParamSurface& s, const geometry::Mesh& m,
                                   const Eigen::VectorXd& f, const std::vector<geometry::CriticalPoint>& cps,
                                   double c, const std::vector<double>& ts, int radius,
                                   const std::vector<double>& floor_ts = {},
                                   StateProfile profile = StateProfile::Conjugated)
{
    DecayTable table;
    auto residuals_at = [&](double t) {
        const auto dc = deform(m.complex, m.masses, f, t);
        const auto states = localized_states(dc, s, m, cps, radius, &table.warnings, profile);
        std::vector<SpectrumEntry> low;
        for (int k = 0; k <= m.complex.dim; ++k)
            low.push_back(low_spectrum(dc, k, c));
        std::vector<double> out;
        for (const auto& st : states)
            out.push_back(projection_residual(m.masses, low[static_cast<std::size_t>(st.degree)], st));
        return out;
    };
    for (double t : ts)
        table.rows.push_back({t, residuals_at(t)});

    const std::size_t np = cps.size();
    table.floor.assign(np, std::numeric_limits<double>::infinity());
    for (double t : floor_ts)
    {
        const auto r = residuals_at(t);
        for (std::size_t i = 0; i < np; ++i)
            table.floor[i] = std::min(table.floor[i], r[i]);
    }
    for (std::size_t i = 0; i < np; ++i)
    {
        bool mono = true;
        for (std::size_t k = 1; k < table.rows.size(); ++k)
            mono &= table.rows[k].residuals[i] < table.rows[k - 1].residuals[i];
        table.monotone.push_back(mono);
        if (!mono)
            table.warnings.push_back("residual of critical point " + std::to_string(i)
                                     + " is not decreasing in t; mesh resolution may be insufficient");
        // least-squares slope in log-log
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double n = static_cast<double>(table.rows.size());
        for (const auto& row : table.rows)
        {
            const double x = std::log(row.t), y = std::log(std::max(row.residuals[i], 1e-300));
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double denom = n * sxx - sx * sx;
        table.decay_order.push_back(denom > 0 ? -(n * sxy - sx * sy) / denom : 0.0);
    }
    return table;
}

/**
 * Fraction of the mass of the low eigenvectors carried by cells within
 * `radius` hops of a critical vertex, averaged over the eigenvectors.
 */
inline double localization_mass(const geometry::Mesh& m, const InnerProductFamily& ip, const SpectrumEntry& low,
                                const std::vector<int>& centre_vertices, int radius)
{
    if (low.vectors.cols() == 0)
        return 1.0;
    std::vector<char> near(static_cast<std::size_t>(m.vertex_count()), 0);
    for (int c : centre_vertices)
    {
        const auto h = m.hop_distances(c);
        for (std::size_t v = 0; v < h.size(); ++v)
            if (h[v] >= 0 && h[v] <= radius)
                near[v] = 1;
    }
    const auto verts = cell_vertices(m.complex);
    Eigen::VectorXd mask(m.complex.count(low.degree));
    for (long c = 0; c < mask.size(); ++c)
    {
        bool all = true;
        for (int v : verts[static_cast<std::size_t>(low.degree)][static_cast<std::size_t>(c)])
            all &= near[static_cast<std::size_t>(v)] != 0;
        mask(c) = all ? 1.0 : 0.0;
    }
    double total = 0.0;
    for (Eigen::Index j = 0; j < low.vectors.cols(); ++j)
    {
        const Eigen::VectorXd v = low.vectors.col(j);
        total += ip.inner(low.degree, v.cwiseProduct(mask), v) / ip.inner(low.degree, v, v);
    }
    return total / static_cast<double>(low.vectors.cols());
}

/** ------------------------------------------------------------------- //
 *                    BLOCKS OF D = d_t + delta_t                       //
 *  ------------------------------------------------------------------- */

struct BlockNorms
{
    double d1 = 0.0;   // P D P
    double d2 = 0.0;   // P_perp D P (equal to the norm of its adjoint block P D P_perp)
};

/**
 * Norms of the blocks of D_t = d_t + delta_t relative to the span E of
 * the localized states (all degrees together, mass inner product).
 */
inline BlockNorms block_norms(const DeformedComplex& dc, const std::vector<LocalizedState>& states)
{
    const int n = dc.dim();
    std::vector<long> offset(static_cast<std::size_t>(n + 2), 0);
    for (int k = 0; k <= n; ++k)
        offset[static_cast<std::size_t>(k + 1)] = offset[static_cast<std::size_t>(k)] + dc.base->count(k);
    const long total = offset.back();
    const Eigen::Index q = static_cast<Eigen::Index>(states.size());

    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(total, q);
    for (Eigen::Index j = 0; j < q; ++j)
        u.block(offset[static_cast<std::size_t>(states[static_cast<std::size_t>(j)].degree)], j,
                states[static_cast<std::size_t>(j)].coeffs.size(), 1) = states[static_cast<std::size_t>(j)].coeffs;

    Eigen::MatrixXd du = Eigen::MatrixXd::Zero(total, q);
    for (Eigen::Index j = 0; j < q; ++j)
    {
        const auto& st = states[static_cast<std::size_t>(j)];
        const int k = st.degree;
        if (k < n)
            du.block(offset[static_cast<std::size_t>(k + 1)], j, dc.base->count(k + 1), 1) = dc.d[static_cast<std::size_t>(k)] * st.coeffs;
        if (k > 0)
            du.block(offset[static_cast<std::size_t>(k - 1)], j, dc.base->count(k - 1), 1) = dc.codifferential(k) * st.coeffs;
    }
    auto mass_apply = [&](const Eigen::MatrixXd& x) {
        Eigen::MatrixXd out(x.rows(), x.cols());
        for (int k = 0; k <= n; ++k)
        {
            const long o = offset[static_cast<std::size_t>(k)], len = dc.base->count(k);
            for (Eigen::Index j = 0; j < x.cols(); ++j)
                out.block(o, j, len, 1) = dc.masses->apply(k, x.block(o, j, len, 1));
        }
        return out;
    };
    BlockNorms b;
    if (q == 0)
        return b;
    // M-orthonormalise the states (their Gram matrix is the identity when supports are disjoint)
    const Eigen::MatrixXd gram = u.transpose() * mass_apply(u);
    const Eigen::MatrixXd g_half = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram).operatorInverseSqrt();
    const Eigen::MatrixXd qm = u * g_half;
    const Eigen::MatrixXd dq = du * g_half;
    const Eigen::MatrixXd inner = qm.transpose() * mass_apply(dq);
    b.d1 = Eigen::JacobiSVD<Eigen::MatrixXd>(inner).singularValues()(0);
    const Eigen::MatrixXd perp = dq - qm * inner;
    const Eigen::MatrixXd pg = perp.transpose() * mass_apply(perp);
    b.d2 = std::sqrt(std::max(0.0, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(pg).eigenvalues().maxCoeff()));
    return b;
}

/** ------------------------------------------------------------------- //
 *                           INSTANTON COMPLEX                          //
 *  ------------------------------------------------------------------- */

struct InstantonComplex
{
    double t = 0.0;
    double cutoff = 0.0;
    std::vector<Eigen::MatrixXd> bases;        // M-orthonormal eigenvectors per degree
    std::vector<Eigen::MatrixXd> differential; // induced d_t, degree k -> k+1
    std::vector<double> leakage;               // ||d_t V_k - V_{k+1} D_k|| / sqrt(c)
    std::vector<long> dims;
    std::vector<long> betti;
    long euler_characteristic() const
    {
        long chi = 0;
        for (std::size_t k = 0; k < dims.size(); ++k)
            chi += (k % 2 == 0 ? 1 : -1) * dims[k];
        return chi;
    }
};

/**
 * Subcomplex spanned by eigenvectors of Delta_t with eigenvalue <= c.
 * Requires a spectral gap: no eigenvalue in [c/2, 2c] at any degree.
 */
inline InstantonComplex instanton_complex(const DeformedComplex& dc, double c, double rank_rel = 1e-7)
{
    const int n = dc.dim();
    InstantonComplex ic;
    ic.t = dc.t();
    ic.cutoff = c;
    for (int k = 0; k <= n; ++k)
    {
        const auto e = low_spectrum(dc, k, 2.0 * c);
        long below = 0;
        for (Eigen::Index i = 0; i < e.values.size(); ++i)
        {
            if (e.values(i) >= 0.5 * c)
                throw NumericalError("witten", "instanton_complex",
                                     "eigenvalue " + std::to_string(e.values(i)) + " in [c/2, 2c] at degree "
                                     + std::to_string(k) + " (t=" + std::to_string(dc.t()) + ", c=" + std::to_string(c)
                                     + "); choose a different c or t");
            ++below;
        }
        ic.bases.push_back(e.vectors.leftCols(below));
        ic.dims.push_back(below);
    }
    const double tau = rank_rel * std::sqrt(c);
    std::vector<long> rank(static_cast<std::size_t>(n + 2), 0);   // rank[k] of the map into degree k
    for (int k = 0; k < n; ++k)
    {
        const auto& vk = ic.bases[static_cast<std::size_t>(k)];
        const auto& vk1 = ic.bases[static_cast<std::size_t>(k + 1)];
        Eigen::MatrixXd dv(dc.base->count(k + 1), vk.cols());
        for (Eigen::Index j = 0; j < vk.cols(); ++j)
            dv.col(j) = dc.d[static_cast<std::size_t>(k)] * vk.col(j);
        Eigen::MatrixXd mdv(dv.rows(), dv.cols());
        for (Eigen::Index j = 0; j < dv.cols(); ++j)
            mdv.col(j) = dc.masses->apply(k + 1, dv.col(j));
        const Eigen::MatrixXd dk = vk1.transpose() * mdv;
        ic.differential.push_back(dk);
        const Eigen::MatrixXd rest = dv - vk1 * dk;
        double leak = 0.0;
        for (Eigen::Index j = 0; j < rest.cols(); ++j)
            leak = std::max(leak, dc.masses->norm(k + 1, rest.col(j)));
        ic.leakage.push_back(leak / std::sqrt(c));
        long r = 0;
        if (dk.size() > 0)
        {
            const auto sv = Eigen::JacobiSVD<Eigen::MatrixXd>(dk).singularValues();
            for (Eigen::Index i = 0; i < sv.size(); ++i)
                r += sv(i) > tau;
        }
        rank[static_cast<std::size_t>(k + 1)] = r;
    }
    for (int k = 0; k <= n; ++k)
        ic.betti.push_back(ic.dims[static_cast<std::size_t>(k)] - rank[static_cast<std::size_t>(k)]
                           - rank[static_cast<std::size_t>(k + 1)]);
    return ic;
}

/** ------------------------------------------------------------------- //
 *                           MORSE INEQUALITIES                         //
 *  ------------------------------------------------------------------- */

struct MorseVerdicts
{
    bool weak = true;          // beta_i <= m_i for all i
    bool strong = true;        // partial alternating sums, k < n
    bool top_equality = true;  // full alternating sums agree
    std::vector<std::string> violations;
    bool all() const { return weak && strong && top_equality; }
};

inline MorseVerdicts morse_report(const std::vector<long>& m, const std::vector<long>& beta)
{
    if (m.size() != beta.size() || m.empty())
        throw InvalidInput("witten", "morse_report", "count lists must have equal nonzero length");
    MorseVerdicts v;
    const std::size_t n = m.size() - 1;
    for (std::size_t i = 0; i <= n; ++i)
        if (beta[i] > m[i])
        {
            v.weak = false;
            v.violations.push_back("weak inequality fails at degree " + std::to_string(i));
        }
    for (std::size_t k = 0; k <= n; ++k)
    {
        long sm = 0, sb = 0;
        for (std::size_t i = 0; i <= k; ++i)
        {
            const long sign = ((k - i) % 2 == 0) ? 1 : -1;
            sm += sign * m[i];
            sb += sign * beta[i];
        }
        if (k < n && sm < sb)
        {
            v.strong = false;
            v.violations.push_back("strong inequality fails at degree " + std::to_string(k));
        }
        if (k == n && sm != sb)
        {
            v.top_equality = false;
            v.violations.push_back("alternating sums differ: " + std::to_string(sm) + " vs " + std::to_string(sb));
        }
    }
    return v;
}

/// Morse counts m_i from critical point indices.
inline std::vector<long> morse_counts(const std::vector<geometry::CriticalPoint>& cps, int dim = 2)
{
    std::vector<long> m(static_cast<std::size_t>(dim + 1), 0);
    for (const auto& c : cps)
        ++m.at(static_cast<std::size_t>(c.index));
    return m;
}

}   // namespace witten::deformation
