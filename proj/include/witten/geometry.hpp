#pragma once

/**
 * Built-in parametrised surfaces (round sphere with two stereographic
 * charts, embedded torus of revolution, flat torus), closed-form scalar and
 * vector fields on them, Newton search for critical points and zeros, and
 * triangulations with lumped masses.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "witten/exterior_core.hpp"
#include "witten/errors.hpp"

namespace witten::geometry {

using Eigen::Matrix2d;
using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Tangent = Eigen::Matrix<double, 3, 2>;

constexpr double pi = std::numbers::pi;

struct ChartPoint
{
    int chart = 0;
    Vector2d u = Vector2d::Zero();
};

enum class SurfaceKind { Sphere, EmbeddedTorus, FlatTorus };

inline double wrap_angle(double a)
{
    a = std::remainder(a, 2.0 * pi);
    return a <= -pi ? a + 2.0 * pi : a;
}

/**
 * A closed oriented surface given by an atlas of oriented charts.
 *
 * Sphere: chart 0 is stereographic projection from the north pole
 * (covers the south pole at u = 0), chart 1 from the south pole. Both
 * are oriented by the outward normal.
 * Tori: one periodic chart (theta, phi) in (-pi, pi]^2; theta turns around
 * the x axis, phi around the tube.
 */
class ParamSurface
{
    public:
        static ParamSurface sphere() { return ParamSurface(SurfaceKind::Sphere, 0.0, 1.0); }
        static ParamSurface embedded_torus(double big = 2.0, double small = 1.0)
        {
            if (!(big > small && small > 0.0))
                throw InvalidInput("geometry", "embedded_torus", "need R > r > 0");
            return ParamSurface(SurfaceKind::EmbeddedTorus, big, small);
        }
        /// Flat metric on (theta, phi); positions use the standard embedding only for identification.
        static ParamSurface flat_torus() { return ParamSurface(SurfaceKind::FlatTorus, 2.0, 1.0); }

        SurfaceKind kind() const { return kind_; }
        bool is_torus() const { return kind_ != SurfaceKind::Sphere; }
        int chart_count() const { return kind_ == SurfaceKind::Sphere ? 2 : 1; }
        int euler_characteristic() const { return kind_ == SurfaceKind::Sphere ? 2 : 0; }
        double big_radius() const { return big_; }
        double small_radius() const { return small_; }

        std::string name() const
        {
            switch (kind_)
            {
                case SurfaceKind::Sphere: return "sphere";
                case SurfaceKind::EmbeddedTorus: return "torus";
                default: return "flat-torus";
            }
        }

        Vector3d position(const ChartPoint& p) const
        {
            if (kind_ == SurfaceKind::Sphere)
            {
                const auto [f, q] = sphere_numerator(p);
                return f / q;
            }
            const double th = p.u(0), ph = p.u(1);
            const double rho = big_ + small_ * std::cos(ph);
            return {small_ * std::sin(ph), rho * std::cos(th), rho * std::sin(th)};
        }

        /// Columns dX/du_1, dX/du_2.
        Tangent tangent(const ChartPoint& p) const
        {
            Tangent t;
            if (kind_ == SurfaceKind::Sphere)
            {
                const auto [f, q] = sphere_numerator(p);
                const Vector3d x = f / q;
                for (int a = 0; a < 2; ++a)
                    t.col(a) = (sphere_df(p, a) - x * 2.0 * p.u(a)) / q;
                return t;
            }
            const double th = p.u(0), ph = p.u(1);
            const double rho = big_ + small_ * std::cos(ph);
            t.col(0) = Vector3d(0.0, -rho * std::sin(th), rho * std::cos(th));
            t.col(1) = Vector3d(small_ * std::cos(ph), -small_ * std::sin(ph) * std::cos(th),
                                -small_ * std::sin(ph) * std::sin(th));
            return t;
        }

        /// Second derivatives d^2X/du_a du_b, indexed [a][b].
        std::array<std::array<Vector3d, 2>, 2> second(const ChartPoint& p) const
        {
            std::array<std::array<Vector3d, 2>, 2> s;
            if (kind_ == SurfaceKind::Sphere)
            {
                const auto [f, q] = sphere_numerator(p);
                const Vector3d x = f / q;
                const Tangent t = tangent(p);
                const double sigma = p.chart == 0 ? 1.0 : -1.0;
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b)
                    {
                        const double delta = a == b ? 1.0 : 0.0;
                        const Vector3d fab(0.0, 0.0, 2.0 * sigma * delta);
                        s[a][b] = (fab - t.col(b) * 2.0 * p.u(a) - x * 2.0 * delta - t.col(a) * 2.0 * p.u(b)) / q;
                    }
                return s;
            }
            const double th = p.u(0), ph = p.u(1);
            const double rho = big_ + small_ * std::cos(ph);
            const double sth = std::sin(th), cth = std::cos(th), sph = std::sin(ph), cph = std::cos(ph);
            s[0][0] = Vector3d(0.0, -rho * cth, -rho * sth);
            s[0][1] = s[1][0] = Vector3d(0.0, small_ * sph * sth, -small_ * sph * cth);
            s[1][1] = Vector3d(-small_ * sph, -small_ * cph * cth, -small_ * cph * sth);
            return s;
        }

        Matrix2d metric(const ChartPoint& p) const
        {
            if (kind_ == SurfaceKind::FlatTorus)
                return Matrix2d::Identity();
            const Tangent t = tangent(p);
            return t.transpose() * t;
        }

        /// d g / d u_c, indexed [c].
        std::array<Matrix2d, 2> metric_derivative(const ChartPoint& p) const
        {
            std::array<Matrix2d, 2> dg{Matrix2d::Zero(), Matrix2d::Zero()};
            if (kind_ == SurfaceKind::FlatTorus)
                return dg;
            const Tangent t = tangent(p);
            const auto s = second(p);
            for (int c = 0; c < 2; ++c)
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b)
                        dg[c](a, b) = s[a][c].dot(t.col(b)) + t.col(a).dot(s[b][c]);
            return dg;
        }

        /// Canonical chart point for an ambient position on (or near) the surface.
        ChartPoint locate(const Vector3d& x) const
        {
            if (kind_ == SurfaceKind::Sphere)
            {
                const Vector3d y = x / x.norm();
                if (y(2) <= 0.0)
                    return {0, Vector2d(y(0), -y(1)) / (1.0 - y(2))};
                return {1, Vector2d(y(0), y(1)) / (1.0 + y(2))};
            }
            const double rho = std::hypot(x(1), x(2));
            return {0, Vector2d(std::atan2(x(2), x(1)), std::atan2(x(0), rho - big_))};
        }

        /// Move a chart point into its canonical chart (wrap angles / swap hemispheres).
        ChartPoint normalize(const ChartPoint& p) const
        {
            if (kind_ == SurfaceKind::Sphere)
                return p.u.norm() > 1.0 ? locate(position(p)) : p;
            return {0, Vector2d(wrap_angle(p.u(0)), wrap_angle(p.u(1)))};
        }

        /// Express a point in a given chart (sphere: the other stereographic chart).
        ChartPoint in_chart(const ChartPoint& p, int chart) const
        {
            if (p.chart == chart)
                return p;
            const Vector3d y = position(p);
            if (chart == 0)
                return {0, Vector2d(y(0), -y(1)) / (1.0 - y(2))};
            return {1, Vector2d(y(0), y(1)) / (1.0 + y(2))};
        }

        /// Orthonormal frame (columns, chart coordinates) by metric Gram-Schmidt of the chart axes.
        Matrix2d frame(const ChartPoint& p) const
        {
            const Matrix2d g = metric(p);
            Matrix2d e;
            Vector2d e1 = Vector2d::UnitX() / std::sqrt(g(0, 0));
            Vector2d e2 = Vector2d::UnitY() - (e1.dot(g * Vector2d::UnitY())) * e1;
            e2 /= std::sqrt(e2.dot(g * e2));
            e.col(0) = e1;
            e.col(1) = e2;
            return e;
        }

        double distance(const ChartPoint& a, const ChartPoint& b) const
        {
            if (kind_ == SurfaceKind::FlatTorus)
            {
                const double dt = wrap_angle(a.u(0) - b.u(0)), dp = wrap_angle(a.u(1) - b.u(1));
                return std::hypot(dt, dp);
            }
            return (position(a) - position(b)).norm();
        }

        /// Seed grid covering the surface; `density` points per chart axis.
        std::vector<ChartPoint> seeds(int density) const
        {
            std::vector<ChartPoint> out;
            for (int c = 0; c < chart_count(); ++c)
                for (int i = 0; i < density; ++i)
                    for (int j = 0; j < density; ++j)
                    {
                        if (kind_ == SurfaceKind::Sphere)
                        {
                            const double a = -1.05 + 2.1 * (i + 0.5) / density;
                            const double b = -1.05 + 2.1 * (j + 0.5) / density;
                            if (std::hypot(a, b) <= 1.05)
                                out.push_back({c, Vector2d(a, b)});
                        }
                        else
                            out.push_back({c, Vector2d(-pi + 2.0 * pi * (i + 0.5) / density,
                                                       -pi + 2.0 * pi * (j + 0.5) / density)});
                    }
            return out;
        }

        /// Random chart point inside the well-conditioned part of a chart.
        ChartPoint random_point(std::mt19937_64& rng) const
        {
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            if (kind_ == SurfaceKind::Sphere)
            {
                std::uniform_int_distribution<int> chart(0, 1);
                Vector2d v;
                do
                    v = Vector2d(u(rng), u(rng));
                while (v.norm() > 1.0);
                return {chart(rng), v};
            }
            return {0, Vector2d(pi * u(rng), pi * u(rng))};
        }

    private:
        ParamSurface(SurfaceKind kind, double big, double small) : kind_(kind), big_(big), small_(small) {}

        std::pair<Vector3d, double> sphere_numerator(const ChartPoint& p) const
        {
            const double n2 = p.u.squaredNorm();
            const double q = n2 + 1.0;
            if (p.chart == 0)
                return {Vector3d(2.0 * p.u(0), -2.0 * p.u(1), n2 - 1.0), q};
            return {Vector3d(2.0 * p.u(0), 2.0 * p.u(1), 1.0 - n2), q};
        }

        Vector3d sphere_df(const ChartPoint& p, int a) const
        {
            const double sigma = p.chart == 0 ? 1.0 : -1.0;
            const double s2 = p.chart == 0 ? -1.0 : 1.0;
            if (a == 0)
                return {2.0, 0.0, sigma * 2.0 * p.u(0)};
            return {0.0, 2.0 * s2, sigma * 2.0 * p.u(1)};
        }

        SurfaceKind kind_;
        double big_;
        double small_;
};

/** ------------------------------------------------------------------- //
 *                                FIELDS                                //
 *  ------------------------------------------------------------------- */

/**
 * Scalar function with closed-form derivatives, given either on ambient
 * space (composed with the chart) or directly in chart coordinates.
 */
struct ScalarField
{
    std::string name;

    std::function<double(const Vector3d&)> ambient_value;
    std::function<Vector3d(const Vector3d&)> ambient_gradient;
    std::function<Matrix3d(const Vector3d&)> ambient_hessian;

    std::function<double(const ChartPoint&)> chart_value;
    std::function<Vector2d(const ChartPoint&)> chart_gradient;
    std::function<Matrix2d(const ChartPoint&)> chart_hessian;

    bool is_ambient() const { return static_cast<bool>(ambient_value); }

    double value(const ParamSurface& s, const ChartPoint& p) const
    {
        return is_ambient() ? ambient_value(s.position(p)) : chart_value(p);
    }

    /// Coordinate partial derivatives.
    Vector2d gradient(const ParamSurface& s, const ChartPoint& p) const
    {
        if (!is_ambient())
            return chart_gradient(p);
        return s.tangent(p).transpose() * ambient_gradient(s.position(p));
    }

    /// Coordinate second partials.
    Matrix2d hessian(const ParamSurface& s, const ChartPoint& p) const
    {
        if (!is_ambient())
            return chart_hessian(p);
        const Vector3d x = s.position(p);
        const Tangent t = s.tangent(p);
        const Vector3d g = ambient_gradient(x);
        const auto sec = s.second(p);
        Matrix2d h = t.transpose() * ambient_hessian(x) * t;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                h(a, b) += g.dot(sec[a][b]);
        return h;
    }

    /// Riemannian gradient in coordinates, g^{-1} df.
    Vector2d metric_gradient(const ParamSurface& s, const ChartPoint& p) const
    {
        return s.metric(p).ldlt().solve(gradient(s, p));
    }

    double gradient_norm(const ParamSurface& s, const ChartPoint& p) const
    {
        const Vector2d df = gradient(s, p);
        return std::sqrt(std::max(0.0, df.dot(s.metric(p).ldlt().solve(df))));
    }
};

/// f = a . x (linear height function restricted to the surface).
inline ScalarField linear_height(const Vector3d& a, std::string name)
{
    ScalarField f;
    f.name = std::move(name);
    f.ambient_value = [a](const Vector3d& x) { return a.dot(x); };
    f.ambient_gradient = [a](const Vector3d&) { return a; };
    f.ambient_hessian = [](const Vector3d&) { return Matrix3d::Zero(); };
    return f;
}

/// z + tilt * x
inline ScalarField tilted_height(double tilt)
{
    return linear_height(Vector3d(tilt, 0.0, 1.0), "height");
}

/// f = c_xx x^2 + c_zz z^2 + c_z z
inline ScalarField quadratic_field(double cxx, double czz, double cz, std::string name)
{
    ScalarField f;
    f.name = std::move(name);
    f.ambient_value = [=](const Vector3d& x) { return cxx * x(0) * x(0) + czz * x(2) * x(2) + cz * x(2); };
    f.ambient_gradient = [=](const Vector3d& x) { return Vector3d(2.0 * cxx * x(0), 0.0, 2.0 * czz * x(2) + cz); };
    f.ambient_hessian = [=](const Vector3d&) {
        Matrix3d h = Matrix3d::Zero();
        h(0, 0) = 2.0 * cxx;
        h(2, 2) = 2.0 * czz;
        return h;
    };
    return f;
}

/// x^2 + 0.5 z on the sphere: two maxima, one saddle, one minimum.
inline ScalarField deformed_sphere_field()
{
    return quadratic_field(1.0, 0.0, 0.5, "deformed");
}

/// z^2 on the sphere: degenerate along the equator.
inline ScalarField degenerate_sphere_field()
{
    return quadratic_field(0.0, 1.0, 0.0, "z-squared");
}

/// cos(theta) + a cos(phi) in torus chart coordinates.
inline ScalarField torus_cosine_field(double a = 0.5)
{
    ScalarField f;
    f.name = "cosine";
    f.chart_value = [a](const ChartPoint& p) { return std::cos(p.u(0)) + a * std::cos(p.u(1)); };
    f.chart_gradient = [a](const ChartPoint& p) { return Vector2d(-std::sin(p.u(0)), -a * std::sin(p.u(1))); };
    f.chart_hessian = [a](const ChartPoint& p) {
        return Matrix2d(Eigen::Vector2d(-std::cos(p.u(0)), -a * std::cos(p.u(1))).asDiagonal());
    };
    return f;
}

/**
 * Tangent vector field in chart coordinates with closed-form Jacobian
 * J(a, b) = d V^a / d u_b.
 */
struct VectorField
{
    std::string name;
    std::function<Vector2d(const ChartPoint&)> value;
    std::function<Matrix2d(const ChartPoint&)> jacobian;
};

/// Infinitesimal rotation about the z axis, (-y, x, 0), on the sphere.
inline VectorField sphere_rotation_field()
{
    VectorField v;
    v.name = "rotation";
    v.value = [](const ChartPoint& p) {
        return p.chart == 0 ? Vector2d(p.u(1), -p.u(0)) : Vector2d(-p.u(1), p.u(0));
    };
    v.jacobian = [](const ChartPoint& p) {
        Matrix2d j;
        if (p.chart == 0)
            j << 0, 1, -1, 0;
        else
            j << 0, -1, 1, 0;
        return j;
    };
    return v;
}

inline VectorField constant_field(const Vector2d& c)
{
    VectorField v;
    v.name = "constant";
    v.value = [c](const ChartPoint&) { return c; };
    v.jacobian = [](const ChartPoint&) { return Matrix2d::Zero(); };
    return v;
}

/// Riemannian gradient g^{-1} df with its exact coordinate Jacobian.
inline VectorField gradient_field(const ParamSurface& s, const ScalarField& f)
{
    VectorField v;
    v.name = "gradient-" + f.name;
    v.value = [s, f](const ChartPoint& p) { return f.metric_gradient(s, p); };
    v.jacobian = [s, f](const ChartPoint& p) {
        const Matrix2d ginv = s.metric(p).inverse();
        const Vector2d df = f.gradient(s, p);
        const Matrix2d h = f.hessian(s, p);
        const auto dg = s.metric_derivative(p);
        Matrix2d j = ginv * h;
        for (int b = 0; b < 2; ++b)
            j.col(b) -= ginv * dg[b] * ginv * df;
        return j;
    };
    return v;
}

/** ------------------------------------------------------------------- //
 *                          FIELD VALIDATION                            //
 *  ------------------------------------------------------------------- */

namespace detail_geo {

inline bool close(double a, double b, double rel)
{
    return std::abs(a - b) <= rel * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

inline std::string where(const ChartPoint& p)
{
    return "chart " + std::to_string(p.chart) + " at (" + std::to_string(p.u(0)) + ", " + std::to_string(p.u(1)) + ")";
}

}   // namespace detail_geo

/// Compare closed-form derivatives with central differences at random chart points.
inline void validate_scalar_field(const ParamSurface& s, const ScalarField& f, int samples = 100,
                                  std::uint64_t seed = 1, double rel = 1e-6)
{
    std::mt19937_64 rng(seed);
    const double h = 1e-5;
    for (int k = 0; k < samples; ++k)
    {
        const ChartPoint p = s.random_point(rng);
        const Vector2d g = f.gradient(s, p);
        const Matrix2d hess = f.hessian(s, p);
        for (int a = 0; a < 2; ++a)
        {
            ChartPoint plus = p, minus = p;
            plus.u(a) += h;
            minus.u(a) -= h;
            const double fd = (f.value(s, plus) - f.value(s, minus)) / (2.0 * h);
            if (!detail_geo::close(fd, g(a), rel))
                throw InvalidInput("geometry", "validate_scalar_field", "gradient of '" + f.name + "' disagrees with finite differences at " + detail_geo::where(p));
            const Vector2d gd = (f.gradient(s, plus) - f.gradient(s, minus)) / (2.0 * h);
            for (int b = 0; b < 2; ++b)
                if (!detail_geo::close(gd(b), hess(b, a), rel))
                    throw InvalidInput("geometry", "validate_scalar_field", "Hessian of '" + f.name + "' disagrees with finite differences at " + detail_geo::where(p));
        }
    }
}

inline void validate_vector_field(const ParamSurface& s, const VectorField& v, int samples = 100,
                                  std::uint64_t seed = 2, double rel = 1e-6)
{
    std::mt19937_64 rng(seed);
    const double h = 1e-5;
    for (int k = 0; k < samples; ++k)
    {
        const ChartPoint p = s.random_point(rng);
        const Matrix2d j = v.jacobian(p);
        for (int b = 0; b < 2; ++b)
        {
            ChartPoint plus = p, minus = p;
            plus.u(b) += h;
            minus.u(b) -= h;
            const Vector2d fd = (v.value(plus) - v.value(minus)) / (2.0 * h);
            for (int a = 0; a < 2; ++a)
                if (!detail_geo::close(fd(a), j(a, b), rel))
                    throw InvalidInput("geometry", "validate_vector_field", "Jacobian of '" + v.name + "' disagrees with finite differences at " + detail_geo::where(p));
        }
    }
}

/** ------------------------------------------------------------------- //
 *                       CRITICAL POINTS AND ZEROS                      //
 *  ------------------------------------------------------------------- */

struct CriticalPoint
{
    ChartPoint where;
    Vector3d position;
    double value = 0.0;
    int index = 0;
    Matrix2d frame;                 // orthonormal frame, columns in chart coordinates
    Vector2d hessian_eigenvalues;   // ascending, of the Hessian in the frame
    Matrix2d hessian_eigenvectors;  // columns, frame components
    double margin = 0.0;            // |det Hessian| in the frame
    double gradient_norm = 0.0;

    /// Eigenvector j in chart coordinates.
    Vector2d coordinate_eigenvector(int j) const { return frame * hessian_eigenvectors.col(j); }
};

struct VectorFieldZero
{
    ChartPoint where;
    Vector3d position;
    Matrix2d A;        // row convention V(y) = y A in an oriented orthonormal frame
    int sign = 0;
    double residual = 0.0;
};

inline constexpr double nondegeneracy_margin = 1e-6;

namespace detail_geo {

/// Flip eigenvector signs so the largest-magnitude component is positive (first axis wins ties).
inline void fix_signs(Matrix2d& vecs)
{
    for (int j = 0; j < 2; ++j)
    {
        const Vector2d v = vecs.col(j);
        const int axis = std::abs(v(0)) >= std::abs(v(1)) - 1e-12 ? 0 : 1;
        if (v(axis) < 0)
            vecs.col(j) = -v;
    }
}

struct NewtonResult
{
    bool converged = false;
    ChartPoint p;
    double residual = 0.0;
};

/**
 * Damped Newton for F(p) = 0 with Jacobian J, measuring the residual in
 * the metric norm supplied by `residual`.
 */
template <class F, class J, class Res>
NewtonResult newton(const ParamSurface& s, ChartPoint p, F&& fn, J&& jac, Res&& residual, double tol,
                    int max_iter = 60)
{
    p = s.normalize(p);
    double r = residual(p);
    for (int it = 0; it < max_iter; ++it)
    {
        if (r < tol)
            return {true, p, r};
        const Matrix2d jm = jac(p);
        const Vector2d fv = fn(p);
        Eigen::FullPivLU<Matrix2d> lu(jm);
        if (!lu.isInvertible())
            return {false, p, r};
        Vector2d step = -lu.solve(fv);
        const double max_step = s.is_torus() ? 0.5 : 0.3;
        if (step.norm() > max_step)
            step *= max_step / step.norm();
        double lambda = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls)
        {
            ChartPoint q = p;
            q.u += lambda * step;
            q = s.normalize(q);
            const double rq = residual(q);
            if (rq < r || rq < tol)
            {
                p = q;
                r = rq;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted)
            return {r < tol, p, r};
    }
    return {r < tol, p, r};
}

}   // namespace detail_geo

/// Classify a point where the gradient vanishes.
inline CriticalPoint classify_critical_point(const ParamSurface& s, const ScalarField& f, const ChartPoint& p)
{
    CriticalPoint cp;
    cp.where = p;
    cp.position = s.position(p);
    cp.value = f.value(s, p);
    cp.frame = s.frame(p);
    const Matrix2d b = cp.frame.transpose() * f.hessian(s, p) * cp.frame;
    Eigen::SelfAdjointEigenSolver<Matrix2d> es(0.5 * (b + b.transpose()));
    cp.hessian_eigenvalues = es.eigenvalues();
    cp.hessian_eigenvectors = es.eigenvectors();
    detail_geo::fix_signs(cp.hessian_eigenvectors);
    cp.index = static_cast<int>((cp.hessian_eigenvalues.array() < 0.0).count());
    cp.margin = std::abs(b.determinant());
    cp.gradient_norm = f.gradient_norm(s, p);
    return cp;
}

namespace detail_geo {

inline std::vector<CriticalPoint> critical_points_from_seeds(const ParamSurface& s, const ScalarField& f,
                                                             int density)
{
    std::vector<CriticalPoint> found;
    auto residual = [&](const ChartPoint& p) { return f.gradient_norm(s, p); };
    auto fn = [&](const ChartPoint& p) { return f.gradient(s, p); };
    auto jac = [&](const ChartPoint& p) { return f.hessian(s, p); };

    auto add = [&](const ChartPoint& start) {
        auto res = newton(s, start, fn, jac, residual, 1e-12);
        if (!res.converged)
            return false;
        for (const auto& c : found)
            if (s.distance(c.where, res.p) < 1e-6)
                return true;
        CriticalPoint cp = classify_critical_point(s, f, res.p);
        if (cp.margin <= nondegeneracy_margin)
            throw DegenerateError("geometry", "find_critical_points",
                                  "degenerate critical point of '" + f.name + "' at " + where(res.p)
                                  + " (|det Hess| = " + std::to_string(cp.margin) + ")");
        found.push_back(cp);
        return true;
    };

    for (const auto& seed : s.seeds(density))
        add(seed);

    // cells of the seed grid where both partials change sign must contain a critical point
    const auto grid = s.seeds(density);
    for (int c = 0; c < s.chart_count(); ++c)
    {
        const double lo = s.is_torus() ? -pi : -1.05, hi = s.is_torus() ? pi : 1.05;
        const double step = (hi - lo) / density;
        for (int i = 0; i < density; ++i)
            for (int j = 0; j < density; ++j)
            {
                std::array<Vector2d, 4> g;
                int k = 0;
                for (int di = 0; di < 2; ++di)
                    for (int dj = 0; dj < 2; ++dj)
                        g[static_cast<std::size_t>(k++)] = f.gradient(s, {c, Vector2d(lo + (i + di) * step, lo + (j + dj) * step)});
                bool change0 = false, change1 = false;
                for (int a = 1; a < 4; ++a)
                {
                    change0 |= std::signbit(g[0](0)) != std::signbit(g[static_cast<std::size_t>(a)](0));
                    change1 |= std::signbit(g[0](1)) != std::signbit(g[static_cast<std::size_t>(a)](1));
                }
                if (!(change0 && change1))
                    continue;
                const ChartPoint centre{c, Vector2d(lo + (i + 0.5) * step, lo + (j + 0.5) * step)};
                if (!s.is_torus() && centre.u.norm() > 1.5)
                    continue;
                bool covered = false;
                for (const auto& cp : found)
                    if (s.distance(cp.where, centre) < 2.0 * step * (s.is_torus() ? 1.0 : 2.0))
                        covered = true;
                if (!covered && !add(centre))
                    throw NumericalError("geometry", "find_critical_points",
                                         "suspected missed critical point of '" + f.name + "' near " + where(centre));
            }
    }

    std::sort(found.begin(), found.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
        return std::make_tuple(a.index, a.value, a.position(0), a.position(1), a.position(2))
             < std::make_tuple(b.index, b.value, b.position(0), b.position(1), b.position(2));
    });
    return found;
}

}   // namespace detail_geo

/**
 * All critical points of f, by damped Newton from a seed grid of the given
 * density per chart axis. The result is checked to be stable when the seed
 * density is doubled.
 */
inline std::vector<CriticalPoint> find_critical_points(const ParamSurface& s, const ScalarField& f, int density = 16)
{
    validate_scalar_field(s, f);
    auto coarse = detail_geo::critical_points_from_seeds(s, f, density);
    auto fine = detail_geo::critical_points_from_seeds(s, f, 2 * density);
    bool same = coarse.size() == fine.size();
    for (std::size_t i = 0; same && i < coarse.size(); ++i)
        same = coarse[i].index == fine[i].index && (coarse[i].position - fine[i].position).norm() < 1e-8;
    if (!same)
        throw NumericalError("geometry", "find_critical_points",
                             "critical point set of '" + f.name + "' changed under seed doubling ("
                             + std::to_string(coarse.size()) + " vs " + std::to_string(fine.size()) + ")");
    return fine;
}

/// A_p of a zero: linearisation in the oriented orthonormal frame, row convention.
inline Matrix2d zero_linearisation(const ParamSurface& s, const VectorField& v, const ChartPoint& p)
{
    const Matrix2d e = s.frame(p);
    const Matrix2d b = e.inverse() * v.jacobian(p) * e;
    return b.transpose();
}

inline std::vector<VectorFieldZero> find_vector_field_zeros(const ParamSurface& s, const VectorField& v,
                                                            int density = 16)
{
    validate_vector_field(s, v);
    std::vector<VectorFieldZero> out;
    auto residual = [&](const ChartPoint& p) {
        const Vector2d x = v.value(p);
        return std::sqrt(std::max(0.0, x.dot(s.metric(p) * x)));
    };
    for (const auto& seed : s.seeds(density))
    {
        auto res = detail_geo::newton(s, seed, v.value, v.jacobian, residual, 1e-12);
        if (!res.converged)
            continue;
        bool dup = false;
        for (const auto& z : out)
            dup |= s.distance(z.where, res.p) < 1e-6;
        if (dup)
            continue;
        VectorFieldZero z;
        z.where = res.p;
        z.position = s.position(res.p);
        z.A = zero_linearisation(s, v, res.p);
        z.residual = res.residual;
        const double det = z.A.determinant();
        if (std::abs(det) <= nondegeneracy_margin)
            throw DegenerateError("geometry", "find_vector_field_zeros",
                                  "degenerate zero of '" + v.name + "' at " + detail_geo::where(res.p)
                                  + " (|det A| = " + std::to_string(std::abs(det)) + ")");
        z.sign = det > 0 ? 1 : -1;
        out.push_back(z);
    }
    std::sort(out.begin(), out.end(), [](const VectorFieldZero& a, const VectorFieldZero& b) {
        return std::lexicographical_compare(a.position.data(), a.position.data() + 3, b.position.data(), b.position.data() + 3);
    });
    return out;
}

/** ------------------------------------------------------------------- //
 *                             TRIANGULATION                            //
 *  ------------------------------------------------------------------- */

struct Mesh
{
    exterior::CellComplex complex;
    exterior::InnerProductFamily masses;
    std::vector<Vector3d> positions;
    std::vector<ChartPoint> params;
    std::vector<std::array<int, 2>> edges;       // oriented low -> high vertex index
    std::vector<std::array<int, 3>> triangles;   // counter-clockwise seen from outside
    std::vector<double> areas;
    std::vector<std::vector<int>> vertex_edges;
    std::vector<std::vector<int>> edge_triangles;

    int vertex_count() const { return static_cast<int>(positions.size()); }

    int nearest_vertex(const Vector3d& x) const
    {
        int best = 0;
        double d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < vertex_count(); ++i)
        {
            const double di = (positions[static_cast<std::size_t>(i)] - x).squaredNorm();
            if (di < d)
            {
                d = di;
                best = i;
            }
        }
        return best;
    }

    int other_end(int edge, int vertex) const
    {
        const auto& e = edges[static_cast<std::size_t>(edge)];
        return e[0] == vertex ? e[1] : e[0];
    }

    /// Graph distances (hops) from a vertex.
    std::vector<int> hop_distances(int source) const
    {
        std::vector<int> dist(positions.size(), -1);
        std::vector<int> queue{source};
        dist[static_cast<std::size_t>(source)] = 0;
        for (std::size_t head = 0; head < queue.size(); ++head)
        {
            const int v = queue[head];
            for (int e : vertex_edges[static_cast<std::size_t>(v)])
            {
                const int w = other_end(e, v);
                if (dist[static_cast<std::size_t>(w)] < 0)
                {
                    dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(v)] + 1;
                    queue.push_back(w);
                }
            }
        }
        return dist;
    }

    /// Mean edge length.
    double mesh_size() const
    {
        double sum = 0.0;
        for (const auto& e : edges)
            sum += (positions[static_cast<std::size_t>(e[0])] - positions[static_cast<std::size_t>(e[1])]).norm();
        return sum / static_cast<double>(edges.size());
    }
};

namespace detail_geo {

/**
 * Build the simplicial complex and lumped masses from oriented triangles.
 * `triangle_area` returns the area of a triangle under the surface metric;
 * `edge_length` the length of an edge.
 */
template <class AreaFn, class LengthFn>
Mesh assemble(std::vector<Vector3d> positions, std::vector<ChartPoint> params,
              std::vector<std::array<int, 3>> triangles, AreaFn&& triangle_area, LengthFn&& edge_length)
{
    Mesh m;
    m.positions = std::move(positions);
    m.params = std::move(params);
    m.triangles = std::move(triangles);
    const int nv = m.vertex_count();

    std::map<std::pair<int, int>, int> edge_index;
    for (const auto& t : m.triangles)
        for (int k = 0; k < 3; ++k)
        {
            const int a = t[static_cast<std::size_t>(k)], b = t[static_cast<std::size_t>((k + 1) % 3)];
            const auto key = std::minmax(a, b);
            if (!edge_index.count(key))
            {
                edge_index.emplace(key, static_cast<int>(m.edges.size()));
                m.edges.push_back({key.first, key.second});
            }
        }
    const int ne = static_cast<int>(m.edges.size());
    const int nt = static_cast<int>(m.triangles.size());

    std::vector<Eigen::Triplet<int>> b1, b2;
    m.vertex_edges.assign(static_cast<std::size_t>(nv), {});
    for (int e = 0; e < ne; ++e)
    {
        const auto& ed = m.edges[static_cast<std::size_t>(e)];
        b1.emplace_back(ed[0], e, -1);
        b1.emplace_back(ed[1], e, 1);
        m.vertex_edges[static_cast<std::size_t>(ed[0])].push_back(e);
        m.vertex_edges[static_cast<std::size_t>(ed[1])].push_back(e);
    }
    m.edge_triangles.assign(static_cast<std::size_t>(ne), {});
    Eigen::VectorXd m0 = Eigen::VectorXd::Zero(nv), adjacent = Eigen::VectorXd::Zero(ne), m2(nt);
    for (int f = 0; f < nt; ++f)
    {
        const auto& t = m.triangles[static_cast<std::size_t>(f)];
        const double area = triangle_area(t);
        if (!(area >= 1e-12))
            throw InvalidInput("geometry", "triangulate", "degenerate triangle " + std::to_string(f)
                               + " (area " + std::to_string(area) + ")");
        m.areas.push_back(area);
        m2(f) = 1.0 / area;
        for (int k = 0; k < 3; ++k)
        {
            const int a = t[static_cast<std::size_t>(k)], b = t[static_cast<std::size_t>((k + 1) % 3)];
            const int e = edge_index.at(std::minmax(a, b));
            b2.emplace_back(e, f, a < b ? 1 : -1);
            m.edge_triangles[static_cast<std::size_t>(e)].push_back(f);
            adjacent(e) += area;
            m0(a) += area / 3.0;
        }
    }
    Eigen::VectorXd m1(ne);
    for (int e = 0; e < ne; ++e)
    {
        const double len = edge_length(m.edges[static_cast<std::size_t>(e)]);
        m1(e) = (2.0 / 3.0) * adjacent(e) / (len * len);
    }

    auto& cx = m.complex;
    cx.dim = 2;
    cx.cells = {nv, ne, nt};
    cx.boundary = {exterior::SparseInt(0, nv), exterior::SparseInt(nv, ne), exterior::SparseInt(ne, nt)};
    cx.boundary[1].setFromTriplets(b1.begin(), b1.end());
    cx.boundary[2].setFromTriplets(b2.begin(), b2.end());
    cx.orientation.assign(static_cast<std::size_t>(nt), 1);
    cx.kind = exterior::CellKind::Simplicial;
    cx.validate();
    m.masses.diagonal = {m0, m1, m2};
    return m;
}

}   // namespace detail_geo

/// Icosahedron subdivided with the given edge frequency, projected to the unit sphere.
inline Mesh icosphere(int frequency)
{
    if (frequency < 1)
        throw InvalidInput("geometry", "icosphere", "frequency must be positive");
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vector3d> base = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                                  {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                                  {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
    std::vector<std::array<int, 3>> faces = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
                                             {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                             {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
                                             {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};

    std::vector<Vector3d> pos;
    std::map<std::array<long long, 3>, int> lookup;
    auto vertex = [&](const Vector3d& p) {
        const Vector3d q = p.normalized();
        const std::array<long long, 3> key{std::llround(q(0) * 1e9), std::llround(q(1) * 1e9), std::llround(q(2) * 1e9)};
        auto it = lookup.find(key);
        if (it != lookup.end())
            return it->second;
        const int id = static_cast<int>(pos.size());
        lookup.emplace(key, id);
        pos.push_back(q);
        return id;
    };

    std::vector<std::array<int, 3>> tris;
    const int n = frequency;
    for (const auto& f : faces)
    {
        const Vector3d a = base[static_cast<std::size_t>(f[0])], b = base[static_cast<std::size_t>(f[1])],
                       c = base[static_cast<std::size_t>(f[2])];
        auto at = [&](int i, int j) { return vertex((a * (n - i - j) + b * i + c * j) / n); };
        for (int i = 0; i < n; ++i)
            for (int j = 0; i + j < n; ++j)
            {
                tris.push_back({at(i, j), at(i + 1, j), at(i, j + 1)});
                if (i + j + 1 < n)
                    tris.push_back({at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)});
            }
    }
    // orient outward
    for (auto& t : tris)
    {
        const Vector3d p0 = pos[static_cast<std::size_t>(t[0])], p1 = pos[static_cast<std::size_t>(t[1])],
                       p2 = pos[static_cast<std::size_t>(t[2])];
        if ((p1 - p0).cross(p2 - p0).dot(p0 + p1 + p2) < 0)
            std::swap(t[1], t[2]);
    }
    const ParamSurface sphere = ParamSurface::sphere();
    std::vector<ChartPoint> params;
    for (const auto& p : pos)
        params.push_back(sphere.locate(p));
    auto area = [&](const std::array<int, 3>& t) {
        return 0.5 * (pos[static_cast<std::size_t>(t[1])] - pos[static_cast<std::size_t>(t[0])])
                         .cross(pos[static_cast<std::size_t>(t[2])] - pos[static_cast<std::size_t>(t[0])]).norm();
    };
    auto length = [&](const std::array<int, 2>& e) {
        return (pos[static_cast<std::size_t>(e[0])] - pos[static_cast<std::size_t>(e[1])]).norm();
    };
    return detail_geo::assemble(pos, params, tris, area, length);
}

/// Regular N x N grid on a torus chart, each square split along its diagonal.
inline Mesh torus_grid(const ParamSurface& s, int n)
{
    if (!s.is_torus())
        throw InvalidInput("geometry", "torus_grid", "surface is not a torus");
    if (n < 3)
        throw InvalidInput("geometry", "torus_grid", "need at least 3 points per axis");
    std::vector<Vector3d> pos;
    std::vector<ChartPoint> params;
    const double step = 2.0 * pi / n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
        {
            const ChartPoint p{0, Vector2d(wrap_angle(-pi + step * i), wrap_angle(-pi + step * j))};
            params.push_back(p);
            pos.push_back(s.position(p));
        }
    auto id = [n](int i, int j) { return ((i + n) % n) * n + (j + n) % n; };
    std::vector<std::array<int, 3>> tris;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
        {
            tris.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            tris.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    if (s.kind() == SurfaceKind::FlatTorus)
    {
        auto area = [&](const std::array<int, 3>&) { return 0.5 * step * step; };
        auto length = [&](const std::array<int, 2>& e) {
            const Vector2d d(wrap_angle(params[static_cast<std::size_t>(e[0])].u(0) - params[static_cast<std::size_t>(e[1])].u(0)),
                             wrap_angle(params[static_cast<std::size_t>(e[0])].u(1) - params[static_cast<std::size_t>(e[1])].u(1)));
            return d.norm();
        };
        return detail_geo::assemble(pos, params, tris, area, length);
    }
    auto area = [&](const std::array<int, 3>& t) {
        return 0.5 * (pos[static_cast<std::size_t>(t[1])] - pos[static_cast<std::size_t>(t[0])])
                         .cross(pos[static_cast<std::size_t>(t[2])] - pos[static_cast<std::size_t>(t[0])]).norm();
    };
    auto length = [&](const std::array<int, 2>& e) {
        return (pos[static_cast<std::size_t>(e[0])] - pos[static_cast<std::size_t>(e[1])]).norm();
    };
    return detail_geo::assemble(pos, params, tris, area, length);
}

/**
 * Triangulate a built-in surface: geodesic icosphere of the given frequency
 * for the sphere, resolution x resolution grid for tori.
 */
inline Mesh triangulate(const ParamSurface& s, int resolution)
{
    if (resolution < 8)
        throw InvalidInput("geometry", "triangulate", "resolution must be at least 8, got " + std::to_string(resolution));
    Mesh m = s.kind() == SurfaceKind::Sphere ? icosphere(resolution) : torus_grid(s, resolution);
    if (exterior::euler_characteristic(m.complex) != s.euler_characteristic())
        throw NumericalError("geometry", "triangulate", "mesh Euler characteristic does not match the surface");
    return m;
}

/// Exact values of f at the mesh vertices.
inline Eigen::VectorXd sample_scalar(const ParamSurface& s, const ScalarField& f, const Mesh& m)
{
    Eigen::VectorXd v(m.vertex_count());
    for (int i = 0; i < m.vertex_count(); ++i)
        v(i) = f.value(s, m.params[static_cast<std::size_t>(i)]);
    return v;
}

}   // namespace witten::geometry
