#pragma once

/**
 * Negative gradient flow on the built-in surfaces, connecting orbits
 * between critical points of adjacent index, their orientation signs, the
 * Thom-Smale chain complex over the integers, and the matrix of integrals of
 * low eigencochains over the unstable cells (the rank-level P_infinity check).
 *
 * Conventions. The unstable cell of a critical point p is oriented by the
 * ordered eigenbasis of the negative Hessian eigenvalues (ascending). For
 * an orbit g from p to q (index q = index p - 1) the sign compares the
 * transported orientation of W^u(p), written (-grad f, s), with the
 * coorientation of W^s(q) given by the oriented unstable direction of q.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "witten/detail/linalg.hpp"
#include "witten/errors.hpp"
#include "witten/exterior_core.hpp"
#include "witten/geometry.hpp"

namespace witten::thom_smale {

using geometry::ChartPoint;
using geometry::CriticalPoint;
using geometry::Matrix2d;
using geometry::ParamSurface;
using geometry::ScalarField;
using geometry::Vector2d;
using geometry::Vector3d;

struct FlowOptions
{
    double tolerance = 1e-10;        // local error per step, chart coordinates
    double gradient_stop = 1e-8;     // converged when |grad f| falls below this
    double arc_budget = 100.0;       // metric arc length
    double max_step_length = 0.05;   // metric length of one accepted step
    int max_steps = 200000;
};

struct FlowLine
{
    std::vector<ChartPoint> points;
    std::vector<double> times;
    std::vector<double> values;
    int direction = -1;          // -1 follows -grad f, +1 follows +grad f
    int source = -1;             // index into the critical point list, -1 for a regular start
    int sink = -1;
    double sink_distance = std::numeric_limits<double>::infinity();
    double arc_length = 0.0;
    bool converged = false;
    int monotonicity_violations = 0;

    const ChartPoint& end() const { return points.back(); }
};

/// Arc-length budget exhausted; the partial trajectory is attached.
class FlowBudgetError : public NumericalError
{
    public:
        FlowBudgetError(const std::string& what, FlowLine line)
            : NumericalError("thom_smale", "integrate_flow", what), line_(std::move(line))
        {
        }
        const FlowLine& line() const { return line_; }

    private:
        FlowLine line_;
};

namespace detail_ts {

inline double metric_norm(const ParamSurface& s, const ChartPoint& p, const Vector2d& v)
{
    return std::sqrt(std::max(0.0, v.dot(s.metric(p) * v)));
}

/// Vector from a to b in the chart of a (tori: shortest wrap).
inline Vector2d chart_offset(const ParamSurface& s, const ChartPoint& a, const ChartPoint& b)
{
    const ChartPoint bb = s.in_chart(b, a.chart);
    Vector2d d = bb.u - a.u;
    if (s.is_torus())
        d = Vector2d(geometry::wrap_angle(d(0)), geometry::wrap_angle(d(1)));
    return d;
}

/// Rotation by +90 degrees in the oriented tangent plane, chart coordinates.
inline Vector2d rotate(const ParamSurface& s, const ChartPoint& p, const Vector2d& v)
{
    const Matrix2d e = s.frame(p);
    const Vector2d w = e.inverse() * v;
    return e * Vector2d(-w(1), w(0));
}

inline int nearest(const ParamSurface& s, const std::vector<CriticalPoint>& cps, const ChartPoint& p, double* dist)
{
    int best = -1;
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cps.size(); ++i)
    {
        const double di = s.distance(cps[i].where, p);
        if (di < d)
        {
            d = di;
            best = static_cast<int>(i);
        }
    }
    if (dist)
        *dist = d;
    return best;
}

}   // namespace detail_ts

/**
 * Integrate dy/dt = direction * grad f with the Runge-Kutta-Fehlberg 4(5)
 * pair until |grad f| < gradient_stop. `stop` (optional) is called after
 * every accepted step and ends the integration early when it returns true.
 * f is checked to move monotonically at every step.
 */
template <class Stop>
FlowLine integrate_flow_until(const ParamSurface& s, const ScalarField& f, const ChartPoint& start, int direction,
                        const std::vector<CriticalPoint>& cps, Stop&& stop, const FlowOptions& opt = {})
{
    if (direction != 1 && direction != -1)
        throw InvalidInput("thom_smale", "integrate_flow", "direction must be +1 or -1");
    FlowLine line;
    line.direction = direction;
    ChartPoint p = s.normalize(start);
    if (f.gradient_norm(s, p) < opt.gradient_stop)
        throw InvalidInput("thom_smale", "integrate_flow", "start point is critical: " + geometry::detail_geo::where(p));
    auto field = [&](const ChartPoint& q) -> Vector2d { return direction * f.metric_gradient(s, q); };

    // Fehlberg coefficients
    static constexpr double b21 = 1.0 / 4;
    static constexpr double b31 = 3.0 / 32, b32 = 9.0 / 32;
    static constexpr double b41 = 1932.0 / 2197, b42 = -7200.0 / 2197, b43 = 7296.0 / 2197;
    static constexpr double b51 = 439.0 / 216, b52 = -8.0, b53 = 3680.0 / 513, b54 = -845.0 / 4104;
    static constexpr double b61 = -8.0 / 27, b62 = 2.0, b63 = -3544.0 / 2565, b64 = 1859.0 / 4104, b65 = -11.0 / 40;
    static constexpr double c1 = 16.0 / 135, c3 = 6656.0 / 12825, c4 = 28561.0 / 56430, c5 = -9.0 / 50, c6 = 2.0 / 55;
    static constexpr double d1 = 25.0 / 216, d3 = 1408.0 / 2565, d4 = 2197.0 / 4104, d5 = -1.0 / 5;

    double t = 0.0, h = 1e-2;
    double fv = f.value(s, p);
    line.points.push_back(p);
    line.times.push_back(t);
    line.values.push_back(fv);
    for (int step = 0; step < opt.max_steps; ++step)
    {
        if (f.gradient_norm(s, p) < opt.gradient_stop)
        {
            line.converged = true;
            break;
        }
        if (line.arc_length > opt.arc_budget)
            throw FlowBudgetError("arc length budget " + std::to_string(opt.arc_budget) + " exhausted from "
                                  + geometry::detail_geo::where(start) + " (suspected separatrix drift)", line);

        const Vector2d k1 = field(p);
        const double speed = detail_ts::metric_norm(s, p, k1);
        h = std::min(h, opt.max_step_length / std::max(speed, 1e-300));
        auto at = [&](const Vector2d& du) { return ChartPoint{p.chart, p.u + du}; };
        while (true)
        {
            const Vector2d k2 = field(at(h * b21 * k1));
            const Vector2d k3 = field(at(h * (b31 * k1 + b32 * k2)));
            const Vector2d k4 = field(at(h * (b41 * k1 + b42 * k2 + b43 * k3)));
            const Vector2d k5 = field(at(h * (b51 * k1 + b52 * k2 + b53 * k3 + b54 * k4)));
            const Vector2d k6 = field(at(h * (b61 * k1 + b62 * k2 + b63 * k3 + b64 * k4 + b65 * k5)));
            const Vector2d y5 = h * (c1 * k1 + c3 * k3 + c4 * k4 + c5 * k5 + c6 * k6);
            const Vector2d y4 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5);
            const double err = (y5 - y4).norm();
            if (err <= opt.tolerance || h < 1e-12)
            {
                const ChartPoint q = s.normalize(at(y5));
                const double fq = f.value(s, q);
                // a step against the flow beyond roundoff is a bug, not a tolerance issue
                const double slack = 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(fv));
                if (direction * (fq - fv) < 0.0)
                {
                    if (-direction * (fq - fv) > slack)
                        throw NumericalError("thom_smale", "integrate_flow",
                                             "f moved against the flow by " + std::to_string(std::abs(fq - fv)));
                    ++line.monotonicity_violations;
                }
                line.arc_length += detail_ts::metric_norm(s, at(0.5 * y5), y5);
                p = q;
                fv = fq;
                t += h;
                line.points.push_back(p);
                line.times.push_back(t);
                line.values.push_back(fv);
                const double grow = err > 0.0 ? 0.9 * std::pow(opt.tolerance / err, 0.2) : 5.0;
                h *= std::clamp(grow, 0.2, 5.0);
                break;
            }
            h *= std::clamp(0.9 * std::pow(opt.tolerance / err, 0.25), 0.1, 0.5);
        }
        if (stop(line))
            break;
    }
    if (!cps.empty())
        line.sink = detail_ts::nearest(s, cps, p, &line.sink_distance);
    return line;
}

inline FlowLine integrate_flow(const ParamSurface& s, const ScalarField& f, const ChartPoint& start, int direction,
                               const std::vector<CriticalPoint>& cps, const FlowOptions& opt = {})
{
    return integrate_flow_until(s, f, start, direction, cps, [](const FlowLine&) { return false; }, opt);
}

/** ------------------------------------------------------------------- //
 *                              CONNECTIONS                             //
 *  ------------------------------------------------------------------- */

struct Orientations
{
    std::vector<int> flip;   // +1 keeps the eigenbasis orientation, -1 reverses it; empty = all +1

    int of(std::size_t i) const { return flip.empty() ? 1 : flip.at(i); }
};

/// Orientation of W^u(p) relative to the surface orientation (index 2) or to +v_neg (index 1).
inline int eigenbasis_orientation(const CriticalPoint& p)
{
    if (p.index == 2)
        return p.hessian_eigenvectors.determinant() > 0.0 ? 1 : -1;
    return 1;
}

struct ShootingOptions
{
    double epsilon = 1e-3;       // metric distance of the shooting points from p
    double near_miss = 1e-4;     // passing this close to another saddle means a saddle connection
    double side_offset = 1e-4;   // perturbation used to read off signs
    FlowOptions flow;
};

struct Connection
{
    FlowLine line;     // oriented from p (higher index) to q
    int sign = 0;
    std::array<int, 3> sign_samples{0, 0, 0};
};

struct ConnectionSet
{
    int p = -1;
    int q = -1;
    std::vector<Connection> lines;

    int incidence() const
    {
        int s = 0;
        for (const auto& c : lines)
            s += c.sign;
        return s;
    }
};

namespace detail_ts {

inline FlowLine reversed(FlowLine line)
{
    std::reverse(line.points.begin(), line.points.end());
    std::reverse(line.values.begin(), line.values.end());
    const double total = line.times.empty() ? 0.0 : line.times.back();
    std::reverse(line.times.begin(), line.times.end());
    for (auto& t : line.times)
        t = total - t;
    std::swap(line.source, line.sink);
    line.direction = -line.direction;
    return line;
}

/// Minimum distance of a trajectory to critical point i.
inline double closest_approach(const ParamSurface& s, const FlowLine& line, const CriticalPoint& c)
{
    double d = std::numeric_limits<double>::infinity();
    for (const auto& p : line.points)
        d = std::min(d, s.distance(p, c.where));
    return d;
}

/**
 * Shoot from a saddle along +-v where v is its unstable (direction -1) or
 * stable (direction +1) eigenvector. Returns the two lines, the first
 * leaving along +v. Saddle connections raise TransversalityError.
 */
inline std::array<FlowLine, 2> shoot_from_saddle(const ParamSurface& s, const ScalarField& f,
                                                 const std::vector<CriticalPoint>& cps, int saddle, int direction,
                                                 const ShootingOptions& opt)
{
    const auto& c = cps.at(static_cast<std::size_t>(saddle));
    if (c.index != 1)
        throw InvalidInput("thom_smale", "connections", "shooting requires an index-1 critical point");
    const Vector2d v = c.coordinate_eigenvector(direction < 0 ? 0 : 1);
    std::array<FlowLine, 2> out;
    for (int k = 0; k < 2; ++k)
    {
        const double sgn = k == 0 ? 1.0 : -1.0;
        double eps = opt.epsilon;
        for (int attempt = 0;; ++attempt)
        {
            try
            {
                ChartPoint start{c.where.chart, c.where.u + sgn * eps * v};
                FlowLine line = integrate_flow(s, f, start, direction, cps, opt.flow);
                line.source = saddle;
                line.points.insert(line.points.begin(), c.where);
                line.times.insert(line.times.begin(), 0.0);
                line.values.insert(line.values.begin(), c.value);
                out[static_cast<std::size_t>(k)] = line;
                break;
            }
            catch (const FlowBudgetError&)
            {
                if (attempt == 3)
                    throw;
                eps /= 4.0;
            }
        }
        const FlowLine& line = out[static_cast<std::size_t>(k)];
        if (!line.converged || line.sink_distance > 1e-6)
            throw NumericalError("thom_smale", "connections",
                                 "trajectory from " + geometry::detail_geo::where(c.where) + " did not reach a critical point");
        const auto& sink = cps[static_cast<std::size_t>(line.sink)];
        if (sink.index == 1)
            throw TransversalityError("thom_smale", "connections",
                                      "saddle-to-saddle connection from " + geometry::detail_geo::where(c.where) + " to "
                                      + geometry::detail_geo::where(sink.where));
        for (std::size_t i = 0; i < cps.size(); ++i)
        {
            if (static_cast<int>(i) == saddle || cps[i].index != 1)
                continue;
            const double d = closest_approach(s, line, cps[i]);
            if (d < opt.near_miss)
                throw TransversalityError("thom_smale", "connections",
                                          "trajectory from " + geometry::detail_geo::where(c.where) + " passes within "
                                          + std::to_string(d) + " of saddle " + geometry::detail_geo::where(cps[i].where));
        }
    }
    return out;
}

/**
 * Side of W^s(q) reached from a point y on an orbit ending at the saddle q,
 * after a small push along s: +1 if the pushed trajectory leaves q along
 * +v_neg(q), -1 along -v_neg(q), 0 if undecided.
 */
inline int exit_side(const ParamSurface& s, const ScalarField& f, const std::vector<CriticalPoint>& cps,
                     const CriticalPoint& q, const ChartPoint& y, const Vector2d& push, const ShootingOptions& opt)
{
    const double r_in = 0.02, r_out = 0.05;
    const Vector2d uq = q.coordinate_eigenvector(0);
    bool entered = false;
    int side = 0;
    auto stop = [&](const FlowLine& line) {
        const double d = s.distance(line.end(), q.where);
        if (d < r_in)
            entered = true;
        if (entered && d > r_out)
        {
            const Vector2d du = chart_offset(s, q.where, line.end());
            side = du.dot(s.metric(q.where) * uq) > 0.0 ? 1 : -1;
            return true;
        }
        return false;
    };
    ChartPoint start{y.chart, y.u + opt.side_offset * push};
    FlowOptions fo = opt.flow;
    fo.max_step_length = std::min(fo.max_step_length, 0.1 * r_in);
    integrate_flow_until(s, f, start, -1, cps, stop, fo);
    return side;
}

}   // namespace detail_ts

/**
 * Orbits from p to q, n_f(q) = n_f(p) - 1. Index 1 -> 0 orbits are shot
 * from p along its unstable direction; index 2 -> 1 orbits are shot
 * backwards from q along its stable direction.
 */
inline ConnectionSet connections(const ParamSurface& s, const ScalarField& f, const std::vector<CriticalPoint>& cps,
                                 int p, int q, const Orientations& orient = {}, const ShootingOptions& opt = {})
{
    const auto& cp = cps.at(static_cast<std::size_t>(p));
    const auto& cq = cps.at(static_cast<std::size_t>(q));
    if (cq.index != cp.index - 1)
        throw InvalidInput("thom_smale", "connections", "indices must differ by one");
    ConnectionSet set;
    set.p = p;
    set.q = q;
    const int op = orient.of(static_cast<std::size_t>(p)) * eigenbasis_orientation(cp);
    const int oq = orient.of(static_cast<std::size_t>(q)) * eigenbasis_orientation(cq);

    if (cp.index == 1)
    {
        const auto lines = detail_ts::shoot_from_saddle(s, f, cps, p, -1, opt);
        for (int k = 0; k < 2; ++k)
        {
            const auto& line = lines[static_cast<std::size_t>(k)];
            if (line.sink != q)
                continue;
            Connection c;
            c.line = line;
            // boundary of the oriented segment: + at the end reached along +v
            c.sign = (k == 0 ? 1 : -1) * op * oq;
            c.sign_samples = {c.sign, c.sign, c.sign};
            set.lines.push_back(c);
        }
    }
    else if (cp.index == 2)
    {
        const auto lines = detail_ts::shoot_from_saddle(s, f, cps, q, 1, opt);
        for (const auto& up : lines)
        {
            if (up.sink != p)
                continue;
            Connection c;
            c.line = detail_ts::reversed(up);   // from p down to q
            const auto& pts = c.line.points;
            std::vector<double> arc{0.0};
            for (std::size_t i = 1; i < pts.size(); ++i)
                arc.push_back(arc.back() + s.distance(pts[i - 1], pts[i]));
            for (int i = 0; i < 3; ++i)
            {
                // sample points at a quarter, half and three quarters of the arc
                const double target = arc.back() * (i + 1) / 4.0;
                const std::size_t at = std::clamp<std::size_t>(
                    static_cast<std::size_t>(std::lower_bound(arc.begin(), arc.end(), target) - arc.begin()), 1, pts.size() - 2);
                const ChartPoint y = pts[at];
                const Vector2d w = -f.metric_gradient(s, y);
                Vector2d push = op * detail_ts::rotate(s, y, w);
                push /= detail_ts::metric_norm(s, y, push);
                c.sign_samples[static_cast<std::size_t>(i)] = oq * detail_ts::exit_side(s, f, cps, cq, y, push, opt);
            }
            if (c.sign_samples[0] == 0 || c.sign_samples[0] != c.sign_samples[1] || c.sign_samples[1] != c.sign_samples[2])
                throw TransversalityError("thom_smale", "orientation_sign",
                                          "sign of an orbit from " + geometry::detail_geo::where(cp.where) + " to "
                                          + geometry::detail_geo::where(cq.where) + " depends on the sample point");
            c.sign = c.sign_samples[0];
            set.lines.push_back(c);
        }
    }
    else
        throw InvalidInput("thom_smale", "connections", "source index must be 1 or 2 on a surface");

    // distinct orbits must stay apart
    if (set.lines.size() == 2)
    {
        const auto& a = set.lines[0].line.points;
        const auto& b = set.lines[1].line.points;
        const double gap = s.distance(a[a.size() / 2], b[b.size() / 2]);
        if (gap < opt.epsilon)
            throw TransversalityError("thom_smale", "connections", "two orbits of the same pair coincide");
    }
    return set;
}

/** ------------------------------------------------------------------- //
 *                          THOM-SMALE COMPLEX                          //
 *  ------------------------------------------------------------------- */

struct ThomSmaleComplex
{
    std::vector<std::vector<int>> generators;   // critical point indices per Morse index
    std::vector<Eigen::MatrixXi> boundary;      // boundary[k]: C_k -> C_{k-1}, k = 1..n (boundary[0] empty)
    std::vector<ConnectionSet> connections;
    Orientations orientations;

    long rank(int k) const { return static_cast<long>(generators.at(static_cast<std::size_t>(k)).size()); }
};

namespace detail_ts {

inline Eigen::MatrixXi assemble(const ThomSmaleComplex& ts, int k)
{
    const auto& rows = ts.generators[static_cast<std::size_t>(k - 1)];
    const auto& cols = ts.generators[static_cast<std::size_t>(k)];
    Eigen::MatrixXi m = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (const auto& set : ts.connections)
    {
        const auto r = std::find(rows.begin(), rows.end(), set.q);
        const auto c = std::find(cols.begin(), cols.end(), set.p);
        if (r != rows.end() && c != cols.end())
            m(r - rows.begin(), c - cols.begin()) += set.incidence();
    }
    return m;
}

}   // namespace detail_ts

/**
 * Resolve every pair of adjacent-index critical points and assemble the
 * integer boundary matrices. With `verify`, the whole computation is redone
 * with half the shooting distance and half the integration tolerance and
 * the matrices must agree.
 */
inline ThomSmaleComplex build_complex(const ParamSurface& s, const ScalarField& f, const std::vector<CriticalPoint>& cps,
                                      const Orientations& orient = {}, const ShootingOptions& opt = {},
                                      bool verify = true)
{
    ThomSmaleComplex ts;
    ts.orientations = orient;
    ts.generators.assign(3, {});
    for (std::size_t i = 0; i < cps.size(); ++i)
        ts.generators.at(static_cast<std::size_t>(cps[i].index)).push_back(static_cast<int>(i));

    for (int k = 1; k <= 2; ++k)
        for (int p : ts.generators[static_cast<std::size_t>(k)])
            for (int q : ts.generators[static_cast<std::size_t>(k - 1)])
                ts.connections.push_back(connections(s, f, cps, p, q, orient, opt));

    ts.boundary.assign(3, Eigen::MatrixXi());
    for (int k = 1; k <= 2; ++k)
        ts.boundary[static_cast<std::size_t>(k)] = detail_ts::assemble(ts, k);

    const Eigen::MatrixXi dd = ts.boundary[1] * ts.boundary[2];
    if (dd.size() > 0 && dd.cwiseAbs().maxCoeff() != 0)
    {
        std::string msg = "boundary composition is nonzero:";
        for (Eigen::Index i = 0; i < dd.rows(); ++i)
            for (Eigen::Index j = 0; j < dd.cols(); ++j)
                if (dd(i, j) != 0)
                    msg += " (" + std::to_string(i) + "," + std::to_string(j) + ")=" + std::to_string(dd(i, j));
        throw TransversalityError("thom_smale", "build_complex", msg);
    }

    if (verify)
    {
        ShootingOptions fine = opt;
        fine.epsilon /= 2.0;
        fine.flow.tolerance /= 2.0;
        const auto again = build_complex(s, f, cps, orient, fine, false);
        for (int k = 1; k <= 2; ++k)
            if (again.boundary[static_cast<std::size_t>(k)] != ts.boundary[static_cast<std::size_t>(k)])
                throw TransversalityError("thom_smale", "build_complex",
                                          "boundary matrix in degree " + std::to_string(k)
                                          + " changed under refinement of the shooting");
    }
    return ts;
}

/// Ranks of the homology over the rationals, by exact integer elimination.
inline std::vector<long> homology_ranks(const ThomSmaleComplex& ts)
{
    const int n = static_cast<int>(ts.generators.size()) - 1;
    std::vector<long> rank(static_cast<std::size_t>(n + 2), 0);
    for (int k = 1; k <= n; ++k)
    {
        const Eigen::MatrixXi& b = ts.boundary[static_cast<std::size_t>(k)];
        rank[static_cast<std::size_t>(k)] = b.size() == 0 ? 0 : detail::integer_rank(b.sparseView());
    }
    std::vector<long> h;
    for (int k = 0; k <= n; ++k)
        h.push_back(ts.rank(k) - rank[static_cast<std::size_t>(k)] - rank[static_cast<std::size_t>(k + 1)]);
    return h;
}

/** ------------------------------------------------------------------- //
 *                            P_INFINITY CHECK                          //
 *  ------------------------------------------------------------------- */

struct PInfinityBlock
{
    int degree = 0;
    Eigen::MatrixXd matrix;   // rows: unstable cells of index `degree`, columns: eigencochains
    long rank = 0;
    double condition = std::numeric_limits<double>::infinity();
    double coverage = 1.0;    // marked measure / expected measure (2-cells)
};

struct PInfinityReport
{
    std::vector<PInfinityBlock> blocks;
    bool full_rank = false;
    double condition = std::numeric_limits<double>::infinity();   // worst block
};

namespace detail_ts {

/// Triangle containing x (projected), with barycentric coordinates.
struct Located
{
    int triangle = -1;
    Eigen::Vector3d bary;
};

inline Eigen::Vector3d barycentric(const geometry::Mesh& m, int tri, const Vector3d& x)
{
    const auto& t = m.triangles[static_cast<std::size_t>(tri)];
    const Vector3d a = m.positions[static_cast<std::size_t>(t[0])];
    const Vector3d e1 = m.positions[static_cast<std::size_t>(t[1])] - a;
    const Vector3d e2 = m.positions[static_cast<std::size_t>(t[2])] - a;
    Eigen::Matrix2d g;
    g << e1.dot(e1), e1.dot(e2), e1.dot(e2), e2.dot(e2);
    const Vector2d rhs(e1.dot(x - a), e2.dot(x - a));
    const Vector2d l = g.ldlt().solve(rhs);
    return {1.0 - l(0) - l(1), l(0), l(1)};
}

class Locator
{
    public:
        explicit Locator(const geometry::Mesh& m) : m_(m), vertex_triangles_(static_cast<std::size_t>(m.vertex_count()))
        {
            for (std::size_t f = 0; f < m.triangles.size(); ++f)
                for (int v : m.triangles[f])
                    vertex_triangles_[static_cast<std::size_t>(v)].push_back(static_cast<int>(f));
        }

        Located locate(const Vector3d& x) const
        {
            const int v = m_.nearest_vertex(x);
            Located best;
            double score = -std::numeric_limits<double>::infinity();
            // triangles around the nearest vertex and its neighbours
            std::vector<int> ring{v};
            for (int e : m_.vertex_edges[static_cast<std::size_t>(v)])
                ring.push_back(m_.other_end(e, v));
            for (int w : ring)
                for (int f : vertex_triangles_[static_cast<std::size_t>(w)])
                {
                    const Eigen::Vector3d b = barycentric(m_, f, x);
                    if (b.minCoeff() > score)
                    {
                        score = b.minCoeff();
                        best = {f, b};
                    }
                }
            if (score < -0.25)
                throw NumericalError("thom_smale", "p_infinity_matrix", "curve point could not be located on the mesh");
            return best;
        }

    private:
        const geometry::Mesh& m_;
        std::vector<std::vector<int>> vertex_triangles_;
};

/**
 * Line integral of the Whitney 1-form of a cochain along a polyline of
 * ambient points (midpoint rule per segment inside the containing triangle).
 */
inline double whitney_line_integral(const geometry::Mesh& m, const Locator& loc, const Eigen::VectorXd& cochain,
                                    const std::vector<Vector3d>& curve)
{
    std::map<std::pair<int, int>, int> edge_of;
    for (std::size_t e = 0; e < m.edges.size(); ++e)
        edge_of[{m.edges[e][0], m.edges[e][1]}] = static_cast<int>(e);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < curve.size(); ++i)
    {
        const Vector3d mid = 0.5 * (curve[i] + curve[i + 1]);
        const Located l = loc.locate(mid);
        const auto& t = m.triangles[static_cast<std::size_t>(l.triangle)];
        const Eigen::Vector3d b0 = barycentric(m, l.triangle, curve[i]);
        const Eigen::Vector3d b1 = barycentric(m, l.triangle, curve[i + 1]);
        const Eigen::Vector3d db = b1 - b0;
        const Eigen::Vector3d bm = 0.5 * (b0 + b1);
        for (int a = 0; a < 3; ++a)
            for (int c = a + 1; c < 3; ++c)
            {
                int va = t[static_cast<std::size_t>(a)], vc = t[static_cast<std::size_t>(c)];
                int ia = a, ic = c;
                if (va > vc)
                {
                    std::swap(va, vc);
                    std::swap(ia, ic);
                }
                const int e = edge_of.at({va, vc});
                // lambda_a d lambda_c - lambda_c d lambda_a along the segment
                total += cochain(e) * (bm(ia) * db(ic) - bm(ic) * db(ia));
            }
    }
    return total;
}

/// Resample a line to points no more than `spacing` apart (ambient distance).
inline std::vector<Vector3d> ambient_polyline(const ParamSurface& s, const FlowLine& line, double spacing)
{
    std::vector<Vector3d> out;
    for (std::size_t i = 0; i < line.points.size(); ++i)
    {
        const Vector3d x = s.position(line.points[i]);
        if (!out.empty())
        {
            const Vector3d prev = out.back();
            const int pieces = static_cast<int>(std::ceil((x - prev).norm() / spacing));
            for (int k = 1; k < pieces; ++k)
            {
                // interpolate in the chart of the earlier point and map back
                const ChartPoint a = line.points[i - 1];
                const Vector2d du = chart_offset(s, a, line.points[i]);
                out.push_back(s.position(s.normalize({a.chart, a.u + du * (static_cast<double>(k) / pieces)})));
            }
        }
        out.push_back(x);
    }
    return out;
}

}   // namespace detail_ts

/**
 * Integrals of low eigencochains (`bases[k]`, columns, one matrix per
 * degree) over the unstable cells:
 *   index 0: the value at the mesh vertex nearest the minimum;
 *   index 1: the Whitney line integral over the two traced orbits of the
 *            saddle, oriented by +v_neg;
 *   index 2: the sum over triangles whose centroid flows up to the maximum,
 *            signed by the orientation of the cell.
 * The 2-cell marking must cover between 95% and 105% of the surface area.
 */
inline PInfinityReport p_infinity_matrix(const ParamSurface& s, const ScalarField& f,
                                         const std::vector<CriticalPoint>& cps, const geometry::Mesh& m,
                                         const std::vector<Eigen::MatrixXd>& bases, const Orientations& orient = {},
                                         const ShootingOptions& opt = {})
{
    if (bases.size() != 3)
        throw InvalidInput("thom_smale", "p_infinity_matrix", "one basis per degree 0..2 required");
    PInfinityReport rep;
    const detail_ts::Locator loc(m);
    std::vector<std::vector<int>> gens(3);
    for (std::size_t i = 0; i < cps.size(); ++i)
        gens[static_cast<std::size_t>(cps[i].index)].push_back(static_cast<int>(i));

    // 2-cells: flow every triangle centroid upwards
    std::vector<int> owner(m.triangles.size(), -1);
    double marked = 0.0, total_area = 0.0;
    if (!gens[2].empty())
        for (std::size_t t = 0; t < m.triangles.size(); ++t)
        {
            total_area += m.areas[t];
            Vector3d centroid = Vector3d::Zero();
            for (int v : m.triangles[t])
                centroid += m.positions[static_cast<std::size_t>(v)] / 3.0;
            ChartPoint start = s.kind() == geometry::SurfaceKind::FlatTorus
                                   ? m.params[static_cast<std::size_t>(m.triangles[t][0])]
                                   : s.locate(centroid);
            if (s.kind() == geometry::SurfaceKind::FlatTorus)
            {
                Vector2d sum = Vector2d::Zero();
                for (int v : m.triangles[t])
                    sum += detail_ts::chart_offset(s, start, m.params[static_cast<std::size_t>(v)]);
                start.u += sum / 3.0;
            }
            if (f.gradient_norm(s, start) < opt.flow.gradient_stop)
                continue;
            FlowOptions fo = opt.flow;
            fo.gradient_stop = 1e-6;
            fo.tolerance = 1e-7;
            const auto line = integrate_flow(s, f, start, 1, cps, fo);
            if (line.converged && cps[static_cast<std::size_t>(line.sink)].index == 2)
            {
                owner[t] = line.sink;
                marked += m.areas[t];
            }
        }

    double worst = 1.0;
    bool full = true;
    for (int k = 0; k <= 2; ++k)
    {
        PInfinityBlock b;
        b.degree = k;
        const auto& basis = bases[static_cast<std::size_t>(k)];
        const auto& g = gens[static_cast<std::size_t>(k)];
        b.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.size()), basis.cols());
        for (std::size_t r = 0; r < g.size(); ++r)
        {
            const int p = g[r];
            const auto& cp = cps[static_cast<std::size_t>(p)];
            const int o = orient.of(static_cast<std::size_t>(p)) * eigenbasis_orientation(cp);
            std::array<std::vector<Vector3d>, 2> curves;
            if (k == 1)
            {
                const auto lines = detail_ts::shoot_from_saddle(s, f, cps, p, -1, opt);
                for (std::size_t side = 0; side < 2; ++side)
                    curves[side] = detail_ts::ambient_polyline(s, lines[side], 0.1 * m.mesh_size());
            }
            for (Eigen::Index j = 0; j < basis.cols(); ++j)
            {
                const Eigen::VectorXd a = basis.col(j);
                double val = 0.0;
                if (k == 0)
                    val = a(m.nearest_vertex(cp.position));
                else if (k == 1)
                {
                    val = o * (detail_ts::whitney_line_integral(m, loc, a, curves[0])
                               - detail_ts::whitney_line_integral(m, loc, a, curves[1]));
                }
                else
                {
                    for (std::size_t t = 0; t < owner.size(); ++t)
                        if (owner[t] == p)
                            val += a(static_cast<Eigen::Index>(t));
                    val *= o;
                }
                b.matrix(static_cast<Eigen::Index>(r), j) = val;
            }
        }
        if (k == 2 && !g.empty())
        {
            b.coverage = marked / total_area;
            if (b.coverage < 0.95 || b.coverage > 1.05)
                throw NumericalError("thom_smale", "p_infinity_matrix",
                                     "unstable 2-cells cover " + std::to_string(100.0 * b.coverage) + "% of the surface");
        }
        if (b.matrix.size() > 0)
        {
            const auto sv = Eigen::JacobiSVD<Eigen::MatrixXd>(b.matrix).singularValues();
            b.rank = detail::numerical_rank(b.matrix, 1e-10);
            b.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
        }
        else
            b.condition = 1.0;
        const bool square_full = b.matrix.rows() == b.matrix.cols() && b.rank == b.matrix.rows();
        full &= square_full;
        worst = std::max(worst, b.condition);
        rep.blocks.push_back(b);
    }
    rep.full_rank = full;
    rep.condition = worst;
    return rep;
}

}   // namespace witten::thom_smale
