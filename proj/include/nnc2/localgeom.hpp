#ifndef NNC2_LOCALGEOM_HPP
#define NNC2_LOCALGEOM_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "convex_oracle.hpp"
#include "cz.hpp"
#include "errors.hpp"
#include "funcexpr.hpp"
#include "jets.hpp"
#include "onedim.hpp"

namespace nnc2 {

struct LocalOptions {
    double eps0 = 0.25;     // slope/curvature budget of the graph fit
    double b_min = 100;     // Big iff min f >= b_min M delta^2
    double k_str = 1000;    // straightening budget factor on (M d^2, M d, M)
    int sample_n = 48;      // grid per axis for the nonnegativity certificate
    double margin = 1.0 / 16; // certificate region is Q dilated by this fraction of its side
};

// Rotated frame s = e.(x - origin), t = n.(x - origin), with E near Q* on the graph t = phi(s).
struct LocalChart {
    double delta = 1;
    Vec2 origin{0, 0};
    Vec2 e{1, 0}, n{0, 1};
    double omega = 0;
    std::vector<int> idx;          // indices into E of the points in Q*, sorted by s
    std::vector<double> s, t;
    FuncExpr phi;                  // univariate in s
    double phi_d1_max = 0, phi_d2_max = 0, graph_err = 0;
    double I_lo = 0, I_hi = 0;     // projection of 100Q

    double abscissa(const Vec2& x) const { return e[0] * (x[0] - origin[0]) + e[1] * (x[1] - origin[1]); }
    double ordinate(const Vec2& x) const { return n[0] * (x[0] - origin[0]) + n[1] * (x[1] - origin[1]); }
    Vec2 shear(const Vec2& x) const {
        double sx = abscissa(x);
        return {sx, ordinate(x) - phi->eval({sx, 0}).v};
    }
    Vec2 unshear(const Vec2& st) const {
        double tt = st[1] + phi->eval({st[0], 0}).v;
        return {origin[0] + st[0] * e[0] + tt * n[0], origin[1] + st[0] * e[1] + tt * n[1]};
    }
    // g(s(x)), constant along the transverse direction of the sheared frame
    FuncExpr lift(const FuncExpr& g) const {
        return make_lift(g, e, -(e[0] * origin[0] + e[1] * origin[1]));
    }
};

namespace detail {

inline std::optional<LocalChart> try_chart(const Square& Q, const std::vector<Vec2>& E, const std::vector<int>& ids,
                                           Vec2 e, double eps0) {
    LocalChart c;
    c.delta = Q.side;
    c.e = e;
    c.n = {-e[1], e[0]};
    c.omega = std::atan2(e[1], e[0]);
    double mx = 0, my = 0;
    for (int i : ids) mx += E[i][0], my += E[i][1];
    c.origin = {mx / double(ids.size()), my / double(ids.size())};
    if (ids.size() == 1) c.origin = E[ids[0]];
    std::vector<std::pair<double, int>> order;
    for (int i : ids) order.push_back({c.abscissa(E[i]), i});
    std::sort(order.begin(), order.end());
    for (std::size_t a = 0; a < order.size(); ++a) {
        if (a > 0 && !(order[a].first > order[a - 1].first)) return std::nullopt;
        c.idx.push_back(order[a].second);
        c.s.push_back(order[a].first);
        c.t.push_back(ids.size() == 1 ? 0.0 : c.ordinate(E[order[a].second]));
    }
    double d = Q.side;
    try {
        c.phi = build_1d_budget(c.s, c.t, 100 * d, eps0, eps0 / d).F;
    } catch (const BudgetError&) {
        try {
            c.phi = build_1d_budget(c.s, c.t, 100 * d, 4 * eps0, 4 * eps0 / d).F;
        } catch (const BudgetError&) {
            return std::nullopt;
        }
    }
    // I_Q: projection of 100Q
    Vec2 ctr{Q.lo[0] + d / 2, Q.lo[1] + d / 2};
    c.I_lo = HUGE_VAL, c.I_hi = -HUGE_VAL;
    for (double a : {-50.0, 50.0})
        for (double b : {-50.0, 50.0}) {
            double sv = c.abscissa({ctr[0] + a * d, ctr[1] + b * d});
            c.I_lo = std::min(c.I_lo, sv), c.I_hi = std::max(c.I_hi, sv);
        }
    for (std::size_t a = 0; a < c.s.size(); ++a)
        c.graph_err = std::max(c.graph_err, std::abs(c.phi->eval({c.s[a], 0}).v - c.t[a]));
    const int ns = 4001;
    for (int a = 0; a < ns; ++a) {
        double sv = c.I_lo + (c.I_hi - c.I_lo) * a / (ns - 1);
        J2 j = c.phi->eval({sv, 0});
        c.phi_d1_max = std::max(c.phi_d1_max, std::abs(j.gx));
        c.phi_d2_max = std::max(c.phi_d2_max, std::abs(j.hxx));
    }
    for (double sv : c.s) {
        J2 j = c.phi->eval({sv, 0});
        c.phi_d1_max = std::max(c.phi_d1_max, std::abs(j.gx));
        c.phi_d2_max = std::max(c.phi_d2_max, std::abs(j.hxx));
    }
    double tol = 1e-9 * (1 + d);
    if (c.graph_err > tol || c.phi_d1_max > 1 || c.phi_d2_max > 1 / d) return std::nullopt;
    return c;
}

inline std::vector<int> points_in_star(const Square& Q, const std::vector<Vec2>& E) {
    std::vector<int> ids;
    double h = Q.side;
    Vec2 ctr{Q.lo[0] + h / 2, Q.lo[1] + h / 2};
    for (std::size_t i = 0; i < E.size(); ++i)
        if (std::abs(E[i][0] - ctr[0]) <= h && std::abs(E[i][1] - ctr[1]) <= h) ids.push_back(int(i));
    return ids;
}

} // namespace detail

// Graph chart of E near Q*: PCA axis first, then the axis orthogonal to the gradient of a
// maximal element of the sigma body.
inline LocalChart fit_chart(const Square& Q, const std::vector<Vec2>& E, const OracleOptions& opt = {},
                            double eps0 = 0.25) {
    auto ids = detail::points_in_star(Q, E);
    if (ids.empty()) throw InputError("fit_chart: E does not meet Q*");
    std::vector<Vec2> pts;
    for (int i : ids) pts.push_back(E[i]);
    if (auto c = detail::try_chart(Q, E, ids, principal_direction(pts), eps0)) return *c;
    auto sd = sigma_diameter(pts[0], E, opt.k, opt.radius_cap * Q.side, opt.dirs);
    Vec2 g = sd.witness.grad;
    double gn = norm2(g);
    if (gn > 0) {
        Vec2 e{-g[1] / gn, g[0] / gn};
        if (e[0] < 0) e = {-e[0], -e[1]};
        if (auto c = detail::try_chart(Q, E, ids, e, eps0)) return *c;
    }
    throw GeometryError("fit_chart: no graph chart with |phi'| <= 1, |phi''| <= 1/delta for the square at (" +
                        std::to_string(Q.lo[0]) + ", " + std::to_string(Q.lo[1]) + "), side " +
                        std::to_string(Q.side));
}

// 1-D interpolant in the chart abscissa of values g (ordered as chart.idx).
inline Interp1D straighten_1d(const LocalChart& chart, const std::vector<double>& g, bool nonneg, double M,
                              const LocalOptions& lo = {}) {
    if (g.size() != chart.s.size()) throw InputError("straighten_1d: one value per chart point required");
    if (nonneg) return build_1d_nonneg(chart.s, g);
    double d = chart.delta, K = lo.k_str * std::max(M, 1e-300);
    return build_1d_budget(chart.s, g, K * d * d, K * d, K);
}

enum class Branch { Big, Small };

inline Branch local_dichotomy(const std::vector<double>& f_local, double M, double delta, double b_min = 100) {
    if (f_local.empty()) return Branch::Small;
    double mn = *std::min_element(f_local.begin(), f_local.end());
    return mn >= b_min * M * delta * delta && mn > 0 ? Branch::Big : Branch::Small;
}

// Affine polynomial through three value-tagged points, as a jet based at x3.
inline Jet secant_plane(const Vec2& x1, double v1, const Vec2& x2, double v2, const Vec2& x3, double v3) {
    double a11 = x1[0] - x3[0], a12 = x1[1] - x3[1], a21 = x2[0] - x3[0], a22 = x2[1] - x3[1];
    double det = a11 * a22 - a12 * a21;
    double scale = std::max({std::abs(a11), std::abs(a12), std::abs(a21), std::abs(a22), 1e-300});
    if (std::abs(det) <= 1e-12 * scale * scale) throw GeometryError("secant_plane: collinear base points");
    double r1 = v1 - v3, r2 = v2 - v3;
    Vec2 g{(r1 * a22 - r2 * a12) / det, (a11 * r2 - a21 * r1) / det};
    return Jet::make(2, x3, v3, g);
}

struct LocalSolution {
    FuncExpr F;
    Jet jet;
    Branch branch = Branch::Small;
    std::optional<Jet> p_sharp;
    double min_sampled = 0;
};

namespace detail {

inline FuncExpr affine_of(const Jet& j) { return make_affine(j.base, j.value, j.grad); }

// radius of the dent around x#: half the distance to E, never reaching a data point
inline FuncExpr dent(const Vec2& xs, const std::vector<Vec2>& E, double delta) {
    double r = std::min(dist_to_set(xs, E), 4 * delta) / 2;
    return make_bump(xs, r / 2, r);
}

inline double sampled_min_lower_bound(const FuncExpr& F, const Square& region, int n) {
    double mn = HUGE_VAL, hmax = 0, h = region.side / (n - 1);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            J2 j = F->eval({region.lo[0] + a * h, region.lo[1] + b * h});
            mn = std::min(mn, j.v);
            hmax = std::max(hmax, std::abs(j.hxx) + std::abs(j.hxy) + std::abs(j.hyy));
        }
    return mn - hmax * h * h;
}

} // namespace detail

// Local interpolant on a Lambda# square.
// Big: F = P# + T + (1 - psi)(G - T), G the lifted straightening of f - P#, T its 1-jet at x#.
// Small: F = Fbar, the lifted nonnegative straightening of f.
inline LocalSolution solve_local(const Square& Q, const Vec2& x_sharp, const std::vector<Vec2>& E,
                                 const std::vector<double>& f, const LocalChart& chart, double M,
                                 const std::optional<Jet>& P, const LocalOptions& lo = {}) {
    std::vector<double> fl;
    for (int i : chart.idx) fl.push_back(f[i]);
    double d = Q.side;
    FuncExpr psi = detail::dent(x_sharp, E, d);
    FuncExpr one_minus_psi = make_sum({make_constant(1), make_scale(-1, psi)});
    Square check{{Q.lo[0] - lo.margin * d, Q.lo[1] - lo.margin * d}, d * (1 + 2 * lo.margin)};
    LocalSolution out;
    if (P && local_dichotomy(fl, M, d, lo.b_min) == Branch::Big) {
        const auto& ix = chart.idx;
        Jet ps;
        try {
            if (ix.size() >= 2) {
                ps = secant_plane(E[ix.front()], fl.front(), E[ix.back()], fl.back(), x_sharp,
                                  transport(*P, x_sharp).first);
            } else {
                throw GeometryError("one point");
            }
        } catch (const GeometryError&) {
            Vec2 x1 = E[ix.front()];
            Jet p0 = transport_jet(*P, x_sharp);
            Vec2 w{x1[0] - x_sharp[0], x1[1] - x_sharp[1]};
            double lam = (fl.front() - transport(p0, x1).first) / (w[0] * w[0] + w[1] * w[1]);
            ps = Jet::make(2, x_sharp, p0.value, {p0.grad[0] + lam * w[0], p0.grad[1] + lam * w[1]});
        }
        std::vector<double> g;
        for (std::size_t a = 0; a < ix.size(); ++a) g.push_back(fl[a] - transport(ps, E[ix[a]]).first);
        try {
            FuncExpr G = chart.lift(straighten_1d(chart, g, false, M, lo).F);
            J2 gj = G->eval(x_sharp);
            Jet T = Jet::make(2, x_sharp, gj.v, {gj.gx, gj.gy});
            FuncExpr F = make_sum({detail::affine_of(Jet::make(2, x_sharp, ps.value + T.value,
                                                                {ps.grad[0] + T.grad[0], ps.grad[1] + T.grad[1]})),
                                   make_product({one_minus_psi, make_sum({G, make_scale(-1, detail::affine_of(T))})})});
            double lb = detail::sampled_min_lower_bound(F, check, lo.sample_n);
            if (lb >= 0) {
                out.F = F;
                out.branch = Branch::Big;
                out.p_sharp = ps;
                out.jet = Jet::make(2, x_sharp, ps.value + T.value, {ps.grad[0] + T.grad[0], ps.grad[1] + T.grad[1]});
                out.min_sampled = lb;
                return out;
            }
        } catch (const BudgetError&) {
        }
    }
    FuncExpr Fbar = chart.lift(straighten_1d(chart, fl, true, M, lo).F);
    J2 fj = Fbar->eval(x_sharp);
    out.F = Fbar;
    out.branch = Branch::Small;
    out.jet = Jet::make(2, x_sharp, fj.v, {fj.gx, fj.gy});
    out.min_sampled = 0;
    return out;
}

} // namespace nnc2

#endif
