#ifndef NNC2_ONEDIM_HPP
#define NNC2_ONEDIM_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "convex_oracle.hpp"
#include "errors.hpp"
#include "funcexpr.hpp"
#include "jets.hpp"
#include "whitney_ext.hpp"

namespace nnc2 {

struct Interp1D {
    FuncExpr F;
    std::vector<FuncExpr> pieces;    // F_j, one per consecutive triple (or one for N <= 3)
    std::vector<FuncExpr> weights;   // theta_j
    std::vector<double> triple_norm; // small-set estimate per triple
    std::vector<WhitneyField> witness;
};

namespace detail {

inline void check_sorted(const std::vector<double>& xs, const std::vector<double>& fs) {
    if (xs.empty()) throw InputError("empty data");
    if (xs.size() != fs.size()) throw InputError("points and values differ in length");
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!std::isfinite(xs[i]) || !std::isfinite(fs[i])) throw InputError("non-finite data");
        if (i > 0 && !(xs[i] > xs[i - 1])) throw InputError("points must be strictly increasing");
    }
}

inline std::vector<Vec2> as_points(const std::vector<double>& xs) {
    std::vector<Vec2> p;
    for (double x : xs) p.push_back({x, 0});
    return p;
}

// theta_j for triple j of T = N - 2 triples: step(x_j, x_{j+1}) * step(x_{j+2}, x_{j+1})
inline std::vector<std::vector<FuncExpr>> theta_factors(const std::vector<double>& xs) {
    std::size_t T = xs.size() - 2;
    std::vector<std::vector<FuncExpr>> th(T);
    for (std::size_t j = 0; j < T; ++j) {
        if (j > 0) th[j].push_back(make_step(xs[j], xs[j + 1]));
        if (j + 1 < T) th[j].push_back(make_step(xs[j + 2], xs[j + 1]));
    }
    return th;
}

inline Interp1D patch(const std::vector<double>& xs, std::vector<FuncExpr> pieces, std::vector<double> norms,
                      std::vector<WhitneyField> wit) {
    Interp1D out;
    out.pieces = pieces;
    out.triple_norm = std::move(norms);
    out.witness = std::move(wit);
    if (xs.size() <= 3) {
        out.F = pieces[0];
        out.weights = {make_constant(1)};
        return out;
    }
    auto th = theta_factors(xs);
    std::vector<FuncExpr> terms;
    for (std::size_t j = 0; j < th.size(); ++j) {
        out.weights.push_back(th[j].size() == 1 ? th[j][0] : make_product(th[j]));
        if (is_zero_constant(pieces[j])) continue;
        auto f = th[j];
        f.push_back(pieces[j]);
        terms.push_back(make_product(f));
    }
    out.F = make_sum(terms);
    return out;
}

} // namespace detail

// Nonnegative interpolant: sum_j theta_j F_j over consecutive triples.
inline Interp1D build_1d_nonneg(const std::vector<double>& xs, const std::vector<double>& fs, double tol = 1e-6) {
    detail::check_sorted(xs, fs);
    for (double f : fs)
        if (f < 0) throw InputError("negative value in nonnegative interpolation");
    std::size_t T = xs.size() <= 3 ? 1 : xs.size() - 2;
    std::vector<FuncExpr> pieces;
    std::vector<double> norms;
    std::vector<WhitneyField> wit;
    for (std::size_t j = 0; j < T; ++j) {
        std::size_t len = xs.size() <= 3 ? xs.size() : 3;
        std::vector<double> sx(xs.begin() + long(j), xs.begin() + long(j + len));
        std::vector<double> sf(fs.begin() + long(j), fs.begin() + long(j + len));
        auto est = trace_norm_small(detail::as_points(sx), sf, true, tol, 1);
        norms.push_back(est.upper);
        pieces.push_back(extend_nonneg(est.witness));
        wit.push_back(est.witness);
    }
    return detail::patch(xs, pieces, norms, wit);
}

inline FuncExpr interpolate_1d_nonneg(const std::vector<double>& xs, const std::vector<double>& fs,
                                      double tol = 1e-6) {
    return build_1d_nonneg(xs, fs, tol).F;
}

namespace detail {

// Quadratic interpolant Q = A + q (x - c)^2 of a triple (affine for pairs, constant for one point).
// The curvature part is cut off at scale lq beyond the triple and the affine part at scale la.
inline FuncExpr quadratic_piece(const std::vector<double>& x, const std::vector<double>& f, double la, double lq) {
    double c = (x.front() + x.back()) / 2, h = (x.back() - x.front()) / 2;
    double d01 = x.size() > 1 ? (f[1] - f[0]) / (x[1] - x[0]) : 0.0, q = 0;
    if (x.size() > 2) q = ((f[2] - f[1]) / (x[2] - x[1]) - d01) / (x[2] - x[0]);
    double vc = f[0] + d01 * (c - x[0]) + q * (c - x[0]) * (c - x[1 % x.size()]);
    double sc = d01 + q * (2 * c - x[0] - x[1 % x.size()]);
    std::vector<FuncExpr> terms;
    if (vc != 0 || sc != 0)
        terms.push_back(make_product({make_bump({c, 0}, h + la / 8, h + la, 1), make_poly({c, 0}, {vc, sc, 0, 0, 0, 0})}));
    // a ramp narrower than the triple would cost q (h + lq)^2 / lq^2 in the second derivative
    lq = std::min(la, std::max(lq, 4 * h));
    if (q != 0)
        terms.push_back(make_product({make_bump({c, 0}, h + lq / 8, h + lq, 1), make_poly({c, 0}, {0, 0, 0, q, 0, 0})}));
    return make_sum(std::move(terms));
}

} // namespace detail

// Per-order budgets: triples fitted with |f| <= A0, |f'| <= A1, pair rows <= A2 (scaled by t <= 1).
inline Interp1D build_1d_budget(const std::vector<double>& xs, const std::vector<double>& fs, double A0, double A1,
                                double A2) {
    detail::check_sorted(xs, fs);
    if (A0 < 0 || A1 < 0 || A2 < 0) throw InputError("budgets must be nonnegative");
    std::size_t T = xs.size() <= 3 ? 1 : xs.size() - 2;
    // the affine part ramps out over A0 / A1 and the curvature part over A1 / A2
    double la = A0 > 0 && A1 > 0 ? A0 / A1 : 1.0;
    double lq = A1 > 0 && A2 > 0 ? std::min(la, A1 / A2) : la;
    std::vector<FuncExpr> pieces;
    std::vector<double> norms;
    std::vector<WhitneyField> wit;
    for (std::size_t j = 0; j < T; ++j) {
        std::size_t len = xs.size() <= 3 ? xs.size() : 3;
        std::vector<double> sx(xs.begin() + long(j), xs.begin() + long(j + len));
        std::vector<double> sf(fs.begin() + long(j), fs.begin() + long(j + len));
        auto fit = budget_fit_1d(sx, sf, A0, A1, A2);
        if (fit.t > 1 + 1e-9) {
            std::string pts;
            for (double x : sx) pts += (pts.empty() ? "" : ", ") + std::to_string(x);
            throw BudgetError("triple {" + pts + "} exceeds the per-order budgets (factor " + std::to_string(fit.t) +
                              ")");
        }
        norms.push_back(fit.t);
        pieces.push_back(detail::quadratic_piece(sx, sf, la, lq));
        wit.push_back(fit.witness);
    }
    return detail::patch(xs, pieces, norms, wit);
}

inline FuncExpr interpolate_1d(const std::vector<double>& xs, const std::vector<double>& fs, double A0, double A1,
                               double A2) {
    return build_1d_budget(xs, fs, A0, A1, A2).F;
}

// Bounded-depth extension operators on a fixed sorted E.
class Operator1D {
public:
    explicit Operator1D(std::vector<double> xs, double tol = 1e-6) : xs_(std::move(xs)), tol_(tol) {
        detail::check_sorted(xs_, std::vector<double>(xs_.size(), 0.0));
    }

    const std::vector<double>& points() const { return xs_; }

    // nonnegative, not additive
    FuncExpr apply(const std::vector<double>& f) const { return build_1d_nonneg(xs_, f, tol_).F; }

    // linear variant: each triple uses the jets of its quadratic interpolant
    FuncExpr apply_linear(const std::vector<double>& f) const {
        detail::check_sorted(xs_, f);
        std::size_t T = xs_.size() <= 3 ? 1 : xs_.size() - 2;
        std::vector<FuncExpr> pieces;
        std::vector<WhitneyField> wit;
        for (std::size_t j = 0; j < T; ++j) {
            std::size_t len = xs_.size() <= 3 ? xs_.size() : 3;
            WhitneyField w;
            w.dim = 1;
            for (std::size_t a = 0; a < len; ++a) {
                double x = xs_[j + a];
                w.jets.push_back(Jet::make(1, {x, 0}, f[j + a], {lagrange_slope(j, len, f, x), 0}));
            }
            pieces.push_back(extend_unconstrained(w));
            wit.push_back(w);
        }
        return detail::patch(xs_, pieces, std::vector<double>(T, 0.0), wit).F;
    }

    // S(x): the data the 2-jet at x depends on
    std::vector<double> query_depth_set(double x) const {
        std::size_t N = xs_.size();
        if (N <= 3) return xs_;
        if (x < xs_[0] || x > xs_[N - 1]) {
            std::vector<double> s = xs_;
            std::stable_sort(s.begin(), s.end(),
                             [&](double a, double b) { return std::abs(a - x) < std::abs(b - x); });
            s.resize(3);
            std::sort(s.begin(), s.end());
            return s;
        }
        if (x <= xs_[1]) return {xs_[0], xs_[1], xs_[2]};
        if (x >= xs_[N - 2]) return {xs_[N - 3], xs_[N - 2], xs_[N - 1]};
        // x in [x_{i}, x_{i+1}] with 1 <= i <= N-3: bracket x_{i-1} .. x_{i+2}
        std::size_t i = std::size_t(std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin()) - 1;
        if (i + 1 >= N - 1) i = N - 3;
        return {xs_[i - 1], xs_[i], xs_[i + 1], xs_[i + 2]};
    }

private:
    double lagrange_slope(std::size_t j, std::size_t len, const std::vector<double>& f, double x) const {
        if (len == 1) return 0;
        if (len == 2) return (f[j + 1] - f[j]) / (xs_[j + 1] - xs_[j]);
        double x0 = xs_[j], x1 = xs_[j + 1], x2 = xs_[j + 2];
        double d01 = (f[j + 1] - f[j]) / (x1 - x0), d12 = (f[j + 2] - f[j + 1]) / (x2 - x1);
        double d012 = (d12 - d01) / (x2 - x0);
        return d01 + d012 * ((x - x0) + (x - x1));
    }

    std::vector<double> xs_;
    double tol_;
};

inline Operator1D build_operator_1d(const std::vector<double>& xs, double tol = 1e-6) { return Operator1D(xs, tol); }

// If f == g on S(x), the 2-jets of apply(f) and apply(g) at x must agree.
inline bool depth_invariance_check(const Operator1D& op, const std::vector<double>& f, const std::vector<double>& g,
                                   double x, double tol = 1e-12) {
    auto S = op.query_depth_set(x);
    const auto& xs = op.points();
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (std::find(S.begin(), S.end(), xs[i]) != S.end() && f[i] != g[i]) return true;
    J2 a = op.apply(f)->eval({x, 0}), b = op.apply(g)->eval({x, 0});
    auto close = [&](double u, double v) { return std::abs(u - v) <= tol * (1 + std::max(std::abs(u), std::abs(v))); };
    return close(a.v, b.v) && close(a.gx, b.gx) && close(a.hxx, b.hxx);
}

struct NonadditivityReport {
    double eps = 0;
    double est_f = 0, est_g = 0, est_sum = 0;
    double max_second_derivative = 0;  // of E(f) + E(g), sampled
};

inline NonadditivityReport nonadditivity_demo(double eps, double tol = 1e-6, int grid = 4001) {
    if (!(eps > 0) || !std::isfinite(eps)) throw InputError("nonadditivity_demo: eps must be positive");
    std::vector<double> xs{0, eps, 2 * eps}, f{0, eps, 2 * eps}, g{1, 1 - eps, 1 - 2 * eps}, s{1, 1, 1};
    for (double v : g)
        if (v < 0) throw InputError("nonadditivity_demo: eps must be at most 1/2");
    auto P = detail::as_points(xs);
    NonadditivityReport r;
    r.eps = eps;
    r.est_f = trace_norm_small(P, f, true, tol, 1).upper;
    r.est_g = trace_norm_small(P, g, true, tol, 1).upper;
    r.est_sum = trace_norm_small(P, s, true, tol, 1).upper;
    auto F = make_sum({interpolate_1d_nonneg(xs, f, tol), interpolate_1d_nonneg(xs, g, tol)});
    double lo = -eps, hi = 3 * eps;
    for (int i = 0; i < grid; ++i) {
        double x = lo + (hi - lo) * i / (grid - 1);
        r.max_second_derivative = std::max(r.max_second_derivative, std::abs(F->eval({x, 0}).hxx));
    }
    return r;
}

} // namespace nnc2

#endif
