#ifndef NNC2_CONVEX_ORACLE_HPP
#define NNC2_CONVEX_ORACLE_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "funcexpr.hpp"
#include "jets.hpp"
#include "socp.hpp"
#include "whitney_ext.hpp"

namespace nnc2 {

struct OracleOptions {
    double tol = 1e-6;
    int k = 4;
    double c_nice = 1000;
    double radius_cap = 16;  // in units of the square side
    int dirs = 64;           // halved in 1-D
    double k_sel = 16;
};

struct TraceNormEstimate {
    double lower = 0;
    double upper = 0;
    WhitneyField witness;
    int iterations = 0;
};

struct SigmaDiameter {
    Vec2 x{0, 0};
    int k = 0;
    double radius_cap = 0;
    double diameter = 0;
    Jet witness;
};

namespace detail {

struct Aff {
    std::vector<std::pair<int, double>> t;
    double c = 0;

    static Aff var(int i, double a = 1) { return Aff{{{i, a}}, 0}; }
    static Aff constant(double c) { return Aff{{}, c}; }
};

inline Aff operator+(Aff a, const Aff& b) {
    a.t.insert(a.t.end(), b.t.begin(), b.t.end());
    a.c += b.c;
    return a;
}
inline Aff operator*(double s, Aff a) {
    for (auto& p : a.t) p.second *= s;
    a.c *= s;
    return a;
}
inline Aff operator-(const Aff& a, const Aff& b) { return a + (-1.0) * b; }

inline double eval_aff(const Aff& a, const Eigen::VectorXd& z) {
    double v = a.c;
    for (auto& [i, s] : a.t) v += s * z[i];
    return v;
}

struct ProgramBuilder {
    int nvar = 0;
    std::vector<Cone> cones;

    int add_var() { return nvar++; }

    // ||rows|| <= rhs (rows empty: rhs >= 0)
    void add(const std::vector<Aff>& rows, const Aff& rhs) {
        std::map<int, int> loc;
        auto touch = [&](const Aff& a) {
            for (auto& p : a.t) loc.emplace(p.first, 0);
        };
        for (auto& r : rows) touch(r);
        touch(rhs);
        Cone k;
        int m = 0;
        for (auto& [g, l] : loc) l = m++, k.idx.push_back(g);
        k.A = Eigen::MatrixXd::Zero(Eigen::Index(rows.size()), m);
        k.b = Eigen::VectorXd::Zero(Eigen::Index(rows.size()));
        k.f = Eigen::VectorXd::Zero(m);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (auto& [g, s] : rows[r].t) k.A(Eigen::Index(r), loc[g]) += s;
            k.b[Eigen::Index(r)] = rows[r].c;
        }
        for (auto& [g, s] : rhs.t) k.f[loc[g]] += s;
        k.d = rhs.c;
        cones.push_back(std::move(k));
    }
};

} // namespace detail

// One point of a Whitney-field program. Values and gradients are either pinned or free.
struct FieldPoint {
    Vec2 x{0, 0};
    bool value_free = false;
    double value = 0;
    bool grad_free = true;
    Vec2 grad{0, 0};
};

struct FieldSolution {
    double lower = 0, upper = 0;
    std::vector<double> values;
    std::vector<Vec2> grads;
    int steps = 0;
    bool feasible = true;
};

// min over free values/gradients of W^2 (+ M functional when nonneg)
inline FieldSolution solve_field(int dim, const std::vector<FieldPoint>& pts, bool nonneg, double tol) {
    using detail::Aff;
    FieldSolution out;
    std::size_t n = pts.size();
    detail::ProgramBuilder pb;
    std::vector<Aff> val(n);
    std::vector<std::array<Aff, 2>> grad(n);
    std::vector<FieldPoint> p = pts;
    for (auto& q : p) {
        if (dim == 1) q.x[1] = 0, q.grad[1] = 0;
        if (nonneg && !q.value_free) {
            if (q.value < 0) throw InputError("nonnegative program with a negative value");
            if (q.value == 0) {
                if (!q.grad_free && (q.grad[0] != 0 || q.grad[1] != 0)) {
                    out.feasible = false;
                    out.lower = out.upper = std::numeric_limits<double>::infinity();
                    return out;
                }
                q.grad_free = false, q.grad = {0, 0};
            }
        }
    }
    double vmax = 0;
    for (auto& q : p)
        if (!q.value_free) vmax = std::max(vmax, q.value);
    double v0 = vmax > 0 ? vmax : 1.0;

    std::vector<double> z0;
    for (std::size_t i = 0; i < n; ++i) {
        if (p[i].value_free) {
            int id = pb.add_var();
            z0.push_back(v0);
            val[i] = Aff::var(id);
        } else {
            val[i] = Aff::constant(p[i].value);
        }
        for (int a = 0; a < dim; ++a) {
            if (p[i].grad_free) {
                int id = pb.add_var();
                z0.push_back(0);
                grad[i][a] = Aff::var(id);
            } else {
                grad[i][a] = Aff::constant(p[i].grad[a]);
            }
        }
        if (dim == 1) grad[i][1] = Aff::constant(0);
    }
    Eigen::VectorXd ztmp = Eigen::Map<Eigen::VectorXd>(z0.data(), Eigen::Index(z0.size()));
    auto val_at = [&](const Aff& a) { return detail::eval_aff(a, ztmp); };

    // first term
    int a1 = pb.add_var();
    double f1 = 0;
    std::vector<std::vector<Aff>> first_rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        first_rows[i] = {val[i], grad[i][0]};
        if (dim == 2) first_rows[i].push_back(grad[i][1]);
        double s = 0;
        for (auto& r : first_rows[i]) s += sq(val_at(r));
        f1 = std::max(f1, std::sqrt(s));
    }
    // pair term
    int a2 = -1;
    double f2 = 0;
    std::vector<std::vector<Aff>> pair_rows;
    if (n >= 2) {
        a2 = pb.add_var();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                double d = dist(p[i].x, p[j].x);
                if (d == 0) throw InputError("coincident points in a Whitney-field program");
                Aff dv = val[i] - val[j] - (p[i].x[0] - p[j].x[0]) * grad[j][0];
                if (dim == 2) dv = dv - (p[i].x[1] - p[j].x[1]) * grad[j][1];
                std::vector<Aff> rows{(1 / (d * d)) * dv, (1 / d) * (grad[i][0] - grad[j][0])};
                if (dim == 2) rows.push_back((1 / d) * (grad[i][1] - grad[j][1]));
                double s = 0;
                for (auto& r : rows) s += sq(val_at(r));
                f2 = std::max(f2, std::sqrt(s));
                pair_rows.push_back(std::move(rows));
            }
    }
    // M functional
    int bm = -1;
    double fm = 0;
    std::vector<std::size_t> mpts;
    if (nonneg) {
        for (std::size_t i = 0; i < n; ++i) {
            bool zero_grad = !p[i].grad_free && p[i].grad[0] == 0 && p[i].grad[1] == 0;
            if (zero_grad && !p[i].value_free) continue;
            mpts.push_back(i);
            if (!p[i].grad_free) fm = std::max(fm, (sq(p[i].grad[0]) + sq(p[i].grad[1])) / (4 * val_at(val[i])));
        }
        if (!mpts.empty()) bm = pb.add_var();
    }
    for (std::size_t i = 0; i < n; ++i) pb.add(first_rows[i], Aff::var(a1));
    for (auto& r : pair_rows) pb.add(r, Aff::var(a2));
    for (auto i : mpts) {
        std::vector<Aff> rows{2.0 * grad[i][0]};
        if (dim == 2) rows.push_back(2.0 * grad[i][1]);
        rows.push_back(4.0 * val[i] - Aff::var(bm));
        pb.add(rows, 4.0 * val[i] + Aff::var(bm));
    }
    if (a2 < 0 && bm < 0) {
        // a single point with nothing free beyond the first term: keep a1 bounded below
        pb.add({}, Aff::var(a1));
    }

    Eigen::VectorXd c = Eigen::VectorXd::Zero(pb.nvar);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(pb.nvar);
    for (std::size_t i = 0; i < z0.size(); ++i) z[Eigen::Index(i)] = z0[i];
    c[a1] = 1, z[a1] = 1 + 2 * f1;
    if (a2 >= 0) c[a2] = 1, z[a2] = 1 + 2 * f2;
    if (bm >= 0) c[bm] = 1, z[bm] = 1 + 2 * fm;
    SocpSolver solver(pb.nvar, pb.cones);
    SocpOptions so;
    so.rel_gap = tol * 0.25;
    so.abs_gap = tol * 0.25;
    auto r = solver.minimize(c, z, so);
    out.steps = r.newton_steps;
    out.upper = r.upper;
    out.lower = std::max(0.0, r.lower);
    for (std::size_t i = 0; i < n; ++i) {
        out.values.push_back(detail::eval_aff(val[i], r.z));
        out.grads.push_back({detail::eval_aff(grad[i][0], r.z), detail::eval_aff(grad[i][1], r.z)});
    }
    return out;
}

namespace detail {

inline void check_distinct(const std::vector<Vec2>& pts) {
    for (std::size_t a = 0; a < pts.size(); ++a)
        for (std::size_t b = a + 1; b < pts.size(); ++b)
            if (pts[a] == pts[b]) throw InputError("duplicate points");
}

inline WhitneyField field_from(int dim, const std::vector<Vec2>& pts, const std::vector<double>& vals,
                               const std::vector<Vec2>& grads) {
    WhitneyField w;
    w.dim = dim;
    for (std::size_t i = 0; i < pts.size(); ++i) w.jets.push_back(Jet::make(dim, pts[i], vals[i], grads[i]));
    return w;
}

inline std::vector<Vec2> flatten(int dim, std::vector<Vec2> pts) {
    if (dim == 1)
        for (auto& p : pts) p[1] = 0;
    return pts;
}

} // namespace detail

// Minimal W^2_+ (nonneg) or W^2 norm of a Whitney field with the given values.
inline TraceNormEstimate trace_norm_small(const std::vector<Vec2>& points, const std::vector<double>& values,
                                          bool nonneg, double tol = 1e-6, int dim = 2) {
    if (points.size() != values.size()) throw InputError("trace_norm_small: size mismatch");
    if (points.empty()) throw InputError("trace_norm_small: empty set");
    auto pts = detail::flatten(dim, points);
    detail::check_distinct(pts);
    for (double v : values) {
        if (!std::isfinite(v)) throw InputError("trace_norm_small: non-finite value");
        if (nonneg && v < 0) throw InputError("trace_norm_small: negative value with the nonneg flag");
    }
    TraceNormEstimate est;
    if (std::all_of(values.begin(), values.end(), [](double v) { return v == 0; })) {
        est.witness = detail::field_from(dim, pts, values, std::vector<Vec2>(pts.size(), Vec2{0, 0}));
        return est;
    }
    std::vector<FieldPoint> fp;
    for (std::size_t i = 0; i < pts.size(); ++i) fp.push_back({pts[i], false, values[i], true, {0, 0}});
    auto sol = solve_field(dim, fp, nonneg, tol);
    est.witness = detail::field_from(dim, pts, values, sol.grads);
    double exact = nonneg ? w2plus_norm(est.witness).value_or(sol.upper) : w2_seminorm(est.witness);
    est.upper = exact;
    est.lower = std::min(sol.lower, est.upper);
    est.iterations = sol.steps;
    return est;
}

// Per-order surrogate used by the 1-D budget path:
// |f| <= t A0, |f'| <= t A1, pair rows <= t A2. Returns t and the witness.
struct BudgetFit {
    double t = 0;
    WhitneyField witness;
};

inline BudgetFit budget_fit_1d(const std::vector<double>& xs, const std::vector<double>& fs, double A0, double A1,
                               double A2, double tol = 1e-9) {
    using detail::Aff;
    std::size_t n = xs.size();
    BudgetFit out;
    out.witness.dim = 1;
    double t0 = 0;
    for (double f : fs) t0 = std::max(t0, A0 > 0 ? std::abs(f) / A0 : (f == 0 ? 0.0 : HUGE_VAL));
    if (std::all_of(fs.begin(), fs.end(), [](double f) { return f == 0; })) {
        for (std::size_t i = 0; i < n; ++i) out.witness.jets.push_back(Jet::make(1, {xs[i], 0}, 0, {0, 0}));
        return out;
    }
    if (n == 1) {
        out.t = t0;
        out.witness.jets.push_back(Jet::make(1, {xs[0], 0}, fs[0], {0, 0}));
        return out;
    }
    if (A2 <= 0) {
        // only affine data fits, with every slope equal to the secant slope
        double sl = (fs[1] - fs[0]) / (xs[1] - xs[0]);
        bool affine = true;
        for (std::size_t i = 2; i < n; ++i)
            affine = affine && std::abs(fs[i] - fs[0] - sl * (xs[i] - xs[0])) <= 1e-12 * (1 + std::abs(fs[i]));
        out.t = !affine ? HUGE_VAL : std::max(t0, A1 > 0 ? std::abs(sl) / A1 : (sl == 0 ? 0.0 : HUGE_VAL));
        for (std::size_t i = 0; i < n; ++i) out.witness.jets.push_back(Jet::make(1, {xs[i], 0}, fs[i], {sl, 0}));
        return out;
    }
    if (A1 <= 0) {
        out.t = t0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) out.t = std::max(out.t, std::abs(fs[i] - fs[j]) / (sq(xs[i] - xs[j]) * A2));
        for (std::size_t i = 0; i < n; ++i) out.witness.jets.push_back(Jet::make(1, {xs[i], 0}, fs[i], {0, 0}));
        return out;
    }
    double a1 = A1, a2 = A2;
    detail::ProgramBuilder pb;
    std::vector<Aff> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = Aff::var(pb.add_var());
    int tv = pb.add_var();
    double tstart = 0;
    for (std::size_t i = 0; i < n; ++i) pb.add({(1 / a1) * g[i]}, Aff::var(tv));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double d = std::abs(xs[i] - xs[j]);
            Aff dv = Aff::constant(fs[i] - fs[j]) - (xs[i] - xs[j]) * g[j];
            std::vector<Aff> rows{(1 / (d * d * a2)) * dv, (1 / (d * a2)) * (g[i] - g[j])};
            tstart = std::max(tstart, std::abs(fs[i] - fs[j]) / (d * d * a2));
            pb.add(rows, Aff::var(tv));
        }
    Eigen::VectorXd c = Eigen::VectorXd::Zero(pb.nvar), z = Eigen::VectorXd::Zero(pb.nvar);
    c[tv] = 1, z[tv] = 1 + 2 * tstart;
    SocpSolver solver(pb.nvar, pb.cones);
    SocpOptions so;
    so.abs_gap = tol, so.rel_gap = tol;
    auto r = solver.minimize(c, z, so);
    out.t = std::max(t0, r.upper);
    for (std::size_t i = 0; i < n; ++i)
        out.witness.jets.push_back(Jet::make(1, {xs[i], 0}, fs[i], {detail::eval_aff(g[i], r.z), 0}));
    return out;
}

// ---- sigma bodies ----

namespace detail {

// unit directions in jet coordinates (a, b, c) (2-D) or (a, c) (1-D), one per antipodal pair
inline std::vector<std::array<double, 3>> jet_directions(int dim, int dirs) {
    std::vector<std::array<double, 3>> out;
    const double pi = 3.14159265358979323846;
    if (dim == 1) {
        int n = std::max(4, dirs / 2);
        for (int i = 0; i < n; ++i) {
            double th = pi * i / n;
            out.push_back({std::cos(th), 0, std::sin(th)});
        }
        return out;
    }
    int neq = std::max(4, dirs / 4);
    for (int i = 0; i < neq; ++i) {
        double th = pi * i / neq;
        out.push_back({std::cos(th), std::sin(th), 0});
    }
    int ncap = std::max(4, dirs - neq);
    const double golden = pi * (3 - std::sqrt(5.0));
    for (int i = 0; i < ncap; ++i) {
        double zc = (i + 0.5) / ncap;
        double r = std::sqrt(1 - zc * zc);
        out.push_back({r * std::cos(golden * i), r * std::sin(golden * i), zc});
    }
    return out;
}

// support of sigma_W(x, T) in direction u; pinned_zero forces P(x) = 0 (x itself in the set)
inline double sigma_support(int dim, const Vec2& x, const std::vector<Vec2>& T, bool pinned_zero,
                            const std::array<double, 3>& u, Jet* arg = nullptr) {
    ProgramBuilder pb;
    Aff c = pinned_zero ? Aff::constant(0) : Aff::var(pb.add_var());
    std::array<Aff, 2> a{Aff::var(pb.add_var()), dim == 2 ? Aff::var(pb.add_var()) : Aff::constant(0)};
    std::vector<std::array<Aff, 2>> g;
    for (std::size_t i = 0; i < T.size(); ++i)
        g.push_back({Aff::var(pb.add_var()), dim == 2 ? Aff::var(pb.add_var()) : Aff::constant(0)});
    int a1 = pb.add_var();
    int a2 = T.empty() ? -1 : pb.add_var();
    auto first = [&](const Aff& v, const std::array<Aff, 2>& gr) {
        std::vector<Aff> rows{v, gr[0]};
        if (dim == 2) rows.push_back(gr[1]);
        pb.add(rows, Aff::var(a1));
    };
    first(c, a);
    for (auto& gi : g) first(Aff::constant(0), gi);
    // all points: index 0 is x, then T
    std::vector<Vec2> P{x};
    P.insert(P.end(), T.begin(), T.end());
    std::vector<Aff> V{c};
    std::vector<std::array<Aff, 2>> G{a};
    for (std::size_t i = 0; i < T.size(); ++i) V.push_back(Aff::constant(0)), G.push_back(g[i]);
    for (std::size_t i = 0; i < P.size(); ++i)
        for (std::size_t j = 0; j < P.size(); ++j) {
            if (i == j) continue;
            double d = dist(P[i], P[j]);
            Aff dv = V[i] - V[j] - (P[i][0] - P[j][0]) * G[j][0];
            if (dim == 2) dv = dv - (P[i][1] - P[j][1]) * G[j][1];
            std::vector<Aff> rows{(1 / (d * d)) * dv, (1 / d) * (G[i][0] - G[j][0])};
            if (dim == 2) rows.push_back((1 / d) * (G[i][1] - G[j][1]));
            pb.add(rows, Aff::var(a2));
        }
    Aff budget = Aff::constant(1) - Aff::var(a1);
    if (a2 >= 0) budget = budget - Aff::var(a2);
    pb.add({}, budget);
    Eigen::VectorXd cost = Eigen::VectorXd::Zero(pb.nvar), z = Eigen::VectorXd::Zero(pb.nvar);
    // maximize u . (a, b, c)
    Aff obj = u[0] * a[0] + u[2] * c;
    if (dim == 2) obj = obj + u[1] * a[1];
    for (auto& [i, s] : obj.t) cost[i] -= s;
    z[a1] = a2 >= 0 ? 0.3 : 0.5;
    if (a2 >= 0) z[a2] = 0.3;
    SocpSolver solver(pb.nvar, pb.cones);
    SocpOptions so;
    so.abs_gap = 1e-9, so.rel_gap = 1e-9;
    auto r = solver.minimize(cost, z, so);
    if (arg) {
        Vec2 gr{eval_aff(a[0], r.z), eval_aff(a[1], r.z)};
        *arg = Jet::make(dim, x, eval_aff(c, r.z), gr);
    }
    return -r.upper;
}

inline void for_each_combination(int m, int r, const std::function<bool(const std::vector<int>&)>& fn) {
    std::vector<int> idx(r);
    for (int i = 0; i < r; ++i) idx[i] = i;
    if (r > m) return;
    while (true) {
        if (!fn(idx)) return;
        int i = r - 1;
        while (i >= 0 && idx[i] == m - r + i) --i;
        if (i < 0) return;
        ++idx[i];
        for (int j = i + 1; j < r; ++j) idx[j] = idx[j - 1] + 1;
    }
}

struct SigmaSetup {
    bool pinned = false;
    std::vector<Vec2> others;
    int r = 0;
};

inline SigmaSetup sigma_setup(int dim, const Vec2& x, const std::vector<Vec2>& E, int k, double cap) {
    SigmaSetup s;
    for (auto p : E) {
        if (dim == 1) p[1] = 0;
        double d = dist(p, x);
        if (d == 0) {
            s.pinned = true;
            continue;
        }
        if (d < cap) s.others.push_back(p);
    }
    std::sort(s.others.begin(), s.others.end(), [&](const Vec2& a, const Vec2& b) {
        double da = dist(a, x), db = dist(b, x);
        return da != db ? da < db : a < b;
    });
    int room = k - (s.pinned ? 1 : 0);
    s.r = std::max(0, std::min<int>(room, int(s.others.size())));
    return s;
}

} // namespace detail

// Surrogate diam sigma#(x, k): 2 max_u min_S h_S(u), S over k-subsets of E within the cap.
inline SigmaDiameter sigma_diameter(const Vec2& x_in, const std::vector<Vec2>& E, int k, double radius_cap, int dirs,
                                    int dim = 2) {
    if (k < 1) throw InputError("sigma_diameter: k must be >= 1");
    if (dirs < 8) throw InputError("sigma_diameter: need at least 8 directions");
    Vec2 x = x_in;
    if (dim == 1) x[1] = 0;
    auto st = detail::sigma_setup(dim, x, E, k, radius_cap);
    auto U = detail::jet_directions(dim, dirs);
    SigmaDiameter out;
    out.x = x, out.k = k, out.radius_cap = radius_cap;
    double best = -1;
    for (const auto& u : U) {
        double h = HUGE_VAL;
        Jet arg;
        detail::for_each_combination(int(st.others.size()), st.r, [&](const std::vector<int>& idx) {
            std::vector<Vec2> T;
            for (int i : idx) T.push_back(st.others[i]);
            Jet a;
            double v = detail::sigma_support(dim, x, T, st.pinned, u, &a);
            if (v < h) h = v, arg = a;
            return true;
        });
        if (h > best) best = h, out.witness = arg;
    }
    out.diameter = 2 * std::max(0.0, best);
    return out;
}

// Same quantity, but stops as soon as diameter >= threshold is decided.
inline bool sigma_diameter_at_least(const Vec2& x_in, const std::vector<Vec2>& E, int k, double radius_cap, int dirs,
                                    double threshold, int dim = 2) {
    if (threshold > 2) return false;  // the body lies in the unit jet ball
    Vec2 x = x_in;
    if (dim == 1) x[1] = 0;
    auto st = detail::sigma_setup(dim, x, E, k, radius_cap);
    auto U = detail::jet_directions(dim, dirs);
    for (const auto& u : U) {
        if (st.pinned && u[0] == 0 && u[1] == 0) continue;
        bool ok = true;
        detail::for_each_combination(int(st.others.size()), st.r, [&](const std::vector<int>& idx) {
            std::vector<Vec2> T;
            for (int i : idx) T.push_back(st.others[i]);
            if (2 * detail::sigma_support(dim, x, T, st.pinned, u) < threshold) ok = false;
            return ok;
        });
        if (ok) return true;
    }
    return false;
}

// k-niceness of the square with lower corner lo and side delta
inline bool nice_test(const Square& Q, const std::vector<Vec2>& E, int k, double c_nice, const OracleOptions& opt = {},
                      int dim = 2) {
    double h = Q.side;
    Vec2 ctr{Q.lo[0] + h / 2, Q.lo[1] + h / 2};
    for (const auto& p : E) {
        if (std::abs(p[0] - ctr[0]) > h) continue;
        if (dim == 2 && std::abs(p[1] - ctr[1]) > h) continue;
        if (!sigma_diameter_at_least(p, E, k, opt.radius_cap * h, opt.dirs, c_nice * h, dim)) return false;
    }
    return true;
}

// ---- jet selection ----

// A jet P at x with the field (P at x; f on S) of W2+ norm <= k_sel * M.
inline std::optional<Jet> select_jet(const Vec2& x, const std::vector<Vec2>& S, const std::vector<double>& f,
                                     double M, double k_sel = 16, int dim = 2, double tol = 1e-6,
                                     const WhitneyField* witness = nullptr, const FuncExpr* extension = nullptr) {
    if (S.size() != f.size()) throw InputError("select_jet: size mismatch");
    Jet zero = Jet::make(dim, x, 0, {0, 0});
    if (S.empty() || std::all_of(f.begin(), f.end(), [](double v) { return v == 0; })) return zero;
    auto pts = detail::flatten(dim, S);
    Vec2 xx = x;
    if (dim == 1) xx[1] = 0;
    WhitneyField w;
    if (witness) {
        w = *witness;
    } else {
        w = trace_norm_small(pts, f, true, tol, dim).witness;
    }
    for (const auto& j : w.jets)
        if (j.base == xx) return j;
    double bound = k_sel * M * (1 + tol);
    // candidate: jet at x of the nonnegative extension of the optimal field on S
    FuncExpr ext = extension ? *extension : extend_nonneg(w);
    J2 e = ext->eval(xx);
    Jet cand = Jet::make(dim, xx, std::max(0.0, e.v), {e.gx, e.gy});
    if (cand.value == 0) cand.grad = {0, 0};
    // the witness gradients are one admissible choice, so this norm bounds the optimum
    WhitneyField aug = w;
    aug.jets.push_back(cand);
    if (auto direct = w2plus_norm(aug); direct && *direct <= bound) return cand;
    std::vector<FieldPoint> fp;
    for (std::size_t i = 0; i < pts.size(); ++i) fp.push_back({pts[i], false, f[i], true, {0, 0}});
    fp.push_back({xx, false, cand.value, false, cand.grad});
    auto chk = solve_field(dim, fp, true, tol);
    if (chk.feasible && chk.upper <= bound) return cand;
    fp.back() = FieldPoint{xx, true, 0, true, {0, 0}};
    auto sol = solve_field(dim, fp, true, tol);
    if (sol.feasible && sol.upper <= bound) {
        Jet p = Jet::make(dim, xx, std::max(0.0, sol.values.back()), sol.grads.back());
        if (p.value == 0) p.grad = {0, 0};
        return p;
    }
    return std::nullopt;
}

// The jet at x minimizing the W2+ norm of (jet at x; f on S), with that norm.
inline std::pair<Jet, double> optimal_jet(const Vec2& x, const std::vector<Vec2>& S, const std::vector<double>& f,
                                          int dim = 2, double tol = 1e-6) {
    if (S.size() != f.size()) throw InputError("optimal_jet: size mismatch");
    Vec2 xx = x;
    if (dim == 1) xx[1] = 0;
    if (S.empty() || std::all_of(f.begin(), f.end(), [](double v) { return v == 0; }))
        return {Jet::make(dim, xx, 0, {0, 0}), 0.0};
    auto pts = detail::flatten(dim, S);
    std::vector<FieldPoint> fp;
    std::size_t at = pts.size();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i] == xx) at = i;
        fp.push_back({pts[i], false, f[i], true, {0, 0}});
    }
    bool extra = at == pts.size();
    if (extra) fp.push_back({xx, true, 0, true, {0, 0}});
    auto sol = solve_field(dim, fp, true, tol);
    Jet p = Jet::make(dim, xx, extra ? std::max(0.0, sol.values.back()) : f[at], sol.grads[at]);
    if (p.value == 0) p.grad = {0, 0};
    WhitneyField w = detail::field_from(dim, pts, f, std::vector<Vec2>(sol.grads.begin(), sol.grads.begin() + long(pts.size())));
    if (extra) w.jets.push_back(p);
    else w.jets[at] = p;
    return {p, w2plus_norm(w).value_or(sol.upper)};
}

// ---- brute-force oracle ----

namespace detail {

// uniform cubic B-spline pieces: value, first and second derivative of the 4 active basis functions
inline void bspline_local(double u, double w[4], double d1[4], double d2[4]) {
    double u2 = u * u, u3 = u2 * u;
    w[0] = (1 - 3 * u + 3 * u2 - u3) / 6;
    w[1] = (4 - 6 * u2 + 3 * u3) / 6;
    w[2] = (1 + 3 * u + 3 * u2 - 3 * u3) / 6;
    w[3] = u3 / 6;
    d1[0] = (-3 + 6 * u - 3 * u2) / 6;
    d1[1] = (-12 * u + 9 * u2) / 6;
    d1[2] = (3 + 6 * u - 9 * u2) / 6;
    d1[3] = 3 * u2 / 6;
    d2[0] = (6 - 6 * u) / 6;
    d2[1] = (-12 + 18 * u) / 6;
    d2[2] = (6 - 18 * u) / 6;
    d2[3] = 6 * u / 6;
}

struct Spline1 {
    double lo, h;
    int n;  // coefficients; coefficient k multiplies B((x - lo)/h - k + 3) style basis
    // active coefficient start and local weights at x
    int locate(double x, double w[4], double d1[4], double d2[4]) const {
        double s = (x - lo) / h;
        int cell = std::clamp(int(std::floor(s)), 0, n - 4);
        bspline_local(s - cell, w, d1, d2);
        for (int a = 0; a < 4; ++a) d1[a] /= h, d2[a] /= h * h;
        return cell;
    }
};

} // namespace detail

namespace detail {

inline Aff merged(const Aff& a) {
    std::map<int, double> m;
    for (auto& [i, s] : a.t) m[i] += s;
    Aff r = Aff::constant(a.c);
    for (auto& [i, s] : m)
        if (s != 0) r.t.push_back({i, s});
    return r;
}

inline Aff substitute(const Aff& a, int v, const Aff& e) {
    Aff r = Aff::constant(a.c);
    for (auto& [i, s] : a.t) {
        if (i == v) r = r + s * e;
        else r.t.push_back({i, s});
    }
    return merged(r);
}

} // namespace detail

// Minimal sampled C^2 norm over (constant + compactly supported cubic spline) interpolants, tensor splines in 2-D.
// Nonnegativity is imposed on a global sample grid and on dense local samples around each data point; zero data
// points also get a zero gradient. Over-estimates the trace norm up to sampling; expressiveness limited by the knots.
inline double brute_force_trace_norm(const std::vector<Vec2>& points, const std::vector<double>& values, bool nonneg,
                                     int dim = 2, double knot_step = 0, double margin = 1.0) {
    using detail::Aff;
    if (points.size() != values.size() || points.empty()) throw InputError("brute_force_trace_norm: bad input");
    if (std::all_of(values.begin(), values.end(), [](double v) { return v == 0; })) return 0;
    double lo[2] = {HUGE_VAL, HUGE_VAL}, hi[2] = {-HUGE_VAL, -HUGE_VAL};
    for (auto& p : points)
        for (int a = 0; a < dim; ++a) lo[a] = std::min(lo[a], p[a]), hi[a] = std::max(hi[a], p[a]);
    double span = 0, gap = HUGE_VAL;
    for (int a = 0; a < dim; ++a) span = std::max(span, hi[a] - lo[a]);
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = 0; j < i; ++j) {
            double d = dim == 1 ? std::abs(points[i][0] - points[j][0]) : dist(points[i], points[j]);
            if (d == 0) throw InputError("brute_force_trace_norm: duplicate points");
            gap = std::min(gap, d);
        }
    double h = knot_step;
    if (h <= 0) h = dim == 1 ? std::clamp(gap / 2, 1.0 / 256, 1.0 / 128) : std::clamp(gap / 2, 1.0 / 12, 1.0 / 6);
    // domain [lo - margin, lo - margin + L]; zero coefficients on the 3 outer layers
    int cells = int(std::ceil((span + 2 * margin) / h));
    int n = cells + 3;
    detail::Spline1 sp[2];
    for (int a = 0; a < dim; ++a) sp[a] = {lo[a] - margin, h, n};
    auto free_coef = [&](int i) { return i >= 3 && i < n - 3; };
    int nc = dim == 1 ? n : n * n;
    std::vector<Aff> coef(nc);
    detail::ProgramBuilder pb;
    std::vector<int> spline_vars;
    for (int i = 0; i < nc; ++i) {
        int ia = dim == 1 ? i : i / n, ib = dim == 1 ? 3 : i % n;
        if (free_coef(ia) && free_coef(ib)) {
            int v = pb.add_var();
            spline_vars.push_back(v);
            coef[i] = Aff::var(v);
        } else {
            coef[i] = Aff::constant(0);
        }
    }
    int cv = pb.add_var();
    using Terms = std::vector<std::pair<int, std::array<double, 6>>>;
    // rows F, Fx, Fy, Fxx, Fxy, Fyy (1-D: F, F', F'')
    auto local = [&](const Vec2& x) {
        Terms terms;
        double w0[4], a0[4], b0[4], w1[4] = {1, 0, 0, 0}, a1[4] = {0}, b1[4] = {0};
        int c0 = sp[0].locate(x[0], w0, a0, b0), c1 = 0;
        if (dim == 2) c1 = sp[1].locate(x[1], w1, a1, b1);
        for (int p = 0; p < 4; ++p)
            for (int q = 0; q < (dim == 2 ? 4 : 1); ++q) {
                int id = dim == 1 ? c0 + p : (c0 + p) * n + (c1 + q);
                std::array<double, 6> r{};
                if (dim == 1) r = {w0[p], a0[p], b0[p], 0, 0, 0};
                else r = {w0[p] * w1[q], a0[p] * w1[q], w0[p] * a1[q], b0[p] * w1[q], a0[p] * a1[q], w0[p] * b1[q]};
                terms.push_back({id, r});
            }
        return terms;
    };
    auto row = [&](const Terms& terms, int k) {
        Aff a = k == 0 ? Aff::var(cv) : Aff::constant(0);
        for (auto& [id, r] : terms) a = a + r[k] * coef[id];
        return detail::merged(a);
    };
    // exact constraints by elimination of the spline coefficient with the largest weight
    std::vector<bool> eliminated(pb.nvar, false);
    auto impose = [&](const Aff& expr, double target) {
        Aff a = detail::merged(expr - Aff::constant(target));
        int piv = -1;
        double best = 0, scale = 0;
        for (auto& [i, s] : a.t) {
            scale = std::max(scale, std::abs(s));
            if (i != cv && std::abs(s) > best) best = std::abs(s), piv = i;
        }
        if (piv < 0 || best <= 1e-12 * scale) {
            if (std::abs(a.c) <= 1e-12 * (1 + std::abs(target))) return;
            throw InputError("brute_force_trace_norm: knot grid too coarse for the data");
        }
        double w = 0;
        Aff rest = Aff::constant(a.c);
        for (auto& [i, s] : a.t) {
            if (i == piv) w = s;
            else rest.t.push_back({i, s});
        }
        Aff e = (-1.0 / w) * rest;
        for (auto& c : coef)
            if (!c.t.empty()) c = detail::substitute(c, piv, e);
        eliminated[piv] = true;
    };
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto terms = local(points[i]);
        impose(row(terms, 0), values[i]);
        if (nonneg && values[i] == 0)
            for (int k = 1; k <= dim; ++k) impose(row(terms, k), 0);
    }
    // eliminated variables stay in the program, bounded and unused
    for (int v : spline_vars)
        if (eliminated[v]) pb.add({}, Aff::constant(1) + Aff::var(v)), pb.add({}, Aff::constant(1) - Aff::var(v));
    int tv = pb.add_var();
    int rv = nonneg ? pb.add_var() : -1;
    std::vector<Vec2> samples;
    double step = h / 2;
    int ns = int(std::ceil((span + 2 * margin) / step)) + 1;
    for (int a = 0; a < ns; ++a)
        for (int b = 0; b < (dim == 2 ? ns : 1); ++b)
            samples.push_back({lo[0] - margin + a * step, dim == 2 ? lo[1] - margin + b * step : 0.0});
    for (const auto& p : points) {
        samples.push_back(dim == 1 ? Vec2{p[0], 0} : p);
        for (int j = 0; j <= 16; ++j) {
            double r = h * std::ldexp(1.0, -j);
            int nd = dim == 1 ? 2 : 8;
            for (int d = 0; d < nd; ++d) {
                double ang = 2 * std::numbers::pi * d / nd;
                samples.push_back(dim == 1 ? Vec2{p[0] + (d ? r : -r), 0} : Vec2{p[0] + r * std::cos(ang), p[1] + r * std::sin(ang)});
            }
        }
    }
    int nrows = dim == 1 ? 3 : 6;
    double fmax = *std::max_element(values.begin(), values.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    fmax = std::abs(fmax);
    // start: free coefficients 0, constant at the mean
    double mean = 0;
    for (double v : values) mean += v / double(values.size());
    Eigen::VectorXd z = Eigen::VectorXd::Zero(pb.nvar);
    z[cv] = nonneg ? std::max(mean, 0.0) + 1 : mean;
    double tmax = std::abs(z[cv]), rneed = 0;
    for (const auto& s : samples) {
        auto terms = local(s);
        std::vector<Aff> rows;
        double nn = 0;
        for (int k = 0; k < nrows; ++k) {
            rows.push_back(row(terms, k));
            nn += sq(detail::eval_aff(rows.back(), z));
        }
        tmax = std::max(tmax, std::sqrt(nn));
        pb.add(rows, Aff::var(tv));
        if (nonneg) {
            rneed = std::max(rneed, -detail::eval_aff(rows[0], z));
            pb.add({}, rows[0] + Aff::var(rv));
        }
    }
    // outside the spline support F is the constant
    pb.add({Aff::var(cv)}, Aff::var(tv));
    if (nonneg) pb.add({}, Aff::var(cv) + Aff::var(rv)), pb.add({}, Aff::var(rv));
    z[tv] = 1 + 2 * tmax;
    if (nonneg) z[rv] = 1 + 2 * rneed;
    SocpSolver solver(pb.nvar, pb.cones);
    SocpOptions so;
    so.abs_gap = 1e-7, so.rel_gap = 1e-7;
    // exact penalty on the nonnegativity slack, raised until the slack vanishes
    double weight = 1e4 * (1 + fmax / (gap * gap));
    for (int attempt = 0;; ++attempt) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(pb.nvar);
        c[tv] = 1;
        if (nonneg) c[rv] = weight;
        auto r = solver.minimize(c, z, so);
        if (!nonneg || r.z[rv] <= 1e-9 * (1 + fmax) || attempt == 3) return r.z[tv];
        weight *= 100;
    }
}

} // namespace nnc2

#endif
