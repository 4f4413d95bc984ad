#ifndef NNC2_ASSEMBLE_HPP
#define NNC2_ASSEMBLE_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "convex_oracle.hpp"
#include "cz.hpp"
#include "errors.hpp"
#include "funcexpr.hpp"
#include "jets.hpp"
#include "localgeom.hpp"
#include "whitney_ext.hpp"

namespace nnc2 {

struct AssembleOptions {
    CZOptions cz;
    double tol = 1e-6;
    double k_sel = 16;
    LocalOptions local;
    int cluster_cap = 64;    // size limit for clusters entering the estimate
    int basic_picks = 1;     // greedy picks beyond the nearest 4k set are costly; see README
    int basic_dirs = 8;      // directions for the greedy diameter surrogate
    int basic_pool = 24;     // nearest points whose 4k-neighborhoods form the candidate pool
    bool optimal_jets = true; // minimum-norm jets at representative points
};

enum class ClusterKind { Triple, Keystone, Special };

struct Cluster {
    std::vector<int> points;  // sorted indices into E
    ClusterKind kind = ClusterKind::Triple;
    int square = -1;
    int nu = 0;               // triple index (1-based) for Triple clusters
};

namespace detail {

inline std::vector<int> set_union(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

inline bool is_subset(const std::vector<int>& a, const std::vector<int>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

inline std::vector<int> nearest_within(const Vec2& x, const std::vector<Vec2>& E, double cap) {
    std::vector<std::pair<double, int>> d;
    for (std::size_t i = 0; i < E.size(); ++i) {
        double r = dist(E[i], x);
        if (r < cap) d.push_back({r, int(i)});
    }
    std::sort(d.begin(), d.end());
    std::vector<int> out;
    for (auto& p : d) out.push_back(p.second);
    return out;
}

inline std::vector<int> sorted_head(const std::vector<int>& v, std::size_t n) {
    std::vector<int> out(v.begin(), v.begin() + long(std::min(n, v.size())));
    std::sort(out.begin(), out.end());
    return out;
}

inline double body_diameter(const Vec2& x, const std::vector<Vec2>& E, const std::vector<int>& S, int dirs) {
    std::vector<Vec2> T;
    bool pinned = false;
    for (int i : S) {
        if (E[i] == x) pinned = true;
        else T.push_back(E[i]);
    }
    double best = 0;
    for (const auto& u : jet_directions(2, dirs)) best = std::max(best, sigma_support(2, x, T, pinned, u));
    return 2 * best;
}

} // namespace detail

// S(x#): union of greedily chosen 4k-point subsets near x#, starting from the nearest 4k points.
inline std::vector<int> basic_cluster(const Vec2& x, const std::vector<Vec2>& E, double delta,
                                      const AssembleOptions& opt = {}) {
    int k4 = 4 * opt.cz.k;
    auto ball = detail::nearest_within(x, E, opt.cz.radius_cap * delta);
    if (int(ball.size()) <= k4) {
        std::sort(ball.begin(), ball.end());
        return ball;
    }
    std::vector<int> S = detail::sorted_head(ball, std::size_t(k4));
    if (opt.basic_picks <= 1) return S;
    std::vector<std::vector<int>> pool;
    std::vector<Vec2> B;
    for (int i : ball) B.push_back(E[i]);
    for (int a = 0; a < std::min<int>(opt.basic_pool, int(ball.size())); ++a) {
        auto nb = detail::nearest_within(E[ball[a]], B, HUGE_VAL);
        std::vector<int> c;
        for (std::size_t t = 0; t < std::min<std::size_t>(std::size_t(k4), nb.size()); ++t) c.push_back(ball[nb[t]]);
        std::sort(c.begin(), c.end());
        pool.push_back(c);
    }
    double cur = detail::body_diameter(x, E, S, opt.basic_dirs);
    for (int pick = 1; pick < opt.basic_picks && int(S.size()) < opt.cluster_cap; ++pick) {
        double best = cur;
        std::vector<int> arg;
        for (const auto& c : pool) {
            auto U = detail::set_union(S, c);
            if (U.size() == S.size() || int(U.size()) > opt.cluster_cap) continue;
            double d = detail::body_diameter(x, E, U, opt.basic_dirs);
            if (d < best) best = d, arg = U;
        }
        if (arg.empty() || best > 0.99 * cur) break;
        S = arg, cur = best;
    }
    return S;
}

struct ClusterIndex {
    std::vector<Cluster> clusters;                     // distinct point sets
    std::map<int, std::vector<int>> basic;             // square -> S(x_Q#)
    std::vector<std::vector<std::vector<int>>> triple; // square -> S(Q, nu), nu = 1..nu(Q)
    std::vector<std::vector<int>> special_set;         // square -> S_special(Q)
    std::vector<std::optional<LocalChart>> charts;     // Lambda# squares
    int geometry_errors = 0;
    std::vector<std::string> geometry_notes;
    long containment_checks = 0;
    long containment_violations = 0;
    std::vector<std::string> containment_notes;
    std::size_t max_size = 0;
    int over_cap = 0;  // distinct clusters larger than the cap
};

namespace detail {

inline bool has_mu(const CZCover& cv, int q) { return cv.squares[q].sq.level > 0 && cv.squares[q].mu >= 0; }

struct ClusterBuilder {
    const CZCover& cv;
    const AssembleOptions& opt;
    ClusterIndex& ix;

    const std::vector<int>& basic(int q) {
        auto it = ix.basic.find(q);
        if (it == ix.basic.end()) {
            std::vector<int> S;
            if (cv.E.size() <= 3) {
                // small sets form a single cluster
                for (std::size_t i = 0; i < cv.E.size(); ++i) S.push_back(int(i));
            } else {
                S = basic_cluster(cv.squares[q].x_sharp, cv.E, cv.squares[q].sq.side(), opt);
            }
            it = ix.basic.emplace(q, std::move(S)).first;
        }
        return it->second;
    }

    std::vector<int> closed_neighbors(int q) const {
        std::vector<int> out = cv.squares[q].neighbors;
        out.push_back(q);
        return out;
    }

    // the set whose Gamma+ the jet of Q is drawn from
    const std::vector<int>& used(int q) {
        const auto& s = cv.squares[q];
        if (s.sharp) return ix.triple[q].back();
        if (s.special) return ix.special_set[q];
        return basic(s.mu);
    }
};

} // namespace detail

inline ClusterIndex build_clusters(const CZCover& cv, const AssembleOptions& opt = {}) {
    ClusterIndex ix;
    std::size_t n = cv.squares.size();
    ix.triple.assign(n, {});
    ix.special_set.assign(n, {});
    ix.charts.assign(n, std::nullopt);
    detail::ClusterBuilder b{cv, opt, ix};
    OracleOptions oo;
    oo.k = opt.cz.k, oo.c_nice = opt.cz.c_nice, oo.radius_cap = opt.cz.radius_cap, oo.dirs = opt.cz.dirs;

    std::map<std::vector<int>, int> seen;
    auto add = [&](const std::vector<int>& pts, ClusterKind kind, int q, int nu) {
        if (pts.empty() || seen.count(pts)) return;
        seen[pts] = int(ix.clusters.size());
        ix.clusters.push_back({pts, kind, q, nu});
        ix.max_size = std::max(ix.max_size, pts.size());
        if (int(pts.size()) > opt.cluster_cap) ++ix.over_cap;
    };

    for (std::size_t q = 0; q < n; ++q) {
        const auto& s = cv.squares[q];
        if (!s.sharp) continue;
        try {
            ix.charts[q] = fit_chart(cv.geometry(int(q)), cv.E, oo, opt.local.eps0);
        } catch (const GeometryError& e) {
            ++ix.geometry_errors;
            ix.geometry_notes.push_back(e.what());
            throw;
        }
        const auto& ch = *ix.charts[q];
        std::vector<int> extra;
        for (int r : b.closed_neighbors(int(q))) {
            extra = detail::set_union(extra, b.basic(r));
            if (detail::has_mu(cv, r)) extra = detail::set_union(extra, b.basic(cv.squares[r].mu));
        }
        int N = int(ch.idx.size());
        int nu_q = std::max(1, N - 2);
        for (int nu = 1; nu <= nu_q; ++nu) {
            std::vector<int> core;
            if (N <= 3) core = ch.idx;
            else core = {ch.idx[nu - 1], ch.idx[nu], ch.idx[nu + 1]};
            std::sort(core.begin(), core.end());
            auto S = detail::set_union(core, extra);
            ix.triple[q].push_back(S);
            add(S, ClusterKind::Triple, int(q), nu);
        }
    }
    for (std::size_t q = 0; q < n; ++q)
        if (cv.squares[q].keystone) add(b.basic(int(q)), ClusterKind::Keystone, int(q), 0);
    for (std::size_t q = 0; q < n; ++q) {
        const auto& s = cv.squares[q];
        if (!s.special || s.sq.level <= 0) continue;
        std::vector<int> S;
        for (int r : b.closed_neighbors(int(q))) {
            if (detail::has_mu(cv, r)) S = detail::set_union(S, b.basic(cv.squares[r].mu));
            if (cv.squares[r].sharp) S = detail::set_union(S, ix.triple[r].back());
        }
        ix.special_set[q] = S;
        add(S, ClusterKind::Special, int(q), 0);
    }

    // containments S(x*#) in S and S' for every neighbor pair of squares with delta < 1
    for (std::size_t q = 0; q < n; ++q)
        for (int r : cv.squares[q].neighbors) {
            if (int(q) > r) continue;
            const auto &A = cv.squares[q], &B = cv.squares[std::size_t(r)];
            if (A.sq.level <= 0 || B.sq.level <= 0) continue;
            auto kind = [](const CZSquare& s) { return s.sharp ? 0 : (s.special ? 2 : 1); };
            int ka = kind(A), kb = kind(B);
            int qa = int(q), qb = r;
            if (ka > kb) std::swap(qa, qb), std::swap(ka, kb);
            int star;
            if (ka == 0 && kb == 0) star = qa;
            else if (ka == 0 && kb == 1) star = cv.squares[qb].mu;
            else if (ka == 1 && kb == 1) star = cv.squares[qa].mu;
            else star = cv.squares[qa].mu;  // cases with a special square: mu of the first
            ++ix.containment_checks;
            bool ok = detail::is_subset(b.basic(star), b.used(qa)) && detail::is_subset(b.basic(star), b.used(qb));
            if (ka == 1 && kb == 1 && cv.squares[qa].mu != cv.squares[qb].mu) ok = false;
            if (!ok) {
                ++ix.containment_violations;
                if (ix.containment_notes.size() < 20)
                    ix.containment_notes.push_back("pair " + std::to_string(qa) + "-" + std::to_string(qb));
            }
        }
    return ix;
}

struct TraceNormResult {
    double M_est = 0;
    int argmax = -1;              // index into clusters.clusters
    std::vector<double> norms;    // per cluster
    std::vector<WhitneyField> witness;
    CZCover cover;
    ClusterIndex clusters;
};

namespace detail {

inline void check_data(const std::vector<Vec2>& E, const std::vector<double>& f) {
    if (E.size() != f.size()) throw InputError("points and values differ in length");
    for (double v : f) {
        if (!std::isfinite(v)) throw InputError("non-finite value");
        if (v < 0) throw InputError("negative value in nonnegative interpolation");
    }
}

inline void cluster_data(const std::vector<Vec2>& E, const std::vector<double>& f, const std::vector<int>& S,
                         std::vector<Vec2>& P, std::vector<double>& V) {
    P.clear(), V.clear();
    for (int i : S) P.push_back(E[i]), V.push_back(f[i]);
}

} // namespace detail

inline TraceNormResult trace_norm_estimate(const std::vector<Vec2>& E, const std::vector<double>& f,
                                           const AssembleOptions& opt = {}) {
    detail::check_data(E, f);
    TraceNormResult out;
    out.cover = decompose(E, opt.cz);
    out.clusters = build_clusters(out.cover, opt);
    std::vector<Vec2> P;
    std::vector<double> V;
    for (std::size_t c = 0; c < out.clusters.clusters.size(); ++c) {
        detail::cluster_data(E, f, out.clusters.clusters[c].points, P, V);
        auto est = trace_norm_small(P, V, true, opt.tol);
        out.norms.push_back(est.upper);
        out.witness.push_back(est.witness);
        if (out.argmax < 0 || est.upper > out.M_est) out.M_est = est.upper, out.argmax = int(c);
    }
    return out;
}

enum class SquareType { Local = 1, Relay = 2, Empty = 3 };

struct Interpolant2D {
    CZCover cover;
    ClusterIndex clusters;
    double M = 0;
    std::vector<FuncExpr> pieces;          // nullptr for the zero piece
    std::vector<std::optional<Jet>> jets;  // jet at x_Q# (or at x_mu# for relays)
    std::vector<SquareType> type;
    std::vector<Branch> branch;            // meaningful for Local squares
    FuncExpr F;
    double k_sel_used = 0;
    int n_big = 0, n_small = 0;
};

inline Interpolant2D interpolate_2d(const std::vector<Vec2>& E, const std::vector<double>& f,
                                    const AssembleOptions& opt = {}) {
    detail::check_data(E, f);
    if (E.empty()) throw InputError("interpolate_2d: empty data");
    auto tn = trace_norm_estimate(E, f, opt);
    Interpolant2D ip;
    ip.cover = std::move(tn.cover);
    ip.clusters = std::move(tn.clusters);
    ip.M = tn.M_est;
    const auto& cv = ip.cover;
    std::size_t n = cv.squares.size();
    ip.pieces.assign(n, nullptr);
    ip.jets.assign(n, std::nullopt);
    ip.type.assign(n, SquareType::Empty);
    ip.branch.assign(n, Branch::Small);
    for (std::size_t q = 0; q < n; ++q) {
        const auto& s = cv.squares[q];
        ip.type[q] = s.sharp ? SquareType::Local : (s.sq.level > 0 ? SquareType::Relay : SquareType::Empty);
    }
    if (ip.M == 0) {
        ip.F = make_constant(0);
        return ip;
    }

    std::map<std::vector<int>, int> cid;
    for (std::size_t c = 0; c < ip.clusters.clusters.size(); ++c) cid[ip.clusters.clusters[c].points] = int(c);
    std::map<int, FuncExpr> ext_cache;
    auto pick = [&](const Vec2& x, const std::vector<int>& S) -> Jet {
        if (S.empty()) return Jet::make(2, x, 0, {0, 0});
        int c = cid.at(S);
        auto it = ext_cache.find(c);
        if (it == ext_cache.end()) {
            const auto& w = tn.witness[std::size_t(c)];
            FuncExpr e = m_functional(w) ? extend_nonneg(w) : make_constant(0);
            it = ext_cache.emplace(c, e).first;
        }
        std::vector<Vec2> P;
        std::vector<double> V;
        detail::cluster_data(E, f, S, P, V);
        if (opt.optimal_jets) {
            auto [j, nrm] = optimal_jet(x, P, V, 2, opt.tol);
            if (nrm >= 0 && nrm <= opt.k_sel * ip.M) {
                ip.k_sel_used = std::max(ip.k_sel_used, std::max(nrm / ip.M, 1.0));
                return j;
            }
        }
        for (double ks = opt.k_sel; ks <= opt.k_sel * 4096; ks *= 8) {
            auto j = select_jet(x, P, V, ip.M, ks, 2, opt.tol, &tn.witness[std::size_t(c)], &it->second);
            if (j) {
                ip.k_sel_used = std::max(ip.k_sel_used, ks);
                return *j;
            }
        }
        throw InternalError("interpolate_2d: no admissible jet at a representative point");
    };

    std::map<int, std::pair<Jet, FuncExpr>> relay;  // per mu
    for (std::size_t q = 0; q < n; ++q) {
        const auto& s = cv.squares[q];
        if (ip.type[q] == SquareType::Local) {
            const auto& S = ip.clusters.triple[q].back();
            Jet P = pick(s.x_sharp, S);
            LocalOptions lo = opt.local;
            lo.margin = kCZMargin;
            auto sol = solve_local(cv.geometry(int(q)), s.x_sharp, E, f, *ip.clusters.charts[q], ip.M, P, lo);
            ip.pieces[q] = sol.F;
            ip.jets[q] = sol.jet;
            ip.branch[q] = sol.branch;
            (sol.branch == Branch::Big ? ip.n_big : ip.n_small)++;
        } else if (ip.type[q] == SquareType::Relay) {
            if (s.special) {
                Jet P = pick(s.x_sharp, ip.clusters.special_set[q]);
                ip.jets[q] = P;
                ip.pieces[q] = single_point_extension(P);
            } else {
                auto it = relay.find(s.mu);
                if (it == relay.end()) {
                    const auto& mq = cv.squares[std::size_t(s.mu)];
                    Jet P = pick(mq.x_sharp, ip.clusters.basic.at(s.mu));
                    it = relay.emplace(s.mu, std::make_pair(P, single_point_extension(P))).first;
                }
                ip.jets[q] = it->second.first;
                ip.pieces[q] = it->second.second;
            }
        }
        if (ip.pieces[q] && is_zero_constant(ip.pieces[q])) ip.pieces[q] = nullptr;
    }
    ip.F = make_glue(cz_cell_set(cv), ip.pieces);
    return ip;
}

inline Jet2Sample jet_query(const Interpolant2D& ip, const Vec2& x) { return eval_jet2(ip.F, x); }

struct CompatReport {
    double k_compat = 0;  // max over pairs, samples and orders of |d^a(F_Q - F_Q')| delta^{|a|-2} / M
    long pairs = 0, samples = 0;
    int worst_a = -1, worst_b = -1;
};

// Neighbor-piece defects on the overlaps of the (9/8)-dilates, on a fixed quasi-random pattern.
inline CompatReport measure_compatibility(const Interpolant2D& ip, int samples_per_pair = 50) {
    CompatReport rep;
    const auto& cv = ip.cover;
    if (ip.M <= 0) return rep;
    auto eval = [&](std::size_t q, const Vec2& x) { return ip.pieces[q] ? ip.pieces[q]->eval(x) : J2{}; };
    double m = kCZMargin;
    std::vector<Square> sup;
    for (std::size_t q = 0; q < cv.squares.size(); ++q) {
        auto g = cv.geometry(int(q));
        sup.push_back({{g.lo[0] - m * g.side, g.lo[1] - m * g.side}, g.side * (1 + 2 * m)});
    }
    for (std::size_t q = 0; q < cv.squares.size(); ++q)
        for (std::size_t r = q + 1; r < cv.squares.size(); ++r) {
            if (!ip.pieces[q] && !ip.pieces[r]) continue;
            const auto &ga = cv.geometry(int(q)), &gb = cv.geometry(int(r));
            double x0 = std::max(sup[q].lo[0], sup[r].lo[0]), x1 = std::min(sup[q].lo[0] + sup[q].side, sup[r].lo[0] + sup[r].side);
            double y0 = std::max(sup[q].lo[1], sup[r].lo[1]), y1 = std::min(sup[q].lo[1] + sup[q].side, sup[r].lo[1] + sup[r].side);
            if (!(x1 > x0 && y1 > y0)) continue;
            double d = std::min(ga.side, gb.side);
            ++rep.pairs;
            for (int t = 0; t < samples_per_pair; ++t) {
                // golden-ratio Kronecker sequence
                double u = std::fmod(0.5 + t * 0.6180339887498949, 1.0), v = std::fmod(0.5 + t * 0.7548776662466927, 1.0);
                Vec2 x{x0 + u * (x1 - x0), y0 + v * (y1 - y0)};
                J2 a = eval(q, x), b = eval(r, x);
                double dv = std::abs(a.v - b.v) / (d * d);
                double dg = std::hypot(a.gx - b.gx, a.gy - b.gy) / d;
                double dh = std::sqrt(sq(a.hxx - b.hxx) + 2 * sq(a.hxy - b.hxy) + sq(a.hyy - b.hyy));
                double k = std::max({dv, dg, dh}) / ip.M;
                ++rep.samples;
                if (k > rep.k_compat) rep.k_compat = k, rep.worst_a = int(q), rep.worst_b = int(r);
            }
        }
    return rep;
}

// Bounding square of E inflated by `margin` on every side.
inline Square inflated_hull(const std::vector<Vec2>& E, double margin = 0.5) {
    double lo0 = HUGE_VAL, lo1 = HUGE_VAL, hi0 = -HUGE_VAL, hi1 = -HUGE_VAL;
    for (const auto& p : E) lo0 = std::min(lo0, p[0]), hi0 = std::max(hi0, p[0]), lo1 = std::min(lo1, p[1]), hi1 = std::max(hi1, p[1]);
    double side = std::max(hi0 - lo0, hi1 - lo1) + 2 * margin;
    return {{(lo0 + hi0) / 2 - side / 2, (lo1 + hi1) / 2 - side / 2}, side};
}

} // namespace nnc2

#endif
