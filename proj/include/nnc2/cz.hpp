#ifndef NNC2_CZ_HPP
#define NNC2_CZ_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "convex_oracle.hpp"
#include "errors.hpp"
#include "funcexpr.hpp"
#include "jets.hpp"

namespace nnc2 {

using DyadicSquare = DyadicCell;

struct CZOptions {
    int k = 4;
    double c_nice = 1000;
    double radius_cap = 16;
    int dirs = 64;
    int max_depth = 48;
};

struct CZSquare {
    DyadicSquare sq;
    bool sharp = false;     // E meets Q*
    bool keystone = false;
    bool special = false;
    Vec2 x_sharp{0, 0};
    int mu = -1;            // index of the keystone target, -1 if none
    std::vector<int> neighbors;
};

struct CZCover {
    std::vector<CZSquare> squares;
    std::vector<DyadicSquare> region;  // unit squares
    std::vector<Vec2> E;
    CZOptions opt;

    int finest_level() const {
        int L = 0;
        for (const auto& s : squares) L = std::max(L, s.sq.level);
        return L;
    }
    Square geometry(int q) const {
        const auto& c = squares[q].sq;
        return {c.lo(), c.side()};
    }
    std::vector<DyadicCell> cells() const {
        std::vector<DyadicCell> out;
        for (const auto& s : squares) out.push_back(s.sq);
        return out;
    }
};

struct CoverReport {
    bool disjoint = true;
    bool covers_region = true;
    int neighbor_ratio_violations = 0;
    int max_dilate_count = 0;  // max over Q of #{Q' : (9/8)Q' meets (9/8)Q}, Q' = Q included
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

namespace detail {

// integer box [x0, x1) x [y0, y1) in units of 2^-L
struct IBox {
    std::int64_t x0, x1, y0, y1;
};

inline IBox ibox(const DyadicSquare& s, int L) {
    std::int64_t m = std::int64_t(1) << (L - s.level);
    return {s.i * m, (s.i + 1) * m, s.j * m, (s.j + 1) * m};
}

inline bool closed_touch(const IBox& a, const IBox& b) {
    return a.x0 <= b.x1 && b.x0 <= a.x1 && a.y0 <= b.y1 && b.y0 <= a.y1;
}

inline bool open_overlap(const IBox& a, const IBox& b) {
    return a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1;
}

// concentric dilation by num/den, exact when den divides the box side
inline IBox dilate(const IBox& a, std::int64_t num, std::int64_t den) {
    std::int64_t s = a.x1 - a.x0, e = s * (num - den) / (2 * den);
    return {a.x0 - e, a.x1 + e, a.y0 - e, a.y1 + e};
}

// squared Euclidean gap between two boxes (0 when they touch)
inline double gap2(const IBox& a, const IBox& b) {
    double gx = double(std::max<std::int64_t>({0, b.x0 - a.x1, a.x0 - b.x1}));
    double gy = double(std::max<std::int64_t>({0, b.y0 - a.y1, a.y0 - b.y1}));
    return gx * gx + gy * gy;
}

inline bool in_double(const DyadicSquare& s, const Vec2& p) {
    Vec2 c = s.center();
    double h = s.side();
    return std::abs(p[0] - c[0]) <= h && std::abs(p[1] - c[1]) <= h;
}

inline std::vector<DyadicSquare> default_region(const std::vector<Vec2>& E) {
    double lo[2] = {0, 0}, hi[2] = {0, 0};
    if (!E.empty()) {
        lo[0] = hi[0] = E[0][0], lo[1] = hi[1] = E[0][1];
        for (const auto& p : E)
            for (int a = 0; a < 2; ++a) lo[a] = std::min(lo[a], p[a]), hi[a] = std::max(hi[a], p[a]);
    }
    std::vector<DyadicSquare> out;
    for (auto i = std::int64_t(std::floor(lo[0])) - 2; i <= std::int64_t(std::floor(hi[0])) + 2; ++i)
        for (auto j = std::int64_t(std::floor(lo[1])) - 2; j <= std::int64_t(std::floor(hi[1])) + 2; ++j)
            out.push_back({0, i, j});
    return out;
}

} // namespace detail

// Principal axis of a point cloud (unit vector); (1, 0) for fewer than two points.
inline Vec2 principal_direction(const std::vector<Vec2>& pts) {
    if (pts.size() < 2) return {1, 0};
    double mx = 0, my = 0;
    for (auto& p : pts) mx += p[0], my += p[1];
    mx /= double(pts.size()), my /= double(pts.size());
    double sxx = 0, sxy = 0, syy = 0;
    for (auto& p : pts) {
        double dx = p[0] - mx, dy = p[1] - my;
        sxx += dx * dx, sxy += dx * dy, syy += dy * dy;
    }
    double th = 0.5 * std::atan2(2 * sxy, sxx - syy);
    Vec2 e{std::cos(th), std::sin(th)};
    if (e[0] < 0 || (e[0] == 0 && e[1] < 0)) e = {-e[0], -e[1]};
    return e;
}

inline double dist_to_set(const Vec2& x, const std::vector<Vec2>& E) {
    double d = HUGE_VAL;
    for (const auto& p : E) d = std::min(d, dist(x, p));
    return d;
}

// x_Q#: the center when E misses (1/2)Q; otherwise a point offset transversally from a data
// point in (1/2)Q, kept in Q and at distance >= delta/16 from E.
inline Vec2 representative_point(const DyadicSquare& Q, const std::vector<Vec2>& E,
                                 std::optional<Vec2> chart_dir = std::nullopt) {
    Vec2 c = Q.center();
    double h = Q.side();
    std::vector<Vec2> half, star;
    for (const auto& p : E) {
        if (std::abs(p[0] - c[0]) <= h / 4 && std::abs(p[1] - c[1]) <= h / 4) half.push_back(p);
        if (detail::in_double(Q, p)) star.push_back(p);
    }
    if (half.empty()) return c;
    Vec2 e = chart_dir ? *chart_dir : principal_direction(star);
    Vec2 nrm{-e[1], e[0]};
    // data point of (1/2)Q closest to the center
    Vec2 xh = half[0];
    for (const auto& p : half)
        if (dist(p, c) < dist(xh, c) || (dist(p, c) == dist(xh, c) && p < xh)) xh = p;
    double lo0 = Q.lo()[0], lo1 = Q.lo()[1];
    auto clamp_in = [&](Vec2 p) {
        double eps = h * 1e-9;
        return Vec2{std::clamp(p[0], lo0, lo0 + h - eps), std::clamp(p[1], lo1, lo1 + h - eps)};
    };
    const double c2 = 0.5;
    Vec2 best{0, 0};
    double bd = -1;
    for (double sgn : {1.0, -1.0}) {
        Vec2 p = clamp_in({xh[0] + sgn * c2 * h / 2 * nrm[0], xh[1] + sgn * c2 * h / 2 * nrm[1]});
        double d = dist_to_set(p, E);
        if (d > bd) bd = d, best = p;
    }
    if (bd >= h / 16) return best;
    // fallback: the farthest grid point of Q from E
    for (int a = 0; a < 33; ++a)
        for (int b = 0; b < 33; ++b) {
            Vec2 p = clamp_in({lo0 + h * a / 32, lo1 + h * b / 32});
            double d = dist_to_set(p, E);
            if (d > bd) bd = d, best = p;
        }
    return best;
}

// Recomputes neighbor lists, Lambda#, keystones, mu and special flags.
inline void index_cover(CZCover& cv) {
    auto& S = cv.squares;
    std::size_t n = S.size();
    int L = cv.finest_level() + 1;
    std::vector<detail::IBox> box(n);
    for (std::size_t q = 0; q < n; ++q) box[q] = detail::ibox(S[q].sq, L);
    for (auto& s : S) s.neighbors.clear();
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (detail::closed_touch(box[a], box[b])) S[a].neighbors.push_back(int(b)), S[b].neighbors.push_back(int(a));
    for (auto& s : S) {
        s.sharp = std::any_of(cv.E.begin(), cv.E.end(), [&](const Vec2& p) { return detail::in_double(s.sq, p); });
        s.keystone = s.special = false;
        s.mu = -1;
    }
    // 100Q (closed) meets Q' : work at level L + 1 so the 99/2 offset is an integer
    std::vector<detail::IBox> fine(n);
    for (std::size_t q = 0; q < n; ++q) fine[q] = detail::ibox(S[q].sq, L + 1);
    auto meets100 = [&](std::size_t q, std::size_t r) {
        return detail::closed_touch(detail::dilate(fine[q], 100, 1), fine[r]);
    };
    std::vector<std::vector<int>> smaller(n);  // squares smaller than q meeting 100q
    for (std::size_t q = 0; q < n; ++q) {
        if (S[q].sq.level <= 0) continue;
        for (std::size_t r = 0; r < n; ++r)
            if (S[r].sq.level > S[q].sq.level && meets100(q, r)) smaller[q].push_back(int(r));
        S[q].keystone = smaller[q].empty();
    }
    int first_ks = -1;
    for (std::size_t q = 0; q < n; ++q)
        if (S[q].keystone) {
            first_ks = int(q);
            break;
        }
    for (std::size_t q = 0; q < n; ++q) {
        if (S[q].sq.level <= 0) {
            S[q].mu = first_ks;
            continue;
        }
        std::size_t cur = q;
        while (!S[cur].keystone) {
            // nearest smaller square meeting 100Q; ties: smaller, then lower-left corner
            int pick = -1;
            double pd = HUGE_VAL;
            for (int r : smaller[cur]) {
                double g = detail::gap2(fine[cur], fine[r]);
                bool better = pick < 0 || g < pd;
                if (!better && g == pd) {
                    const auto &a = S[r].sq, &b = S[pick].sq;
                    if (a.level > b.level) better = true;
                    else if (a.level == b.level)
                        better = std::make_pair(fine[r].x0, fine[r].y0) < std::make_pair(fine[pick].x0, fine[pick].y0);
                }
                if (better) pick = r, pd = g;
            }
            cur = std::size_t(pick);
        }
        S[q].mu = int(cur);
    }
    for (std::size_t q = 0; q < n; ++q) {
        if (S[q].sharp) S[q].special = true;
        if (S[q].sq.level <= 0) continue;
        for (int r : S[q].neighbors)
            if (S[r].sq.level > 0 && (S[r].mu != S[q].mu || S[r].sharp)) S[q].special = true;
    }
    for (auto& s : S) s.x_sharp = representative_point(s.sq, cv.E);
}

// CZ decomposition driven by the niceness test.
inline CZCover decompose(const std::vector<Vec2>& E, const CZOptions& opt = {},
                         std::optional<std::vector<DyadicSquare>> region = std::nullopt) {
    for (std::size_t a = 0; a < E.size(); ++a) {
        if (!std::isfinite(E[a][0]) || !std::isfinite(E[a][1])) throw InputError("non-finite point");
        for (std::size_t b = a + 1; b < E.size(); ++b)
            if (E[a] == E[b]) throw InputError("duplicate points");
    }
    CZCover cv;
    cv.E = E;
    cv.opt = opt;
    cv.region = region ? *region : detail::default_region(E);
    OracleOptions oo;
    oo.k = opt.k, oo.c_nice = opt.c_nice, oo.radius_cap = opt.radius_cap, oo.dirs = opt.dirs;
    std::map<std::pair<int, int>, bool> memo;  // (point, level) -> diameter test passed
    auto nice = [&](const DyadicSquare& Q) {
        double h = Q.side();
        for (std::size_t p = 0; p < E.size(); ++p) {
            if (!detail::in_double(Q, E[p])) continue;
            auto key = std::make_pair(int(p), Q.level);
            auto it = memo.find(key);
            if (it == memo.end()) {
                bool ok = sigma_diameter_at_least(E[p], E, opt.k, opt.radius_cap * h, opt.dirs, opt.c_nice * h);
                it = memo.emplace(key, ok).first;
            }
            if (!it->second) return false;
        }
        return true;
    };
    std::vector<DyadicSquare> work(cv.region.begin(), cv.region.end()), keep;
    while (!work.empty()) {
        DyadicSquare Q = work.back();
        work.pop_back();
        if (nice(Q)) {
            keep.push_back(Q);
            continue;
        }
        if (Q.level >= opt.max_depth)
            throw InternalError("decompose: depth cap reached at square level " + std::to_string(Q.level) + " (" +
                                std::to_string(Q.i) + ", " + std::to_string(Q.j) + ")");
        for (int a = 1; a >= 0; --a)
            for (int b = 1; b >= 0; --b) work.push_back({Q.level + 1, 2 * Q.i + a, 2 * Q.j + b});
    }
    std::sort(keep.begin(), keep.end());
    for (const auto& q : keep) cv.squares.push_back(CZSquare{q});
    index_cover(cv);
    return cv;
}

// Checks disjointness, coverage of the region, neighbor ratios in [1/4, 4] and the
// (9/8)-dilate intersection count <= 21.
inline CoverReport validate_cover(const CZCover& cv) {
    CoverReport rep;
    const auto& S = cv.squares;
    std::size_t n = S.size();
    int L = std::max(cv.finest_level(), 0) + 4;
    std::vector<detail::IBox> box(n);
    for (std::size_t q = 0; q < n; ++q) box[q] = detail::ibox(S[q].sq, L);
    __int128 area = 0, region_area = 0;
    for (auto& b : box) area += __int128(b.x1 - b.x0) * (b.y1 - b.y0);
    for (auto& r : cv.region) {
        auto b = detail::ibox(r, L);
        region_area += __int128(b.x1 - b.x0) * (b.y1 - b.y0);
    }
    for (std::size_t a = 0; a < n; ++a) {
        bool inside = false;
        for (auto& r : cv.region) {
            auto b = detail::ibox(r, L);
            if (box[a].x0 >= b.x0 && box[a].x1 <= b.x1 && box[a].y0 >= b.y0 && box[a].y1 <= b.y1) inside = true;
        }
        if (!inside) {
            rep.covers_region = false;
            rep.violations.push_back("square outside the region");
        }
    }
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (detail::open_overlap(box[a], box[b])) {
                rep.disjoint = false;
                rep.violations.push_back("overlapping squares");
            }
    if (area != region_area) {
        rep.covers_region = false;
        rep.violations.push_back("squares do not cover the region");
    }
    for (std::size_t a = 0; a < n; ++a) {
        int cnt = 0;
        auto da = detail::dilate(box[a], 9, 8);
        for (std::size_t b = 0; b < n; ++b) {
            if (detail::closed_touch(box[a], box[b]) && a < b && std::abs(S[a].sq.level - S[b].sq.level) > 2) {
                ++rep.neighbor_ratio_violations;
                rep.violations.push_back("neighbor scale ratio outside [1/4, 4]");
            }
            if (detail::open_overlap(da, detail::dilate(box[b], 9, 8))) ++cnt;
        }
        rep.max_dilate_count = std::max(rep.max_dilate_count, cnt);
    }
    if (rep.max_dilate_count > 21) rep.violations.push_back("a (9/8)-dilate meets more than 21 dilates");
    return rep;
}

inline std::vector<int> keystones(const CZCover& cv) {
    std::vector<int> out;
    for (std::size_t q = 0; q < cv.squares.size(); ++q)
        if (cv.squares[q].keystone) out.push_back(int(q));
    return out;
}

struct MuMap {
    std::vector<int> mu;
    std::vector<int> special;
};

inline MuMap mu_map(const CZCover& cv) {
    MuMap m;
    for (std::size_t q = 0; q < cv.squares.size(); ++q) {
        m.mu.push_back(cv.squares[q].mu);
        if (cv.squares[q].special) m.special.push_back(int(q));
    }
    return m;
}

// Cutoff ramps of width delta/2 centered on each face: chi_Q == 1 on (1/2)Q, supported in (3/2)Q.
inline constexpr double kCZMargin = 0.25;
inline constexpr double kCZInset = 0.25;

// Partition of unity theta_Q == chi_Q / sum chi, chi_Q supported in (1 + 2 margin)Q.
inline CellSetPtr cz_cell_set(const CZCover& cv) {
    return std::make_shared<CellSet>(2, cv.cells(), kCZMargin, kCZInset);
}

inline std::vector<FuncExpr> make_cz_partition(const CZCover& cv) {
    auto rep = validate_cover(cv);
    if (!rep.covers_region || !rep.disjoint) throw CoverError("make_cz_partition: input is not a cover");
    return make_partition(cz_cell_set(cv));
}

} // namespace nnc2

#endif
