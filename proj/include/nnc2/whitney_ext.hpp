#ifndef NNC2_WHITNEY_EXT_HPP
#define NNC2_WHITNEY_EXT_HPP

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <vector>

#include "errors.hpp"
#include "funcexpr.hpp"
#include "jets.hpp"

namespace nnc2 {

// Cutoff chi_y of a single-point extension: == 1 on B(y, 1/8), supported in B(y, 1).
inline constexpr double kWhitneyInner = 0.125;
inline constexpr double kWhitneyOuter = 1.0;
// Cell cutoffs of the extension ramp across each face over [face - h/2, face + h/2],
// so they are supported in the doubled cell 2Q and equal neighbors sum to 1.
inline constexpr double kWhitneyMargin = 0.5;
inline constexpr double kWhitneyInset = 0.5;

struct WhitneyCell {
    DyadicCell cell;
    int source = -1;  // index into S of the point whose jet is used, -1 for the zero piece
    int kind = 3;     // 1, 2 or 3 as in the construction
};

namespace detail {

// points p with |p - center|_inf <= side (the doubled cell, closed)
inline std::vector<int> points_in_double(const std::vector<Vec2>& S, int dim, const DyadicCell& c) {
    std::vector<int> out;
    Vec2 ctr = c.center();
    double h = c.side();
    for (std::size_t k = 0; k < S.size(); ++k) {
        if (std::abs(S[k][0] - ctr[0]) > h) continue;
        if (dim == 2 && std::abs(S[k][1] - ctr[1]) > h) continue;
        out.push_back(int(k));
    }
    return out;
}

inline std::vector<DyadicCell> children(const DyadicCell& c, int dim) {
    std::vector<DyadicCell> out;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < (dim == 2 ? 2 : 1); ++b) out.push_back({c.level + 1, 2 * c.i + a, dim == 2 ? 2 * c.j + b : 0});
    return out;
}

inline int nearest_of(const std::vector<Vec2>& S, const std::vector<int>& cand, const Vec2& x) {
    int best = cand.front();
    double bd = dist(S[best], x);
    for (int k : cand) {
        double d = dist(S[k], x);
        if (d < bd || (d == bd && k < best)) best = k, bd = d;
    }
    return best;
}

} // namespace detail

// Whitney cover of the unit cells around S plus one ring.
inline std::vector<WhitneyCell> whitney_cover(const std::vector<Vec2>& S, int dim) {
    if (S.empty()) throw InputError("whitney_cover: empty point set");
    if (dim != 1 && dim != 2) throw InputError("whitney_cover: dimension must be 1 or 2");
    double lo[2] = {S[0][0], S[0][1]}, hi[2] = {S[0][0], S[0][1]};
    for (const auto& p : S)
        for (int a = 0; a < 2; ++a) lo[a] = std::min(lo[a], p[a]), hi[a] = std::max(hi[a], p[a]);
    std::int64_t i0 = std::int64_t(std::floor(lo[0])) - 1, i1 = std::int64_t(std::floor(hi[0])) + 1;
    std::int64_t j0 = std::int64_t(std::floor(lo[1])) - 1, j1 = std::int64_t(std::floor(hi[1])) + 1;
    if (dim == 1) j0 = j1 = 0;

    struct Item {
        DyadicCell c;
        int parent_pick;  // point of the parent's double nearest to this cell, -1 at unit level
    };
    std::deque<Item> work;
    for (auto i = i0; i <= i1; ++i)
        for (auto j = j0; j <= j1; ++j) work.push_back({{0, i, j}, -1});

    std::vector<WhitneyCell> out;
    while (!work.empty()) {
        Item it = work.front();
        work.pop_front();
        auto in = detail::points_in_double(S, dim, it.c);
        if (in.size() <= 1) {
            WhitneyCell wc{it.c, -1, 3};
            if (in.size() == 1) {
                wc.source = in[0], wc.kind = 1;
            } else if (it.c.level > 0) {
                wc.source = it.parent_pick, wc.kind = 2;
            }
            out.push_back(wc);
            continue;
        }
        if (it.c.level >= 60) throw InternalError("whitney_cover: refinement did not terminate");
        for (const auto& ch : detail::children(it.c, dim))
            work.push_back({ch, detail::nearest_of(S, in, ch.center())});
    }
    std::sort(out.begin(), out.end(), [](const WhitneyCell& a, const WhitneyCell& b) { return a.cell < b.cell; });
    return out;
}

// The 4.19 level: max(|jet|, |grad|^2 / (4 value)).
inline double cplus_level(const Jet& j) {
    double g2 = sq(j.grad[0]) + sq(j.grad[1]);
    double m = jet_norm(j);
    if (g2 > 0) m = std::max(m, g2 / (4 * j.value));
    return m;
}

// chi_y * (P + M|x - y|^2); zero when P(y) = 0.
inline FuncExpr single_point_extension(const Jet& j) {
    if (j.value < 0) throw InputError("single-point extension of a negative value");
    double g2 = sq(j.grad[0]) + sq(j.grad[1]);
    if (j.value == 0) {
        if (g2 > 0) throw InputError("single-point extension: zero value with nonzero gradient");
        return make_constant(0);
    }
    double M = cplus_level(j);
    FuncExpr chi = make_bump(j.base, kWhitneyInner, kWhitneyOuter, j.dim);
    FuncExpr pt = make_poly(j.base, {j.value, j.grad[0], j.grad[1], M, 0, j.dim == 2 ? M : 0.0});
    return make_product({chi, pt});
}

namespace detail {

template <class PieceFn>
FuncExpr glue_over_cover(const WhitneyField& f, PieceFn piece_for) {
    std::vector<Vec2> S;
    for (const auto& j : f.jets) S.push_back(j.base);
    auto cover = whitney_cover(S, f.dim);
    std::vector<DyadicCell> cells;
    std::vector<FuncExpr> pieces;
    std::map<int, FuncExpr> cache;
    for (const auto& wc : cover) {
        cells.push_back(wc.cell);
        if (wc.source < 0) {
            pieces.push_back(nullptr);
            continue;
        }
        auto it = cache.find(wc.source);
        if (it == cache.end()) it = cache.emplace(wc.source, piece_for(f.jets[wc.source])).first;
        pieces.push_back(is_zero_constant(it->second) ? nullptr : it->second);
    }
    return make_glue(std::make_shared<CellSet>(f.dim, cells, kWhitneyMargin, kWhitneyInset), pieces);
}

} // namespace detail

// Nonnegative extension with exact jets on S.
inline FuncExpr extend_nonneg(const WhitneyField& f) {
    check_field(f);
    if (!m_functional(f)) throw InputError("extend_nonneg: field is not in W2+ (negative value or zero value with slope)");
    if (f.size() == 1) return single_point_extension(f.jets[0]);
    return detail::glue_over_cover(f, [](const Jet& j) { return single_point_extension(j); });
}

// Classical extension, linear in the field.
inline FuncExpr extend_unconstrained(const WhitneyField& f) {
    check_field(f);
    return detail::glue_over_cover(f, [](const Jet& j) -> FuncExpr {
        if (j.value == 0 && j.grad[0] == 0 && j.grad[1] == 0) return make_constant(0);
        FuncExpr chi = make_bump(j.base, kWhitneyInner, kWhitneyOuter, j.dim);
        return make_product({chi, make_affine(j.base, j.value, j.grad)});
    });
}

} // namespace nnc2

#endif
