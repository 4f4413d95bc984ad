#ifndef NNC2_FUNCEXPR_HPP
#define NNC2_FUNCEXPR_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace nnc2 {

using Vec2 = std::array<double, 2>;

// value, gradient and Hessian of a function of (s, t)
struct J2 {
    double v = 0, gx = 0, gy = 0, hxx = 0, hxy = 0, hyy = 0;

    bool is_zero() const {
        return v == 0 && gx == 0 && gy == 0 && hxx == 0 && hxy == 0 && hyy == 0;
    }
    static J2 constant(double c) { return J2{c, 0, 0, 0, 0, 0}; }
};

inline J2 operator+(const J2& a, const J2& b) {
    return {a.v + b.v, a.gx + b.gx, a.gy + b.gy, a.hxx + b.hxx, a.hxy + b.hxy, a.hyy + b.hyy};
}
inline J2 operator-(const J2& a, const J2& b) {
    return {a.v - b.v, a.gx - b.gx, a.gy - b.gy, a.hxx - b.hxx, a.hxy - b.hxy, a.hyy - b.hyy};
}
inline J2 operator*(double c, const J2& a) {
    return {c * a.v, c * a.gx, c * a.gy, c * a.hxx, c * a.hxy, c * a.hyy};
}
inline J2 operator*(const J2& a, const J2& b) {
    return {a.v * b.v,
            a.gx * b.v + a.v * b.gx,
            a.gy * b.v + a.v * b.gy,
            a.hxx * b.v + 2 * a.gx * b.gx + a.v * b.hxx,
            a.hxy * b.v + a.gx * b.gy + a.gy * b.gx + a.v * b.hxy,
            a.hyy * b.v + 2 * a.gy * b.gy + a.v * b.hyy};
}
inline J2 operator/(const J2& a, const J2& b) {
    J2 q;
    q.v = a.v / b.v;
    q.gx = (a.gx - q.v * b.gx) / b.v;
    q.gy = (a.gy - q.v * b.gy) / b.v;
    q.hxx = (a.hxx - q.v * b.hxx - 2 * q.gx * b.gx) / b.v;
    q.hxy = (a.hxy - q.v * b.hxy - q.gx * b.gy - q.gy * b.gx) / b.v;
    q.hyy = (a.hyy - q.v * b.hyy - 2 * q.gy * b.gy) / b.v;
    return q;
}

struct Jet2Sample {
    Vec2 x{0, 0};
    double value = 0;
    Vec2 gradient{0, 0};
    std::array<std::array<double, 2>, 2> hessian{{{0, 0}, {0, 0}}};
};

inline Jet2Sample to_sample(const Vec2& x, const J2& j) {
    Jet2Sample s;
    s.x = x;
    s.value = j.v;
    s.gradient = {j.gx, j.gy};
    s.hessian = {{{j.hxx, j.hxy}, {j.hxy, j.hyy}}};
    return s;
}

// Axis-aligned square [lo, lo + side]^2, or an interval when used in 1-D.
struct Square {
    Vec2 lo{0, 0};
    double side = 1;
};

// Quintic smoothstep p(u) = 6u^5 - 15u^4 + 10u^3, clamped to [0,1].
// max|p'| = 15/8, max|p''| = 10/sqrt(3).
struct Smoothstep {
    static double v(double u) {
        if (u <= 0) return 0;
        if (u >= 1) return 1;
        return u * u * u * (10 + u * (-15 + 6 * u));
    }
    static double d1(double u) {
        if (u <= 0 || u >= 1) return 0;
        double w = u * (1 - u);
        return 30 * w * w;
    }
    static double d2(double u) {
        if (u <= 0 || u >= 1) return 0;
        return 60 * u * (1 - u) * (1 - 2 * u);
    }
};

// K_bump: for make_bump with r_in >= r_out - r_in,
// |d^a psi| <= K_bump (r_out - r_in)^{-|a|}, |a| <= 2.
inline constexpr double K_bump = 8.0;

// Dyadic cell: [i, i+1) x [j, j+1) scaled by 2^-level. In 1-D j is ignored.
struct DyadicCell {
    int level = 0;
    std::int64_t i = 0, j = 0;

    double side() const { return std::ldexp(1.0, -level); }
    Vec2 lo() const { return {double(i) * side(), double(j) * side()}; }
    Vec2 center() const {
        double h = side();
        return {(double(i) + 0.5) * h, (double(j) + 0.5) * h};
    }
    bool operator==(const DyadicCell& o) const { return level == o.level && i == o.i && j == o.j; }
    bool operator<(const DyadicCell& o) const {
        if (level != o.level) return level < o.level;
        if (i != o.i) return i < o.i;
        return j < o.j;
    }
};

// Set of disjoint dyadic cells with per-axis cutoffs. Each face carries a smoothstep ramp
// from (face - margin h) outside to (face + inset h) inside, so chi is supported in
// (1 + 2 margin)Q. The default (1/16, 0) gives chi == 1 on Q and support in (9/8)Q.
class CellSet {
public:
    CellSet(int dim, std::vector<DyadicCell> cells, double margin = 1.0 / 16, double inset = 0)
        : dim_(dim), margin_(margin), inset_(inset), cells_(std::move(cells)) {
        if (dim_ != 1 && dim_ != 2) throw InputError("cell set dimension must be 1 or 2");
        if (!(margin_ > 0 && margin_ <= 0.5)) throw InputError("cell set margin must lie in (0, 1/2]");
        if (!(inset_ >= 0 && inset_ <= 0.5)) throw InputError("cell set inset must lie in [0, 1/2]");
        for (std::size_t k = 0; k < cells_.size(); ++k) {
            auto& c = cells_[k];
            if (dim_ == 1) c.j = 0;
            auto& lv = by_level_[c.level];
            lv[{c.i, c.j}] = int(k);
        }
    }

    int dim() const { return dim_; }
    double margin() const { return margin_; }
    double inset() const { return inset_; }
    const std::vector<DyadicCell>& cells() const { return cells_; }
    int find(const DyadicCell& c) const {
        auto it = by_level_.find(c.level);
        if (it == by_level_.end()) return -1;
        auto jt = it->second.find({c.i, dim_ == 1 ? 0 : c.j});
        return jt == it->second.end() ? -1 : jt->second;
    }

    // plateau cutoff of one cell
    J2 chi(int k, const Vec2& x) const {
        const auto& c = cells_[k];
        double h = c.side(), m = h * margin_, n = h * inset_;
        Vec2 lo = c.lo();
        double ax[3], ay[3] = {1, 0, 0};
        axis(x[0], lo[0], lo[0] + h, m, n, ax);
        if (ax[0] == 0) return {};
        if (dim_ == 2) {
            axis(x[1], lo[1], lo[1] + h, m, n, ay);
            if (ay[0] == 0) return {};
        }
        return {ax[0] * ay[0], ax[1] * ay[0], ax[0] * ay[1], ax[2] * ay[0], ax[1] * ay[1], ax[0] * ay[2]};
    }

    // cells whose (9/8)-dilate contains x, with their cutoff jets
    std::vector<std::pair<int, J2>> active(const Vec2& x) const {
        std::vector<std::pair<int, J2>> out;
        for (const auto& [level, table] : by_level_) {
            double h = std::ldexp(1.0, -level);
            auto i0 = std::int64_t(std::floor(x[0] / h));
            auto j0 = dim_ == 2 ? std::int64_t(std::floor(x[1] / h)) : 0;
            for (std::int64_t di = -1; di <= 1; ++di) {
                for (std::int64_t dj = (dim_ == 2 ? -1 : 0); dj <= (dim_ == 2 ? 1 : 0); ++dj) {
                    auto it = table.find({i0 + di, j0 + dj});
                    if (it == table.end()) continue;
                    J2 c = chi(it->second, x);
                    if (c.v != 0 || !c.is_zero()) out.emplace_back(it->second, c);
                }
            }
        }
        std::sort(out.begin(), out.end(), [](auto& a, auto& b) { return a.first < b.first; });
        return out;
    }

private:
    static void axis(double u, double a, double b, double m, double n, double out[3]) {
        double r = m + n;
        if (u >= a + n && u <= b - n) {
            out[0] = 1, out[1] = 0, out[2] = 0;
        } else if (u < 0.5 * (a + b)) {
            double w = (u - (a - m)) / r;
            out[0] = Smoothstep::v(w), out[1] = Smoothstep::d1(w) / r, out[2] = Smoothstep::d2(w) / (r * r);
        } else {
            double w = ((b + m) - u) / r;
            out[0] = Smoothstep::v(w), out[1] = -Smoothstep::d1(w) / r, out[2] = Smoothstep::d2(w) / (r * r);
        }
    }

    struct PairHash {
        std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& p) const {
            return std::hash<std::int64_t>()(p.first * 1000003 ^ p.second);
        }
    };

    int dim_;
    double margin_, inset_;
    std::vector<DyadicCell> cells_;
    std::map<int, std::unordered_map<std::pair<std::int64_t, std::int64_t>, int, PairHash>> by_level_;
};

using CellSetPtr = std::shared_ptr<const CellSet>;

class Node;
using FuncExpr = std::shared_ptr<const Node>;

class Node {
public:
    enum class Kind { Poly, Bump, Step, Sum, Product, Scale, Compose, Weight, Glue, Restrict };
    virtual ~Node() = default;
    virtual Kind kind() const = 0;
    virtual J2 eval(const Vec2& x) const = 0;
};

// Polynomial of total degree <= 2 in w = x - origin:
// c0 + c1 w_s + c2 w_t + c3 w_s^2 + c4 w_s w_t + c5 w_t^2
class PolyNode : public Node {
public:
    PolyNode(Vec2 origin, std::array<double, 6> c) : origin(origin), c(c) {}
    Kind kind() const override { return Kind::Poly; }
    J2 eval(const Vec2& x) const override {
        double s = x[0] - origin[0], t = x[1] - origin[1];
        return {c[0] + c[1] * s + c[2] * t + c[3] * s * s + c[4] * s * t + c[5] * t * t,
                c[1] + 2 * c[3] * s + c[4] * t,
                c[2] + c[4] * s + 2 * c[5] * t,
                2 * c[3], c[4], 2 * c[5]};
    }
    Vec2 origin;
    std::array<double, 6> c;
};

// Radial cutoff: 1 on |x - center| <= r_in, 0 for |x - center| >= r_out.
// dim == 1 measures distance along s only.
class BumpNode : public Node {
public:
    BumpNode(Vec2 center, double r_in, double r_out, int dim)
        : center(center), r_in(r_in), r_out(r_out), dim(dim) {}
    Kind kind() const override { return Kind::Bump; }
    J2 eval(const Vec2& x) const override {
        double ws = x[0] - center[0], wt = dim == 2 ? x[1] - center[1] : 0.0;
        double r2 = ws * ws + wt * wt;
        if (r2 <= r_in * r_in) return J2::constant(1);
        if (r2 >= r_out * r_out) return {};
        double r = std::sqrt(r2), w = r_out - r_in, u = (r - r_in) / w;
        double p = 1 - Smoothstep::v(u), p1 = -Smoothstep::d1(u) / w, p2 = -Smoothstep::d2(u) / (w * w);
        double es = ws / r, et = wt / r;
        double q = p1 / r;
        return {p, p1 * es, p1 * et,
                p2 * es * es + q * (1 - es * es),
                p2 * es * et - q * es * et,
                p2 * et * et + q * (1 - et * et)};
    }
    Vec2 center;
    double r_in, r_out;
    int dim;
};

// Smooth step in s: 0 on the a side, 1 on the b side (a != b, either order).
class StepNode : public Node {
public:
    StepNode(double a, double b) : a(a), b(b) {}
    Kind kind() const override { return Kind::Step; }
    J2 eval(const Vec2& x) const override {
        double w = b - a, u = (x[0] - a) / w;
        return {Smoothstep::v(u), Smoothstep::d1(u) / w, 0, Smoothstep::d2(u) / (w * w), 0, 0};
    }
    double a, b;
};

class SumNode : public Node {
public:
    explicit SumNode(std::vector<FuncExpr> ch) : children(std::move(ch)) {}
    Kind kind() const override { return Kind::Sum; }
    J2 eval(const Vec2& x) const override {
        J2 r;
        for (const auto& c : children) r = r + c->eval(x);
        return r;
    }
    std::vector<FuncExpr> children;
};

// Children are evaluated left to right; an exactly zero factor stops evaluation.
class ProductNode : public Node {
public:
    explicit ProductNode(std::vector<FuncExpr> ch) : children(std::move(ch)) {}
    Kind kind() const override { return Kind::Product; }
    J2 eval(const Vec2& x) const override {
        J2 r = J2::constant(1);
        for (const auto& c : children) {
            J2 f = c->eval(x);
            if (f.is_zero()) return {};
            r = r * f;
        }
        return r;
    }
    std::vector<FuncExpr> children;
};

class ScaleNode : public Node {
public:
    ScaleNode(double c, FuncExpr ch) : c(c), child(std::move(ch)) {}
    Kind kind() const override { return Kind::Scale; }
    J2 eval(const Vec2& x) const override { return c * child->eval(x); }
    double c;
    FuncExpr child;
};

// child(A x + b). Lifting a univariate child along a chart uses A = [e; 0].
class ComposeNode : public Node {
public:
    ComposeNode(FuncExpr ch, std::array<double, 4> A, Vec2 b) : child(std::move(ch)), A(A), b(b) {}
    Kind kind() const override { return Kind::Compose; }
    J2 eval(const Vec2& x) const override {
        Vec2 y{A[0] * x[0] + A[1] * x[1] + b[0], A[2] * x[0] + A[3] * x[1] + b[1]};
        J2 g = child->eval(y);
        // grad = A^T g, H = A^T H A
        double h00 = g.hxx, h01 = g.hxy, h11 = g.hyy;
        auto hq = [&](int p, int q) {
            double ap0 = A[0 + p], ap1 = A[2 + p], aq0 = A[0 + q], aq1 = A[2 + q];
            return ap0 * (h00 * aq0 + h01 * aq1) + ap1 * (h01 * aq0 + h11 * aq1);
        };
        return {g.v, A[0] * g.gx + A[2] * g.gy, A[1] * g.gx + A[3] * g.gy, hq(0, 0), hq(0, 1), hq(1, 1)};
    }
    FuncExpr child;
    std::array<double, 4> A;
    Vec2 b;
};

// theta_k = chi_k / sum chi over the cell set
class WeightNode : public Node {
public:
    WeightNode(CellSetPtr set, int index) : set(std::move(set)), index(index) {}
    Kind kind() const override { return Kind::Weight; }
    J2 eval(const Vec2& x) const override {
        auto act = set->active(x);
        J2 num, den;
        for (auto& [k, c] : act) {
            den = den + c;
            if (k == index) num = c;
        }
        if (num.is_zero()) return {};
        return num / den;
    }
    CellSetPtr set;
    int index;
};

// sum_k theta_k * piece_k; null pieces are zero. Zero outside the union of dilates.
class GlueNode : public Node {
public:
    GlueNode(CellSetPtr set, std::vector<FuncExpr> pieces) : set(std::move(set)), pieces(std::move(pieces)) {
        if (this->pieces.size() != this->set->cells().size())
            throw InputError("glue: one piece per cell required");
    }
    Kind kind() const override { return Kind::Glue; }
    J2 eval(const Vec2& x) const override {
        auto act = set->active(x);
        if (act.empty()) return {};
        J2 num, den;
        for (auto& [k, c] : act) {
            den = den + c;
            if (pieces[k]) num = num + c * pieces[k]->eval(x);
        }
        return num / den;
    }
    CellSetPtr set;
    std::vector<FuncExpr> pieces;
};

// Marks the square on which a piece is claimed valid; evaluation passes through.
class RestrictNode : public Node {
public:
    RestrictNode(FuncExpr ch, Square sq) : child(std::move(ch)), square(sq) {}
    Kind kind() const override { return Kind::Restrict; }
    J2 eval(const Vec2& x) const override { return child->eval(x); }
    FuncExpr child;
    Square square;
};

// ---- constructors ----

inline FuncExpr make_constant(double c) {
    return std::make_shared<PolyNode>(Vec2{0, 0}, std::array<double, 6>{c, 0, 0, 0, 0, 0});
}
inline FuncExpr make_poly(Vec2 origin, std::array<double, 6> c) { return std::make_shared<PolyNode>(origin, c); }
inline FuncExpr make_affine(Vec2 origin, double value, Vec2 grad) {
    return make_poly(origin, {value, grad[0], grad[1], 0, 0, 0});
}
inline FuncExpr make_bump(Vec2 center, double r_in, double r_out, int dim = 2) {
    if (!(r_in > 0 && r_out > r_in) || !std::isfinite(r_out))
        throw InputError("make_bump: need 0 < r_in < r_out");
    return std::make_shared<BumpNode>(center, r_in, r_out, dim);
}
inline FuncExpr make_step(double a, double b) {
    if (!(a != b)) throw InputError("make_step: degenerate transition");
    return std::make_shared<StepNode>(a, b);
}
inline FuncExpr make_sum(std::vector<FuncExpr> ch) {
    std::erase_if(ch, [](const FuncExpr& e) { return !e; });
    if (ch.empty()) return make_constant(0);
    if (ch.size() == 1) return ch[0];
    return std::make_shared<SumNode>(std::move(ch));
}
inline FuncExpr make_product(std::vector<FuncExpr> ch) { return std::make_shared<ProductNode>(std::move(ch)); }
inline FuncExpr make_scale(double c, FuncExpr e) { return std::make_shared<ScaleNode>(c, std::move(e)); }
inline FuncExpr make_compose(FuncExpr e, std::array<double, 4> A, Vec2 b) {
    return std::make_shared<ComposeNode>(std::move(e), A, b);
}
// univariate g lifted to g(e . x + b)
inline FuncExpr make_lift(FuncExpr g, Vec2 e, double b = 0) {
    return make_compose(std::move(g), {e[0], e[1], 0, 0}, {b, 0});
}
inline FuncExpr make_glue(CellSetPtr set, std::vector<FuncExpr> pieces) {
    return std::make_shared<GlueNode>(std::move(set), std::move(pieces));
}
inline FuncExpr make_restrict(FuncExpr e, Square sq) { return std::make_shared<RestrictNode>(std::move(e), sq); }

inline bool is_zero_constant(const FuncExpr& e) {
    if (!e || e->kind() != Node::Kind::Poly) return false;
    auto* p = static_cast<const PolyNode*>(e.get());
    return std::all_of(p->c.begin(), p->c.end(), [](double v) { return v == 0; });
}

// ---- evaluation ----

inline Jet2Sample eval_jet2(const FuncExpr& e, const Vec2& x) { return to_sample(x, e->eval(x)); }

inline double c2_pointwise(const J2& j, int dim = 2) {
    if (dim == 1) return std::sqrt(j.v * j.v + j.gx * j.gx + j.hxx * j.hxx);
    return std::sqrt(j.v * j.v + j.gx * j.gx + j.gy * j.gy + j.hxx * j.hxx + j.hxy * j.hxy + j.hyy * j.hyy);
}

// max over a grid_n (per axis) grid of the C^2 pointwise quantity. dim == 1 samples s only.
inline double c2_norm_sampled(const FuncExpr& e, const Square& region, int grid_n, int dim = 2) {
    if (grid_n < 2) grid_n = 2;
    double best = 0, h = region.side / (grid_n - 1);
    for (int a = 0; a < grid_n; ++a) {
        double s = region.lo[0] + a * h;
        if (dim == 1) {
            best = std::max(best, c2_pointwise(e->eval({s, 0}), 1));
            continue;
        }
        for (int b = 0; b < grid_n; ++b) {
            double t = region.lo[1] + b * h;
            best = std::max(best, c2_pointwise(e->eval({s, t}), 2));
        }
    }
    return best;
}

// ---- partition of unity over a cell set ----

// |d^a theta_Q| <= K_pu delta_Q^{-|a|} on covers obeying the 1/4..4 neighbor rule
inline constexpr double K_pu = 1000.0;

inline std::vector<FuncExpr> make_partition(const CellSetPtr& set) {
    std::vector<FuncExpr> out;
    out.reserve(set->cells().size());
    for (std::size_t k = 0; k < set->cells().size(); ++k) out.push_back(std::make_shared<WeightNode>(set, int(k)));
    return out;
}

} // namespace nnc2

#endif
