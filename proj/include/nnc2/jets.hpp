#ifndef NNC2_JETS_HPP
#define NNC2_JETS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "funcexpr.hpp"

namespace nnc2 {

// Affine polynomial value + grad.(y - base). In 1-D only index 0 is used.
struct Jet {
    int dim = 2;
    Vec2 base{0, 0};
    double value = 0;
    Vec2 grad{0, 0};

    static Jet make(int dim, Vec2 base, double value, Vec2 grad = {0, 0}) {
        if (dim == 1) base[1] = 0, grad[1] = 0;
        return Jet{dim, base, value, grad};
    }
};

struct TaylorBox {
    Vec2 base{0, 0};
    double delta = 1;
    double M = 1;
};

struct WhitneyField {
    int dim = 2;
    std::vector<Jet> jets;

    std::size_t size() const { return jets.size(); }
};

inline double sq(double x) { return x * x; }
inline double dist(const Vec2& a, const Vec2& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }
inline double norm2(const Vec2& g) { return std::hypot(g[0], g[1]); }

inline std::pair<double, Vec2> transport(const Jet& j, const Vec2& y) {
    double v = j.value + j.grad[0] * (y[0] - j.base[0]);
    if (j.dim == 2) v += j.grad[1] * (y[1] - j.base[1]);
    return {v, j.grad};
}

inline Jet transport_jet(const Jet& j, const Vec2& y) {
    auto [v, g] = transport(j, y);
    return Jet::make(j.dim, y, v, g);
}

// l2 norm of (P(x), grad P)
inline double jet_norm(const Jet& j) { return std::sqrt(sq(j.value) + sq(j.grad[0]) + sq(j.grad[1])); }

inline void check_field(const WhitneyField& f) {
    if (f.jets.empty()) throw InputError("Whitney field is empty");
    for (std::size_t a = 0; a < f.jets.size(); ++a)
        for (std::size_t b = a + 1; b < f.jets.size(); ++b)
            if (f.jets[a].base == f.jets[b].base) throw InputError("Whitney field has coincident points");
}

// pair row of the W^2 seminorm, evaluated at the base of `x`
inline double pair_term(const Jet& x, const Jet& y) {
    double d = dist(x.base, y.base);
    double v = x.value - transport(y, x.base).first;
    double gs = x.grad[0] - y.grad[0], gt = x.grad[1] - y.grad[1];
    return std::sqrt(sq(v / (d * d)) + (sq(gs) + sq(gt)) / (d * d));
}

inline double w2_first_term(const WhitneyField& f) {
    double m = 0;
    for (const auto& j : f.jets) m = std::max(m, jet_norm(j));
    return m;
}

inline double w2_pair_term(const WhitneyField& f) {
    double m = 0;
    for (std::size_t a = 0; a < f.jets.size(); ++a)
        for (std::size_t b = 0; b < f.jets.size(); ++b)
            if (a != b) m = std::max(m, pair_term(f.jets[a], f.jets[b]));
    return m;
}

inline double w2_seminorm(const WhitneyField& f) {
    check_field(f);
    return w2_first_term(f) + w2_pair_term(f);
}

// nullopt means infeasible (no nonnegative extension)
inline std::optional<double> m_functional(const WhitneyField& f) {
    if (f.jets.empty()) throw InputError("Whitney field is empty");
    double m = 0;
    for (const auto& j : f.jets) {
        double g2 = sq(j.grad[0]) + sq(j.grad[1]);
        if (j.value < 0) return std::nullopt;
        if (g2 == 0) continue;
        if (j.value == 0) return std::nullopt;
        m = std::max(m, g2 / (4 * j.value));
    }
    return m;
}

inline std::optional<double> w2plus_norm(const WhitneyField& f) {
    auto m = m_functional(f);
    if (!m) return std::nullopt;
    return w2_seminorm(f) + *m;
}

inline bool in_cplus(const Jet& j, double M) {
    double g2 = sq(j.grad[0]) + sq(j.grad[1]);
    return jet_norm(j) <= M && j.value >= 0 && g2 <= 4 * M * j.value;
}

inline bool taylor_box_contains(const TaylorBox& b, const Jet& j) {
    auto [v, g] = transport(j, b.base);
    double d = b.delta;
    return std::abs(v) <= b.M * d * d && std::abs(g[0]) <= b.M * d && std::abs(g[1]) <= b.M * d;
}

} // namespace nnc2

#endif
