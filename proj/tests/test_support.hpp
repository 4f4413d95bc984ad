#ifndef NNC2_TEST_SUPPORT_HPP
#define NNC2_TEST_SUPPORT_HPP

#include <random>
#include <vector>

#include "nnc2/nnc2.hpp"

namespace nnc2::test {

inline void random_2d(std::mt19937& rng, int n, std::vector<Vec2>& E, std::vector<double>& f, double zero_frac = 0.3) {
    std::uniform_real_distribution<double> u(0, 1);
    E.clear(), f.clear();
    for (int i = 0; i < n; ++i) {
        E.push_back({u(rng), u(rng)});
        double z = u(rng), v = u(rng);
        f.push_back(z < zero_frac ? 0 : v);
    }
}

inline void random_1d(std::mt19937& rng, int n, std::vector<double>& xs, std::vector<double>& f, double zero_frac = 0.3) {
    std::uniform_real_distribution<double> u(0, 1);
    xs.clear(), f.clear();
    while (int(xs.size()) < n) {
        double x = u(rng);
        if (std::find(xs.begin(), xs.end(), x) == xs.end()) xs.push_back(x);
    }
    std::sort(xs.begin(), xs.end());
    for (int i = 0; i < n; ++i) {
        double z = u(rng), v = u(rng);
        f.push_back(z < zero_frac ? 0 : v);
    }
}

// Norm formula evaluated directly: first term max |(P(x), grad P)|, pair term over ordered pairs.
inline double w2_reference(const WhitneyField& w) {
    double first = 0, pair = 0;
    for (const auto& j : w.jets) first = std::max(first, std::sqrt(j.value * j.value + j.grad[0] * j.grad[0] + j.grad[1] * j.grad[1]));
    for (const auto& a : w.jets)
        for (const auto& b : w.jets) {
            if (&a == &b) continue;
            double dx = a.base[0] - b.base[0], dy = a.base[1] - b.base[1], d = std::sqrt(dx * dx + dy * dy);
            double pb = b.value + b.grad[0] * (a.base[0] - b.base[0]) + b.grad[1] * (a.base[1] - b.base[1]);
            double v = (a.value - pb) / (d * d);
            double g0 = (a.grad[0] - b.grad[0]) / d, g1 = (a.grad[1] - b.grad[1]) / d;
            pair = std::max(pair, std::sqrt(v * v + g0 * g0 + g1 * g1));
        }
    return first + pair;
}

// Random expression over every node kind, with smooth scales of order one.
inline FuncExpr random_expr(std::mt19937& rng, int depth) {
    std::uniform_real_distribution<double> u(-1, 1);
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 8);
    auto vec = [&] { return Vec2{u(rng), u(rng)}; };
    switch (pick(rng)) {
    case 0:
        return make_poly(vec(), {u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)});
    case 1: {
        double r = 0.5 + 0.3 * u(rng);
        return make_bump(vec(), r, r + 0.8 + 0.3 * u(rng), 2);
    }
    case 2: {
        auto set = std::make_shared<CellSet>(2, std::vector<DyadicCell>{{1, -1, -1}, {1, 0, -1}, {1, -1, 0}, {1, 0, 0}}, 0.25, 0.25);
        return make_partition(set)[std::size_t(rng() % 4)];
    }
    case 3:
        return make_sum({random_expr(rng, depth - 1), random_expr(rng, depth - 1)});
    case 4:
        return make_product({random_expr(rng, depth - 1), random_expr(rng, depth - 1)});
    case 5:
        return make_scale(2 * u(rng), random_expr(rng, depth - 1));
    case 6:
        return make_compose(random_expr(rng, depth - 1), {1 + 0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng), 1 + 0.3 * u(rng)}, vec());
    case 7:
        return make_lift(make_product({make_step(-0.5, 0.5 + 0.2 * u(rng)), random_expr(rng, depth - 1)}), Vec2{0.8, 0.6}, u(rng));
    default: {
        auto set = std::make_shared<CellSet>(2, std::vector<DyadicCell>{{0, -1, -1}, {0, 0, -1}, {0, -1, 0}, {0, 0, 0}}, 0.25, 0.25);
        std::vector<FuncExpr> pieces;
        for (int i = 0; i < 4; ++i) pieces.push_back(i == 2 ? nullptr : random_expr(rng, depth - 1));
        return make_glue(set, pieces);
    }
    }
}

} // namespace nnc2::test

#endif
