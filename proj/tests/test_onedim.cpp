#include <random>

#include "doctest.h"
#include "test_support.hpp"

using namespace nnc2;
using doctest::Approx;

namespace {

double max_abs_d2(const FuncExpr& F, double lo, double hi, int n = 4001) {
    double m = 0;
    for (int i = 0; i < n; ++i) m = std::max(m, std::abs(F->eval({lo + (hi - lo) * i / (n - 1), 0}).hxx));
    return m;
}

} // namespace

TEST_CASE("interpolate_1d_nonneg examples") {
    auto F = interpolate_1d_nonneg({0}, {1});
    CHECK(F->eval({0, 0}).v == Approx(1).epsilon(1e-12));
    for (double c : {0.0, 0.3, 2.0}) {
        std::vector<double> xs{-1, 0.2, 0.5, 1.7, 3}, fs(xs.size(), c);
        auto G = interpolate_1d_nonneg(xs, fs);
        for (double x : xs) CHECK(G->eval({x, 0}).v == Approx(c).epsilon(1e-12));
        for (int i = 0; i <= 400; ++i) CHECK(G->eval({-3 + 8.0 * i / 400, 0}).v >= -1e-12);
    }
    CHECK_THROWS_AS(interpolate_1d_nonneg({0, 0}, {1, 1}), InputError);
    CHECK_THROWS_AS(interpolate_1d_nonneg({1, 0}, {1, 1}), InputError);
    CHECK_THROWS_AS(interpolate_1d_nonneg({0, 1}, {1, -1}), InputError);
}

TEST_CASE("interpolate_1d_nonneg on random data") {
    std::mt19937 rng(17);
    for (int t = 0; t < 10; ++t) {
        std::vector<double> xs, fs;
        test::random_1d(rng, 4 + t * 3, xs, fs);
        auto I = build_1d_nonneg(xs, fs);
        double fmax = *std::max_element(fs.begin(), fs.end());
        for (std::size_t i = 0; i < xs.size(); ++i) CHECK(I.F->eval({xs[i], 0}).v == Approx(fs[i]).epsilon(1e-9));
        double lo = xs.front() - 2, hi = xs.back() + 2, mn = HUGE_VAL;
        for (int i = 0; i < 10000; ++i) {
            double x = lo + (hi - lo) * i / 9999;
            mn = std::min(mn, I.F->eval({x, 0}).v);
            int live = 0;
            for (const auto& w : I.weights) live += w->eval({x, 0}).v != 0;
            CHECK(live <= 2);
        }
        CHECK(mn >= -1e-9 * (1 + fmax));
    }
}

TEST_CASE("f = x on a tight triple forces a large second derivative") {
    double eps = std::ldexp(1.0, -6);
    auto F = interpolate_1d_nonneg({0, eps, 2 * eps}, {0, eps, 2 * eps});
    double c = max_abs_d2(F, -eps, 3 * eps) * eps;
    MESSAGE("max |F''| * eps = " << c);
    CHECK(c >= 8);
}

TEST_CASE("interpolate_1d budgets") {
    // affine data with A1 = 2K, A2 = eps and A0 >= A1^2 / A2: |F''| <= K A2 everywhere
    const double K = 100, A0 = 1e9, A1 = 2 * K, A2 = 1e-3;
    std::vector<double> xs{0, 0.3, 0.7, 1.2, 2}, fs;
    for (double x : xs) fs.push_back(2 * x + 1);
    auto F = interpolate_1d(xs, fs, A0, A1, A2);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(F->eval({xs[i], 0}).v == Approx(fs[i]).epsilon(1e-9));
    double near = max_abs_d2(F, -1, 3), far = max_abs_d2(F, -4 * A0 / A1, 4 * A0 / A1, 200001);
    MESSAGE("affine budget case: max |F''| near " << near << ", far " << far);
    CHECK(near <= K * A2);
    CHECK(far <= K * A2);
    // zero data under zero budgets
    auto Z = interpolate_1d(xs, std::vector<double>(xs.size(), 0), 0, 0, 0);
    for (int i = 0; i <= 100; ++i) CHECK(Z->eval({-1 + 4.0 * i / 100, 0}).v == 0);
    // curved data cannot meet a zero curvature budget
    CHECK_THROWS_AS(interpolate_1d({0, 1, 2}, {0, 1, 0}, 10, 10, 0), BudgetError);
}

TEST_CASE("interpolate_1d Rolle-type overlap bound") {
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> xs{0}, fs{0};
    for (int i = 1; i < 6; ++i) xs.push_back(xs.back() + 0.2 + u(rng)), fs.push_back(fs.back() + u(rng));
    double A2 = 0;
    for (std::size_t i = 0; i + 2 < xs.size(); ++i) {
        double d01 = (fs[i + 1] - fs[i]) / (xs[i + 1] - xs[i]), d12 = (fs[i + 2] - fs[i + 1]) / (xs[i + 2] - xs[i + 1]);
        A2 = std::max(A2, 2 * std::abs(d12 - d01) / (xs[i + 2] - xs[i]));
    }
    A2 = 2 * A2 + 1;
    auto I = build_1d_budget(xs, fs, 100, 100, A2);
    double worst = 0;
    for (std::size_t j = 0; j + 1 < I.pieces.size(); ++j) {
        double a = xs[j + 1], b = xs[j + 2];
        for (int i = 0; i <= 200; ++i) {
            double x = a + (b - a) * i / 200;
            double diff = std::abs(I.pieces[j]->eval({x, 0}).gx - I.pieces[j + 1]->eval({x, 0}).gx);
            worst = std::max(worst, diff / (A2 * (b - a)));
        }
    }
    MESSAGE("overlap slope defect / (A2 gap) = " << worst);
    CHECK(worst <= 2 * 100);
}

TEST_CASE("query_depth_set rule") {
    Operator1D op({0, 1, 2, 3, 4});
    CHECK(op.query_depth_set(2.5) == std::vector<double>{1, 2, 3, 4});
    CHECK(op.query_depth_set(-7) == std::vector<double>{0, 1, 2});
    CHECK(op.query_depth_set(11) == std::vector<double>{2, 3, 4});
    CHECK(op.query_depth_set(0.5) == std::vector<double>{0, 1, 2});
    CHECK(op.query_depth_set(3.5) == std::vector<double>{2, 3, 4});
    Operator1D two({0, 1});
    CHECK(two.query_depth_set(17) == std::vector<double>{0, 1});
    CHECK(two.query_depth_set(0.5) == std::vector<double>{0, 1});
}

TEST_CASE("depth invariance") {
    std::mt19937 rng(12);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> xs, f;
    test::random_1d(rng, 9, xs, f);
    Operator1D op(xs);
    CHECK(depth_invariance_check(op, f, f, 0.5));
    for (int t = 0; t < 10; ++t) {
        double x = xs.front() - 0.5 + (xs.back() - xs.front() + 1) * u(rng);
        auto S = op.query_depth_set(x);
        auto g = f;
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (std::find(S.begin(), S.end(), xs[i]) == S.end()) g[i] = 5 * u(rng);
        CHECK(depth_invariance_check(op, f, g, x));
    }
}

TEST_CASE("linear operator is linear") {
    std::vector<double> xs{0, 0.4, 1, 1.3, 2.2, 3};
    Operator1D op(xs);
    std::vector<double> f{1, -2, 0.5, 3, 0, 1}, g{0, 1, 1, -1, 2, 0.5}, h;
    for (std::size_t i = 0; i < f.size(); ++i) h.push_back(2 * f[i] - 3 * g[i]);
    auto Ff = op.apply_linear(f), Fg = op.apply_linear(g), Fh = op.apply_linear(h);
    for (int i = 0; i <= 100; ++i) {
        double x = -1 + 5.0 * i / 100;
        CHECK(Fh->eval({x, 0}).v == Approx(2 * Ff->eval({x, 0}).v - 3 * Fg->eval({x, 0}).v).epsilon(1e-9));
    }
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(Ff->eval({xs[i], 0}).v == Approx(f[i]).epsilon(1e-9));
}

TEST_CASE("nonadditivity_demo") {
    auto half = nonadditivity_demo(0.5);
    CHECK(half.est_f <= 10);
    CHECK(half.est_g <= 10);
    CHECK(half.est_sum == Approx(1).epsilon(1e-6));
    CHECK_THROWS_AS(nonadditivity_demo(1), InputError);
    auto a = nonadditivity_demo(std::ldexp(1.0, -6)), b = nonadditivity_demo(std::ldexp(1.0, -7));
    CHECK(b.est_f / a.est_f >= 1.5);
    CHECK(a.est_sum == Approx(1).epsilon(1e-6));
    CHECK(a.est_g <= 10);
    CHECK(a.max_second_derivative * a.eps >= 8);
}
