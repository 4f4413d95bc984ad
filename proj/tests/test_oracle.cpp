#include <random>

#include "doctest.h"
#include "test_support.hpp"

using namespace nnc2;
using doctest::Approx;

TEST_CASE("SOCP solver on small problems") {
    // min t s.t. ||(1 - z0, 1 - z1)|| <= t, z0 = z1 = 0 fixed via equality-free form: min ||(1,1)|| = sqrt 2
    {
        std::vector<Cone> cones;
        Cone c;
        c.idx = {0};
        c.f = Eigen::VectorXd::Unit(1, 0);
        c.d = 0;
        c.A = Eigen::MatrixXd::Zero(2, 1);
        c.b = Eigen::Vector2d(1, 1);
        cones.push_back(c);
        SocpSolver s(1, cones);
        auto r = s.minimize(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1));
        CHECK(r.converged);
        CHECK(r.upper == Approx(std::sqrt(2.0)).epsilon(1e-8));
    }
    // LP through 1-D cones: min z0 + z1 s.t. z0 >= 1, z1 >= 1 -> 2
    {
        std::vector<Cone> cones;
        for (int i = 0; i < 2; ++i) {
            Cone c;
            c.idx = {i};
            c.f = Eigen::VectorXd::Unit(1, 0);
            c.d = -1;
            c.A = Eigen::MatrixXd::Zero(0, 1);
            c.b = Eigen::VectorXd::Zero(0);
            cones.push_back(c);
        }
        SocpSolver s(2, cones);
        auto r = s.minimize(Eigen::VectorXd::Ones(2), Eigen::VectorXd::Zero(2));
        CHECK(r.upper == Approx(2).epsilon(1e-8));
        CHECK(r.lower <= r.upper + 1e-12);
    }
}

TEST_CASE("trace_norm_small examples") {
    auto z = trace_norm_small({{0, 0}, {1, 0}, {0, 1}}, {0, 0, 0}, true);
    CHECK(z.upper == 0);
    for (const auto& j : z.witness.jets) CHECK(jet_norm(j) == 0);
    auto one = trace_norm_small({{0.3, 0.2}}, {2.5}, true);
    CHECK(one.upper == Approx(2.5).epsilon(1e-6));
    CHECK(norm2(one.witness.jets[0].grad) <= 1e-6);
    CHECK_THROWS_AS(trace_norm_small({{0, 0}}, {-1}, true), InputError);
    // (0, eps, 2 eps) with f = x: estimate grows like 1/eps
    double prev = 0;
    for (int e = 3; e <= 8; ++e) {
        double eps = std::ldexp(1.0, -e);
        double est = trace_norm_small({{0, 0}, {eps, 0}, {2 * eps, 0}}, {0, eps, 2 * eps}, true, 1e-6, 1).upper;
        CHECK(est * eps >= 1.0);
        if (prev > 0) CHECK(prev / est == Approx(0.5).epsilon(0.05));
        prev = est;
    }
}

TEST_CASE("trace_norm_small invariants") {
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 20; ++t) {
        std::vector<Vec2> P;
        std::vector<double> V;
        int n = 2 + t % 5;
        for (int i = 0; i < n; ++i) P.push_back({u(rng), u(rng)}), V.push_back(u(rng) < 0.3 ? 0 : u(rng));
        auto full = trace_norm_small(P, V, true);
        auto w = w2plus_norm(full.witness);
        REQUIRE(w);
        CHECK(*w <= full.upper + 1e-9);
        CHECK(full.lower <= full.upper);
        CHECK(full.upper <= full.lower * (1 + 1e-5) + 1e-9);
        for (std::size_t i = 0; i < P.size(); ++i) CHECK(full.witness.jets[i].value == V[i]);
        // monotone under subsets
        std::vector<Vec2> Ps(P.begin(), P.end() - 1);
        std::vector<double> Vs(V.begin(), V.end() - 1);
        CHECK(trace_norm_small(Ps, Vs, true).upper <= full.upper * (1 + 1e-5) + 1e-9);
        // W2-only path is 1-homogeneous
        double lam = 0.5 + 3 * u(rng);
        std::vector<double> Vl = V;
        for (double& v : Vl) v *= lam;
        double a = trace_norm_small(P, V, false).upper, b = trace_norm_small(P, Vl, false).upper;
        CHECK(b == Approx(lam * a).epsilon(1e-5));
    }
}

TEST_CASE("sigma_diameter pins") {
    // no constraints: the unit jet ball
    CHECK(sigma_diameter({0.3, 0.3}, {}, 4, 16, 64).diameter == Approx(2).epsilon(1e-8));
    // 1-D, x = 0, E = {-d, 0, d}: slope a with |a| (1 + 1/d) <= 1, value pinned at 0
    for (double d : {0.1, 0.05, 0.025}) {
        auto s = sigma_diameter({0, 0}, {{-d, 0}, {0, 0}, {d, 0}}, 3, 16 * d, 64, 1);
        CHECK(s.diameter == Approx(2 * d / (1 + d)).epsilon(1e-6));
    }
    CHECK_THROWS_AS(sigma_diameter({0, 0}, {}, 0, 1, 64), InputError);
    CHECK_THROWS_AS(sigma_diameter({0, 0}, {}, 1, 1, 4), InputError);
}

TEST_CASE("sigma_diameter is monotone in k and in E") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 4; ++t) {
        std::vector<Vec2> E;
        for (int i = 0; i < 5; ++i) E.push_back({u(rng), u(rng)});
        Vec2 x{u(rng), u(rng)};
        double d2 = sigma_diameter(x, E, 2, 16, 32).diameter, d4 = sigma_diameter(x, E, 4, 16, 32).diameter;
        CHECK(d4 <= d2 + 1e-7);
        std::vector<Vec2> fewer(E.begin(), E.begin() + 3);
        CHECK(sigma_diameter(x, E, 3, 16, 32).diameter <= sigma_diameter(x, fewer, 3, 16, 32).diameter + 1e-7);
    }
}

TEST_CASE("nice_test examples") {
    CHECK(nice_test({{0, 0}, 1}, {}, 4, 1000));
    CHECK(!nice_test({{0, 0}, 1}, {{0.5, 0.5}}, 4, 1000));
    double d = std::ldexp(1.0, -12);
    CHECK(nice_test({{0.5, 0.5}, d}, {{0.5 + d / 2, 0.5 + d / 2}}, 4, 1000));
}

TEST_CASE("select_jet") {
    auto z = select_jet({0.5, 0.5}, {}, {}, 1);
    REQUIRE(z);
    CHECK(in_cplus(*z, 16));
    auto zz = select_jet({0.5, 0.5}, {{0, 0}, {1, 0}}, {0, 0}, 1);
    REQUIRE(zz);
    CHECK(jet_norm(*zz) == 0);
    // f == 1 near x
    std::vector<Vec2> S{{0.4, 0.5}, {0.6, 0.52}, {0.5, 0.41}};
    double M = trace_norm_small(S, {1, 1, 1}, true).upper;
    Vec2 x{0.5, 0.5};
    auto j = select_jet(x, S, {1, 1, 1}, M);
    REQUIRE(j);
    double dmin = 1;
    for (auto& p : S) dmin = std::min(dmin, dist(p, x));
    CHECK(std::abs(j->value - 1) <= 16 * M * dmin * dmin);
    // the returned jet is feasible when pinned
    WhitneyField w{2, {*j}};
    std::vector<FieldPoint> fp{{x, false, j->value, false, j->grad}};
    for (auto& p : S) fp.push_back({p, false, 1, true, {0, 0}});
    auto sol = solve_field(2, fp, true, 1e-7);
    CHECK(sol.upper <= 16 * M + 1e-6);
    auto [oj, on] = optimal_jet(x, S, {1, 1, 1});
    CHECK(on <= 16 * M);
    CHECK(on >= M * (1 - 1e-5));
    CHECK(oj.value >= 0);
}

TEST_CASE("brute_force_trace_norm pins") {
    CHECK(brute_force_trace_norm({{0, 0}, {0.5, 0}}, {0, 0}, true, 1) == 0);
    double one = brute_force_trace_norm({{0, 0}}, {1}, true, 1);
    CHECK(one >= 1);
    CHECK(one <= 10);
    // the constant 1 is in the family
    CHECK(one == Approx(1).epsilon(1e-4));
    // a zero next to a positive value: F(d) <= sup|F''| d^2 / 2 forces sup|F''| >= 2 f / d^2
    double d = 1.0 / 64, f = 0.3;
    double bf = brute_force_trace_norm({{0.5, 0}, {0.5 + d, 0}}, {0, f}, true, 1);
    CHECK(bf >= 2 * f / (d * d) * (1 - 1e-3));
    CHECK(bf <= 3 * trace_norm_small({{0.5, 0}, {0.5 + d, 0}}, {0, f}, true, 1e-6, 1).upper);
}

TEST_CASE("whitney_cover examples") {
    auto single = whitney_cover({{0.3, 0.3}}, 2);
    for (const auto& c : single) CHECK(c.cell.level == 0);
    auto far = whitney_cover({{0.5, 0.5}, {4.5, 0.5}}, 2);
    for (const auto& c : far) CHECK(c.cell.level == 0);
    double e = std::ldexp(1.0, -5);
    auto near = whitney_cover({{0.5, 0.5}, {0.5 + e, 0.5}}, 2);
    int maxl = 0;
    std::vector<Vec2> S{{0.5, 0.5}, {0.5 + e, 0.5}};
    for (const auto& c : near) {
        maxl = std::max(maxl, c.cell.level);
        CHECK(detail::points_in_double(S, 2, c.cell).size() <= 1);
        if (c.cell.level > 0) {
            DyadicCell parent{c.cell.level - 1, c.cell.i >> 1, c.cell.j >> 1};
            CHECK(detail::points_in_double(S, 2, parent).size() > 1);
        }
    }
    CHECK(maxl == 6);
    CHECK_THROWS_AS(whitney_cover({}, 2), InputError);
}

TEST_CASE("extend_nonneg examples") {
    auto zero = extend_nonneg(WhitneyField{2, {Jet::make(2, {0.2, 0.2}, 0)}});
    CHECK(is_zero_constant(zero));
    auto one = extend_nonneg(WhitneyField{2, {Jet::make(2, {0.2, 0.2}, 1)}});
    auto a = eval_jet2(one, {0.2, 0.2});
    CHECK(a.value == Approx(1).epsilon(1e-12));
    CHECK(std::abs(a.gradient[0]) <= 1e-12);
    // field of |x - y0|^2 + 1
    Vec2 y0{0.4, 0.1};
    WhitneyField w{2, {}};
    for (Vec2 p : {Vec2{0, 0}, Vec2{1, 0.3}, Vec2{0.2, 0.9}})
        w.jets.push_back(Jet::make(2, p, sq(p[0] - y0[0]) + sq(p[1] - y0[1]) + 1, {2 * (p[0] - y0[0]), 2 * (p[1] - y0[1])}));
    auto F = extend_nonneg(w);
    for (const auto& j : w.jets) {
        auto s = eval_jet2(F, j.base);
        CHECK(s.value == Approx(j.value).epsilon(1e-12));
        CHECK(s.gradient[0] == Approx(j.grad[0]).epsilon(1e-12));
        CHECK(s.gradient[1] == Approx(j.grad[1]).epsilon(1e-12));
    }
    double mn = 1;
    for (int i = 0; i < 200; ++i)
        for (int k = 0; k < 200; ++k) mn = std::min(mn, F->eval({-2 + 5.0 * i / 199, -2 + 5.0 * k / 199}).v);
    CHECK(mn >= 0);
    CHECK_THROWS_AS(extend_nonneg(WhitneyField{2, {Jet::make(2, {0, 0}, 0, {1, 0})}}), InputError);
}

TEST_CASE("extend_unconstrained is linear and reproduces jets") {
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> u(-1, 1);
    CHECK(c2_norm_sampled(extend_unconstrained(WhitneyField{2, {Jet::make(2, {0, 0}, 0)}}), {{-2, -2}, 4}, 41) == 0);
    for (int t = 0; t < 5; ++t) {
        WhitneyField a{2, {}}, b{2, {}}, s{2, {}};
        for (int i = 0; i < 4; ++i) {
            Vec2 p{u(rng), u(rng)};
            Jet ja = Jet::make(2, p, u(rng), {u(rng), u(rng)}), jb = Jet::make(2, p, u(rng), {u(rng), u(rng)});
            a.jets.push_back(ja), b.jets.push_back(jb);
            s.jets.push_back(Jet::make(2, p, ja.value + jb.value, {ja.grad[0] + jb.grad[0], ja.grad[1] + jb.grad[1]}));
        }
        auto Fa = extend_unconstrained(a), Fb = extend_unconstrained(b), Fs = extend_unconstrained(s);
        for (const auto& j : a.jets) {
            auto e = eval_jet2(Fa, j.base);
            CHECK(e.value == Approx(j.value).epsilon(1e-12));
            CHECK(e.gradient[1] == Approx(j.grad[1]).epsilon(1e-12));
        }
        for (int i = 0; i < 50; ++i) {
            Vec2 x{2 * u(rng), 2 * u(rng)};
            CHECK(Fs->eval(x).v == Approx(Fa->eval(x).v + Fb->eval(x).v).epsilon(1e-12));
        }
    }
}

TEST_CASE("extension norm factor") {
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(0, 1);
    double worst = 0;
    for (int t = 0; t < 20; ++t) {
        std::vector<Vec2> P;
        std::vector<double> V;
        for (int i = 0; i < 1 + t % 4; ++i) P.push_back({u(rng), u(rng)}), V.push_back(u(rng) < 0.3 ? 0 : u(rng));
        auto est = trace_norm_small(P, V, true);
        if (est.upper == 0) continue;
        auto F = extend_nonneg(est.witness);
        double n = c2_norm_sampled(F, {{-2, -2}, 5}, 161), mn = 0;
        for (int a = 0; a < 161; ++a)
            for (int b = 0; b < 161; ++b) mn = std::min(mn, F->eval({-2 + 5.0 * a / 160, -2 + 5.0 * b / 160}).v);
        CHECK(mn >= -1e-12 * (1 + n));
        worst = std::max(worst, n / *w2plus_norm(est.witness));
    }
    MESSAGE("extension norm factor (sampled) " << worst);
    CHECK(worst <= 100);
}
