#include <random>

#include "doctest.h"
#include "test_support.hpp"

using namespace nnc2;
using doctest::Approx;

TEST_CASE("eval_jet2 of constants and polynomials") {
    auto c = eval_jet2(make_constant(5), {3, -2});
    CHECK(c.value == 5);
    CHECK(c.gradient[0] == 0);
    CHECK(c.hessian[0][0] == 0);
    // s^2 + t at (1, 2)
    auto p = eval_jet2(make_poly({0, 0}, {0, 0, 1, 1, 0, 0}), {1, 2});
    CHECK(p.value == Approx(3));
    CHECK(p.gradient[0] == Approx(2));
    CHECK(p.gradient[1] == Approx(1));
    CHECK(p.hessian[0][0] == Approx(2));
    CHECK(p.hessian[0][1] == 0);
    CHECK(p.hessian[1][1] == 0);
}

TEST_CASE("bump values") {
    auto b = make_bump({1, 1}, 0.5, 1.5);
    auto at_c = eval_jet2(b, {1, 1});
    CHECK(at_c.value == 1);
    CHECK(at_c.gradient[0] == 0);
    CHECK(at_c.gradient[1] == 0);
    CHECK(eval_jet2(b, {2.5, 1}).value == 0);
    // midpoint radius: 1 - p(1/2) with p(u) = 6u^5 - 15u^4 + 10u^3, p(1/2) = 1/2
    CHECK(eval_jet2(b, {2, 1}).value == Approx(0.5).epsilon(1e-15));
    auto out = eval_jet2(b, {3, 3});
    CHECK(out.value == 0);
    CHECK(out.gradient[0] == 0);
    CHECK(out.hessian[1][1] == 0);
    CHECK_THROWS_AS(make_bump({0, 0}, 1, 1), InputError);
    CHECK_THROWS_AS(make_bump({0, 0}, 0, 1), InputError);
}

TEST_CASE("bump derivative bounds within K_bump") {
    double rin = 0.7, rout = 1.0, w = rout - rin, g = 0, h = 0;
    auto b = make_bump({0, 0}, rin, rout);
    for (int i = 0; i <= 2000; ++i) {
        double r = rin + w * i / 2000.0;
        for (double a : {0.0, 0.3, 1.1}) {
            J2 j = b->eval({r * std::cos(a), r * std::sin(a)});
            g = std::max(g, std::hypot(j.gx, j.gy) * w);
            h = std::max(h, std::max({std::abs(j.hxx), std::abs(j.hxy), std::abs(j.hyy)}) * w * w);
        }
    }
    CHECK(g <= K_bump);
    CHECK(h <= K_bump);
    CHECK(g == Approx(15.0 / 8).epsilon(1e-3));
}

TEST_CASE("c2_norm_sampled examples") {
    CHECK(c2_norm_sampled(make_constant(5), {{0, 0}, 1}, 9) == Approx(5));
    CHECK(c2_norm_sampled(make_poly({0, 0}, {0, 1, 0, 0, 0, 0}), {{0, 0}, 1}, 9) == Approx(std::sqrt(2.0)));
    auto b1 = make_bump({0, 0}, 0.2, 0.6), b2 = make_bump({0.5, 0.3}, 0.1, 0.4);
    Square R{{-1, -1}, 2};
    CHECK(c2_norm_sampled(make_sum({b1, b2}), R, 33) <= c2_norm_sampled(b1, R, 33) + c2_norm_sampled(b2, R, 33) + 1e-12);
    // dyadic refinement of the same grid family never decreases the max
    auto e = make_product({b1, make_poly({0.1, 0}, {1, 2, -1, 3, 0.5, -2})});
    CHECK(c2_norm_sampled(e, R, 17) <= c2_norm_sampled(e, R, 33));
}

TEST_CASE("product, compose and lift propagate exact jets") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int t = 0; t < 20; ++t) {
        auto a = make_poly({u(rng), u(rng)}, {u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)});
        auto b = make_bump({u(rng), u(rng)}, 0.5, 1.5);
        auto g = make_lift(make_poly({0, 0}, {u(rng), u(rng), 0, u(rng), 0, 0}), {0.6, 0.8}, 0.1);
        auto e = make_sum({make_product({a, b}), make_scale(2, g), make_compose(a, {0.5, -0.2, 0.3, 1.1}, {0.1, -0.4})});
        Vec2 x{u(rng), u(rng)};
        J2 j = e->eval(x);
        double hs = 1e-5;
        J2 px = e->eval({x[0] + hs, x[1]}), mx = e->eval({x[0] - hs, x[1]});
        J2 py = e->eval({x[0], x[1] + hs}), my = e->eval({x[0], x[1] - hs});
        CHECK(j.gx == Approx((px.v - mx.v) / (2 * hs)).epsilon(1e-6));
        CHECK(j.gy == Approx((py.v - my.v) / (2 * hs)).epsilon(1e-6));
        CHECK(j.hxx == Approx((px.gx - mx.gx) / (2 * hs)).epsilon(1e-6));
        CHECK(j.hxy == Approx((py.gx - my.gx) / (2 * hs)).epsilon(1e-6));
        CHECK(j.hyy == Approx((py.gy - my.gy) / (2 * hs)).epsilon(1e-6));
    }
}

TEST_CASE("transport") {
    auto j = Jet::make(1, {0, 0}, 1, {0, 0});
    auto r = transport(j, {7, 0});
    CHECK(r.first == 1);
    CHECK(r.second[0] == 0);
    auto k = Jet::make(2, {0, 0}, 0, {1, 0});
    auto s = transport(k, {2, 3});
    CHECK(s.first == 2);
    CHECK(s.second[0] == 1);
    CHECK(s.second[1] == 0);
    auto m = Jet::make(2, {0.3, -1}, 2, {0.7, -0.2});
    auto two = transport(transport_jet(m, {1, 1}), {4, -2});
    auto one = transport(m, {4, -2});
    CHECK(two.first == Approx(one.first));
}

TEST_CASE("w2_seminorm examples") {
    WhitneyField single{2, {Jet::make(2, {0.2, 0.1}, 3, {0, 0})}};
    CHECK(w2_seminorm(single) == 3);
    // S = {0, 1}: first term 1, pair term 1
    WhitneyField two{1, {Jet::make(1, {0, 0}, 0), Jet::make(1, {1, 0}, 1)}};
    CHECK(w2_seminorm(two) == Approx(2));
    WhitneyField affine{2, {}};
    for (Vec2 p : {Vec2{0, 0}, Vec2{1, 0.5}, Vec2{-0.3, 2}})
        affine.jets.push_back(Jet::make(2, p, 1 + 2 * p[0] - p[1], {2, -1}));
    CHECK(w2_pair_term(affine) == Approx(0).epsilon(1e-15));
    WhitneyField dup{2, {Jet::make(2, {0, 0}, 1), Jet::make(2, {0, 0}, 2)}};
    CHECK_THROWS_AS(w2_seminorm(dup), InputError);
}

TEST_CASE("w2_seminorm matches the reference evaluator and is a seminorm") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int t = 0; t < 50; ++t) {
        WhitneyField a{2, {}}, b{2, {}}, s{2, {}}, l{2, {}};
        double lam = 3 * u(rng);
        int n = 1 + t % 5;
        for (int i = 0; i < n; ++i) {
            Vec2 p{u(rng), u(rng)};
            Jet ja = Jet::make(2, p, u(rng), {u(rng), u(rng)}), jb = Jet::make(2, p, u(rng), {u(rng), u(rng)});
            a.jets.push_back(ja), b.jets.push_back(jb);
            s.jets.push_back(Jet::make(2, p, ja.value + jb.value, {ja.grad[0] + jb.grad[0], ja.grad[1] + jb.grad[1]}));
            l.jets.push_back(Jet::make(2, p, lam * ja.value, {lam * ja.grad[0], lam * ja.grad[1]}));
        }
        CHECK(w2_seminorm(a) == Approx(test::w2_reference(a)).epsilon(1e-12));
        CHECK(w2_seminorm(l) == Approx(std::abs(lam) * w2_seminorm(a)).epsilon(1e-12));
        CHECK(w2_pair_term(s) <= w2_pair_term(a) + w2_pair_term(b) + 1e-12);
        CHECK(w2_seminorm(s) <= w2_seminorm(a) + w2_seminorm(b) + 1e-12);
    }
}

TEST_CASE("w2 dilation covariance") {
    // P_lam(x) = lam^2 P(x / lam): values scale by lam^2, gradients by lam, points by lam.
    std::mt19937 rng(12);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int t = 0; t < 20; ++t) {
        double lam = 0.25 + 2 * std::abs(u(rng));
        WhitneyField a{2, {}}, b{2, {}};
        for (int i = 0; i < 4; ++i) {
            Vec2 p{u(rng), u(rng)};
            Jet j = Jet::make(2, p, u(rng), {u(rng), u(rng)});
            a.jets.push_back(j);
            b.jets.push_back(Jet::make(2, {lam * p[0], lam * p[1]}, lam * lam * j.value, {lam * j.grad[0], lam * j.grad[1]}));
        }
        CHECK(w2_pair_term(b) == Approx(w2_pair_term(a)).epsilon(1e-12));
        double f1 = 0;
        for (const auto& j : a.jets)
            f1 = std::max(f1, std::sqrt(sq(lam * lam * j.value) + sq(lam * j.grad[0]) + sq(lam * j.grad[1])));
        CHECK(w2_first_term(b) == Approx(f1).epsilon(1e-12));
    }
}

TEST_CASE("m_functional and w2plus_norm") {
    WhitneyField z{2, {Jet::make(2, {0, 0}, 0), Jet::make(2, {1, 0}, 2)}};
    CHECK(*m_functional(z) == 0);
    CHECK(*w2plus_norm(WhitneyField{2, {Jet::make(2, {0, 0}, 0)}}) == 0);
    WhitneyField one{2, {Jet::make(2, {0, 0}, 1, {0, 2})}};
    CHECK(*m_functional(one) == Approx(1));
    CHECK(*w2plus_norm(one) == Approx(std::sqrt(5.0) + 1));
    WhitneyField bad{2, {Jet::make(2, {0, 0}, 0, {1, 0})}};
    CHECK(!m_functional(bad));
    CHECK(!w2plus_norm(bad));
    WhitneyField neg{2, {Jet::make(2, {0, 0}, -1)}};
    CHECK(!m_functional(neg));
    // C+ valid fields have m_functional <= M
    WhitneyField cp{2, {Jet::make(2, {0, 0}, 0.5, {0.4, 0.3}), Jet::make(2, {1, 1}, 0.2, {0.1, 0})}};
    for (const auto& j : cp.jets) CHECK(in_cplus(j, 2));
    CHECK(*m_functional(cp) <= 2);
}

TEST_CASE("in_cplus and taylor_box_contains") {
    CHECK(in_cplus(Jet::make(2, {0, 0}, 0), 0));
    CHECK(in_cplus(Jet::make(2, {0, 0}, 1), 1));
    CHECK(!in_cplus(Jet::make(2, {0, 0}, 0, {1, 0}), 100));
    double d = 0.125;
    TaylorBox b{{0, 0}, d, 1};
    CHECK(taylor_box_contains(b, Jet::make(2, {0, 0}, 0)));
    CHECK(taylor_box_contains(b, Jet::make(2, {0, 0}, d * d, {d, 0})));
    CHECK(!taylor_box_contains(b, Jet::make(2, {0, 0}, 2 * d * d)));
}

TEST_CASE("FuncExpr JSON round trip is bit-exact") {
    std::mt19937 rng(3);
    std::vector<Vec2> E;
    std::vector<double> f;
    test::random_2d(rng, 6, E, f);
    auto ip = interpolate_2d(E, f);
    std::vector<double> xs, g;
    test::random_1d(rng, 7, xs, g);
    auto F1 = interpolate_1d_nonneg(xs, g);
    for (const auto& F : {ip.F, F1, make_restrict(make_step(0.2, -0.3), {{0, 0}, 1})}) {
        auto text = funcexpr_to_json(F).dump();
        auto G = funcexpr_from_json(nlohmann::json::parse(text));
        CHECK(funcexpr_to_json(G).dump() == text);
        std::uniform_real_distribution<double> u(-0.5, 1.5);
        for (int t = 0; t < 200; ++t) {
            Vec2 x{u(rng), u(rng)};
            J2 a = F->eval(x), b = G->eval(x);
            CHECK(a.v == b.v);
            CHECK(a.gx == b.gx);
            CHECK(a.hxy == b.hxy);
        }
    }
    CHECK_THROWS_AS(funcexpr_from_json(nlohmann::json::parse(R"({"format_version": 2})")), InputError);
    CHECK_THROWS_AS(funcexpr_from_json(nlohmann::json::parse(
                        R"({"format_version": 1, "root": 0, "sets": [], "nodes": [{"type": "scale", "c": 1, "child": 0}]})")),
                    InputError);
}
