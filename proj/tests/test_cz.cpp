#include <random>

#include "doctest.h"
#include "test_support.hpp"

using namespace nnc2;
using doctest::Approx;

namespace {

// unit square with its lower-left quarter refined to level `fine`
CZCover jump_cover(int fine) {
    CZCover cv;
    cv.region = {{0, 0, 0}};
    for (auto [i, j] : {std::pair{1, 0}, std::pair{0, 1}, std::pair{1, 1}}) cv.squares.push_back(CZSquare{{1, i, j}});
    int n = 1 << (fine - 1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) cv.squares.push_back(CZSquare{{fine, i, j}});
    index_cover(cv);
    return cv;
}

double partition_sum(const std::vector<FuncExpr>& th, const Vec2& x) {
    double s = 0;
    for (const auto& t : th) s += t->eval(x).v;
    return s;
}

} // namespace

TEST_CASE("decompose: empty set gives the unit grid") {
    auto cv = decompose({});
    CHECK(cv.squares.size() == cv.region.size());
    for (const auto& s : cv.squares) CHECK(s.sq.level == 0);
    auto rep = validate_cover(cv);
    CHECK(rep.violations.empty());
    CHECK(rep.max_dilate_count == 9);
    CHECK(keystones(cv).empty());
}

TEST_CASE("decompose: single point") {
    auto cv = decompose({{0.3, 0.6}});
    // 1000 delta <= 2 first holds at delta = 2^-9
    CHECK(cv.finest_level() == 9);
    CHECK(cv.squares.size() == 133);
    auto rep = validate_cover(cv);
    CHECK(rep.violations.empty());
    CHECK(rep.max_dilate_count <= 21);
}

TEST_CASE("validate_cover detects a 1:8 jump") {
    auto ok = jump_cover(2);
    CHECK(validate_cover(ok).violations.empty());
    auto bad = jump_cover(4);
    auto rep = validate_cover(bad);
    CHECK(rep.disjoint);
    CHECK(rep.covers_region);
    CHECK(rep.neighbor_ratio_violations > 0);
    CZCover gap = ok;
    gap.squares.pop_back();
    CHECK(!validate_cover(gap).covers_region);
    CHECK_THROWS_AS(make_cz_partition(gap), CoverError);
}

TEST_CASE("decompose on random sets") {
    std::mt19937 rng(31);
    for (int t = 0; t < 4; ++t) {
        std::vector<Vec2> E;
        std::vector<double> f;
        test::random_2d(rng, 5 + 5 * t, E, f);
        auto cv = decompose(E);
        auto rep = validate_cover(cv);
        CHECK(rep.violations.empty());
        CHECK(rep.max_dilate_count <= 21);
        // keystones: no smaller square meets 100Q; mu(Q) is a keystone and mu(keystone) is itself
        for (std::size_t q = 0; q < cv.squares.size(); ++q) {
            const auto& s = cv.squares[q];
            if (s.sq.level <= 0) continue;
            REQUIRE(s.mu >= 0);
            CHECK(cv.squares[s.mu].keystone);
            CHECK(cv.squares[s.mu].sq.level >= s.sq.level);
            if (s.keystone) CHECK(s.mu == int(q));
            if (s.sharp) CHECK(s.special);
            if (s.sharp)
                for (int r : s.neighbors)
                    if (cv.squares[r].sq.level > 0) CHECK(cv.squares[r].special);
        }
        // representative points keep their distance from E
        for (const auto& s : cv.squares) {
            if (!s.sharp) continue;
            CHECK(dist_to_set(s.x_sharp, E) >= s.sq.side() / 16);
        }
        auto th = make_cz_partition(cv);
        std::uniform_real_distribution<double> u(-1, 2);
        for (int i = 0; i < 200; ++i) CHECK(partition_sum(th, {u(rng), u(rng)}) == Approx(1).epsilon(1e-12));
    }
}

TEST_CASE("cz partition on the unit grid") {
    auto cv = decompose({});
    auto th = make_cz_partition(cv);
    for (int a = 0; a <= 20; ++a)
        for (int b = 0; b <= 20; ++b) {
            Vec2 x{-1.5 + 3.0 * a / 20, -1.5 + 3.0 * b / 20};
            CHECK(partition_sum(th, x) == Approx(1).epsilon(1e-12));
        }
    // theta_Q == 1 deep inside Q
    for (std::size_t q = 0; q < cv.squares.size(); ++q) {
        Vec2 c = cv.squares[q].sq.center();
        CHECK(th[q]->eval(c).v == Approx(1).epsilon(1e-12));
    }
}
