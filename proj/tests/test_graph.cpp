#include <catch2/catch_amalgamated.hpp>
#include <functional>
#include <sstream>

#include "rieszlab/builders.hpp"
#include "rieszlab/graph.hpp"
#include "rieszlab/metric.hpp"

using namespace rieszlab;

namespace {

WeightedGraph k2() { return WeightedGraph(2, {{0, 1, 1.0}}); }

WeightedGraph four_cycle() {
    return WeightedGraph(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {3, 0, 1.0}});
}

// brute-force shortest path by enumerating simple paths
int brute_distance(const WeightedGraph& g, int s, int t) {
    int best = std::numeric_limits<int>::max();
    std::vector<char> used(g.size(), 0);
    std::function<void(int, int)> dfs = [&](int v, int len) {
        if (v == t) {
            best = std::min(best, len);
            return;
        }
        for (const AdjEntry& a : g.neighbors(v)) {
            if (a.to == v || used[a.to]) continue;
            used[a.to] = 1;
            dfs(a.to, len + 1);
            used[a.to] = 0;
        }
    };
    used[s] = 1;
    dfs(s, 0);
    return best;
}

}  // namespace

TEST_CASE("graph distance basics") {
    auto g = k2();
    CHECK(g.distance(0, 1) == 1);
    CHECK(g.distance(0, 0) == 0);
    CHECK(g.distance(1, 1) == 0);

    auto c4 = four_cycle();
    CHECK(c4.distance(0, 2) == brute_distance(c4, 0, 2));
    CHECK(c4.distance(0, 2) == 2);
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y) CHECK(c4.distance(x, y) == c4.distance(y, x));
}

TEST_CASE("disconnected pair raises unreachable") {
    WeightedGraph g(4, {{0, 1, 1.0}, {2, 3, 1.0}}, /*require_connected=*/false);
    CHECK_FALSE(g.connected());
    CHECK_THROWS_WITH(g.distance(0, 3), Catch::Matchers::ContainsSubstring("unreachable"));
    CHECK_THROWS_AS(WeightedGraph(4, {{0, 1, 1.0}, {2, 3, 1.0}}), std::invalid_argument);
}

TEST_CASE("graph invariants") {
    WeightedGraph g(3, {{0, 1, 0.5}, {1, 2, 2.0}, {1, 1, 1.0}});
    CHECK(g.measure(0) == 0.5);
    CHECK(g.measure(1) == Catch::Approx(3.5));  // 0.5 + 2.0 + loop once
    CHECK(g.measure(2) == 2.0);
    CHECK(g.max_degree() == 3);
    CHECK(g.loop_weight(1) == 1.0);
    CHECK(g.loop_weight(0) == 0.0);
    CHECK_THROWS_AS(WeightedGraph(2, {{0, 1, 0.0}}), std::invalid_argument);
    CHECK_THROWS_AS(WeightedGraph(2, {{0, 1, 1.0}, {1, 0, 1.0}}), std::invalid_argument);
    CHECK_THROWS_AS(WeightedGraph(2, {{0, 2, 1.0}}), std::invalid_argument);
}

TEST_CASE("rho powers and product max") {
    auto path4 = std::make_shared<const WeightedGraph>(
        WeightedGraph(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}}));
    auto q2 = QuasiMetric::constant(path4, 2.0);
    CHECK(q2.rho(0, 3) == 9.0);  // d = 3, beta = 2
    CHECK(q2.rho(1, 1) == 0.0);

    auto q1 = QuasiMetric::constant(path4, 1.0);
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y) CHECK(q1.rho(x, y) == path4->distance(x, y));

    // product of (beta=2, d1=2) and (beta=log2 5, d2=1): max(4, 1) = 4
    auto gasket1 = build(BuilderSpec::sierpinski(1));
    auto qp = QuasiMetric::product(q2, gasket1.metric);
    int n2 = gasket1.graph->size();
    int x1 = 0, y1 = 2;  // d = 2 in the path
    REQUIRE(path4->distance(x1, y1) == 2);
    int x2 = 0;
    int y2 = -1;
    for (int y = 0; y < n2; ++y)
        if (gasket1.graph->distance(x2, y) == 1) {
            y2 = y;
            break;
        }
    REQUIRE(y2 >= 0);
    CHECK(qp.rho(x1 * n2 + x2, y1 * n2 + y2) == 4.0);
    CHECK(qp.beta_bound() == Catch::Approx(std::log2(5.0)));
}

TEST_CASE("quasi-triangle inequality with constant 2^(B-1)") {
    std::vector<QuasiMetric> metrics;
    auto c4 = std::make_shared<const WeightedGraph>(four_cycle());
    metrics.push_back(QuasiMetric::constant(c4, 2.0));
    auto gasket = build(BuilderSpec::sierpinski(2));
    metrics.push_back(gasket.metric);
    metrics.push_back(QuasiMetric::product(QuasiMetric::constant(c4, 2.0), gasket.metric));
    for (const auto& q : metrics) {
        double slack = std::exp2(q.beta_bound() - 1.0);
        const int n = q.size();
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y)
                for (int z = 0; z < n; ++z)
                    CHECK(q.rho(x, z) <= slack * (q.rho(x, y) + q.rho(y, z)) + 1e-12);
    }
}

TEST_CASE("balls and volumes") {
    // 4-cycle with unit loops: m(x) = 3 everywhere
    WeightedGraph lazyish(4, {{0, 1, 1.0},
                              {1, 2, 1.0},
                              {2, 3, 1.0},
                              {3, 0, 1.0},
                              {0, 0, 1.0},
                              {1, 1, 1.0},
                              {2, 2, 1.0},
                              {3, 3, 1.0}});
    auto g = std::make_shared<const WeightedGraph>(std::move(lazyish));
    auto q = QuasiMetric::constant(g, 1.0);
    for (int x = 0; x < 4; ++x) REQUIRE(g->measure(x) == 3.0);

    BallGeometry small = q.ball(0, 0.5);
    CHECK(small.members == std::vector<int32_t>{0});
    CHECK(small.volume == 3.0);

    BallGeometry all = q.ball(0, q.max_rho_from(0) + 1.0);
    CHECK(all.members.size() == 4);
    CHECK(all.volume == 12.0);

    // r = 1.5 captures the center and its two neighbors: V = 3 m(x)
    BallGeometry mid = q.ball(0, 1.5);
    CHECK(mid.members.size() == 3);
    CHECK(mid.volume == 9.0);

    CHECK_THROWS_AS(q.ball(0, 0.0), std::invalid_argument);
}

TEST_CASE("annuli: coverage, emptiness, separation") {
    auto gasket = build(BuilderSpec::sierpinski(2));
    const auto& q = gasket.metric;
    const int n = q.size();
    double diam_rho = 0.0;
    for (int x = 0; x < n; ++x) diam_rho = std::max(diam_rho, q.max_rho_from(x));

    // far enough out the annuli are empty
    int j_empty = 1;
    while (std::exp2(q.beta_bound() + j_empty) * 1.0 <= diam_rho) ++j_empty;
    CHECK(q.annulus(0, 1.0, j_empty).empty());

    // j = 0 covers everything once 2^{B+1} k exceeds the diameter
    double k_all = diam_rho / std::exp2(q.beta_bound() + 1.0) + 1.0;
    CHECK(q.annulus(0, k_all, 0).size() == static_cast<size_t>(n));

    // separation rho(B(x,k), C_j) >= 2^j k, exhaustive over (x, k, j)
    for (int x = 0; x < n; ++x) {
        for (double k : {1.0, 2.0}) {
            for (int j = 1; j <= 3; ++j) {
                auto ball = q.ball_members(x, k);
                auto ann = q.annulus(x, k, j);
                if (ann.empty()) continue;
                double sep = q.rho_between_sets(ball, ann);
                CHECK(sep >= std::exp2(j) * k - 1e-12);
            }
        }
    }

    // same separation on the 4-cycle, k = 1, j = 1
    auto c4 = std::make_shared<const WeightedGraph>(four_cycle());
    auto qc = QuasiMetric::constant(c4, 1.0);
    auto ball = qc.ball_members(0, 1.0);
    auto ann = qc.annulus(0, 1.0, 1);
    if (!ann.empty()) CHECK(qc.rho_between_sets(ball, ann) >= 2.0);
}

TEST_CASE("doubling scan") {
    auto k2g = std::make_shared<const WeightedGraph>(k2());
    auto qk2 = QuasiMetric::constant(k2g, 2.0);
    std::vector<double> radii{0.5};
    std::vector<int32_t> sample{0};
    auto rep = doubling_scan(qk2, radii, sample);
    CHECK(rep.max_ratio >= 1.0);
    CHECK(std::isfinite(rep.max_ratio));

    CHECK_THROWS_AS(doubling_scan(qk2, radii, std::vector<int32_t>{}), std::invalid_argument);

    // interior of a long path, beta = 1: V(x, 2r)/V(x, r) ~ 2 at mid radii
    BuilderSpec ps = BuilderSpec::path(64);
    ps.beta = 1.0;
    ps.loop_alpha.reset();
    auto path = build(ps);
    double v1 = path.metric.volume(32, 4.0), v2 = path.metric.volume(32, 8.0);
    CHECK(v2 / v1 == Catch::Approx(2.0).margin(0.3));

    // Z^2 box with beta = 2: fitted exponent d ~ 1 in the rho scale
    auto z2 = build(BuilderSpec::lattice(2, 21));
    std::vector<int32_t> centers{21 * 10 + 10};
    std::vector<double> rr{2.0, 4.0, 8.0};
    auto drep = doubling_scan(z2.metric, rr, centers);
    CHECK(drep.fitted_d == Catch::Approx(1.0).margin(0.15));
}

TEST_CASE("graph file round-trip is bit-exact") {
    auto gasket = build(BuilderSpec::sierpinski(2));
    std::ostringstream first;
    gasket.graph->write(first);
    std::istringstream in(first.str());
    WeightedGraph back = WeightedGraph::read(in);
    std::ostringstream second;
    back.write(second);
    CHECK(first.str() == second.str());
    CHECK(back.size() == gasket.graph->size());
    CHECK(back.edge_count() == gasket.graph->edge_count());

    // fractional weights survive the decimal round trip
    WeightedGraph w(2, {{0, 1, 0.1}});
    std::ostringstream o1;
    w.write(o1);
    std::istringstream i1(o1.str());
    std::ostringstream o2;
    WeightedGraph::read(i1).write(o2);
    CHECK(o1.str() == o2.str());
}
