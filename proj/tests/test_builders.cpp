#include <Eigen/Dense>
#include <catch2/catch_amalgamated.hpp>

#include "rieszlab/builders.hpp"
#include "rieszlab/graph.hpp"

using namespace rieszlab;

namespace {

BuilderSpec raw(BuilderSpec s) {
    s.loop_alpha.reset();
    return s;
}

}  // namespace

TEST_CASE("sierpinski prefractal counts") {
    for (int level = 0; level <= 4; ++level) {
        auto bg = build(raw(BuilderSpec::sierpinski(level)));
        int64_t expect_v = 3 * (static_cast<int64_t>(std::pow(3, level)) + 1) / 2;
        int64_t expect_e = static_cast<int64_t>(std::pow(3, level + 1));
        CHECK(bg.graph->size() == expect_v);
        CHECK(bg.graph->edge_count() == expect_e);
        CHECK(bg.graph->max_degree() <= 4);
        CHECK(bg.graph->connected());
        CHECK(bg.boundary.size() == 3);
    }
    auto bg1 = build(raw(BuilderSpec::sierpinski(1)));
    CHECK(bg1.graph->size() == 6);
    CHECK(bg1.graph->edge_count() == 9);
}

TEST_CASE("lattice and path") {
    auto p = build(raw(BuilderSpec::path(7)));
    CHECK(p.graph->size() == 7);
    CHECK(p.graph->edge_count() == 6);
    auto l1 = build(raw(BuilderSpec::lattice(1, 7)));
    CHECK(l1.graph->size() == 7);
    CHECK(l1.graph->edge_count() == 6);
    auto l2 = build(raw(BuilderSpec::lattice(2, 4)));
    CHECK(l2.graph->size() == 16);
    CHECK(l2.graph->edge_count() == 2 * 4 * 3);
    CHECK_THROWS_AS(build(BuilderSpec::lattice(2, 1)), std::invalid_argument);
}

TEST_CASE("lazify hits the target laziness") {
    auto k2 = WeightedGraph(2, {{0, 1, 1.0}});
    auto lazy = lazify(k2, 0.5);
    CHECK(lazy.loop_weight(0) == Catch::Approx(1.0));
    CHECK(lazy.measure(0) == Catch::Approx(2.0));
    CHECK(lazy.loop_weight(0) / lazy.measure(0) == Catch::Approx(0.5));
    CHECK(min_laziness(lazy) >= 0.5 - 1e-12);

    // idempotence: a graph already at the target is unchanged
    auto again = lazify(lazy, 0.5);
    REQUIRE(again.edge_count() == lazy.edge_count());
    for (int x = 0; x < 2; ++x) CHECK(again.loop_weight(x) == lazy.loop_weight(x));

    auto c4 = WeightedGraph(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {3, 0, 1.0}});
    auto lazy4 = lazify(c4, 0.5);
    for (int x = 0; x < 4; ++x) {
        CHECK(lazy4.loop_weight(x) == Catch::Approx(2.0));
        CHECK(lazy4.measure(x) == Catch::Approx(4.0));
    }
    CHECK(min_laziness(lazy4) == Catch::Approx(0.5));

    CHECK_THROWS_AS(lazify(k2, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(lazify(k2, 1.0), std::invalid_argument);
}

TEST_CASE("lazify(1/2) puts the walk spectrum in [0,1]") {
    for (auto spec : {BuilderSpec::sierpinski(2), BuilderSpec::cycle(6), BuilderSpec::path(5)}) {
        auto bg = build(spec);  // default alpha = 1/2
        const WeightedGraph& g = *bg.graph;
        const int n = g.size();
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
        for (int x = 0; x < n; ++x)
            for (const AdjEntry& a : g.neighbors(x))
                S(x, a.to) = a.weight / std::sqrt(g.measure(x) * g.measure(a.to));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10);
        CHECK(es.eigenvalues().maxCoeff() <= 1.0 + 1e-12);
    }
}

TEST_CASE("free product of lazy K2 factors") {
    auto spec = BuilderSpec::free_product(BuilderSpec::lattice(1, 2), BuilderSpec::lattice(1, 2));
    auto bg = build(spec);
    const WeightedGraph& g = *bg.graph;
    REQUIRE(g.size() == 4);

    // oracle adjacency: (x1,x2) ~ (y1,y2) iff both coordinates are
    // adjacent-or-loop in the lazified K2, weight = product
    auto f = build(BuilderSpec::lattice(1, 2));
    const WeightedGraph& k2 = *f.graph;
    auto mu = [&](const WeightedGraph& gg, int a, int b) {
        for (const AdjEntry& e : gg.neighbors(a))
            if (e.to == b) return e.weight;
        return 0.0;
    };
    for (int x1 = 0; x1 < 2; ++x1)
        for (int x2 = 0; x2 < 2; ++x2)
            for (int y1 = 0; y1 < 2; ++y1)
                for (int y2 = 0; y2 < 2; ++y2) {
                    double expect = mu(k2, x1, y1) * mu(k2, x2, y2);
                    CHECK(mu(g, x1 * 2 + x2, y1 * 2 + y2) == Catch::Approx(expect));
                }

    // measure factorizes
    for (int x1 = 0; x1 < 2; ++x1)
        for (int x2 = 0; x2 < 2; ++x2)
            CHECK(g.measure(x1 * 2 + x2) ==
                  Catch::Approx(k2.measure(x1) * k2.measure(x2)));
}

TEST_CASE("free product distance is the max of factor distances") {
    auto spec = BuilderSpec::free_product(BuilderSpec::path(4), BuilderSpec::cycle(5));
    auto bg = build(spec);
    auto p = build(BuilderSpec::path(4));
    auto c = build(BuilderSpec::cycle(5));
    const int n2 = c.graph->size();
    for (int x = 0; x < bg.graph->size(); ++x)
        for (int y = 0; y < bg.graph->size(); ++y) {
            int expect = std::max(p.graph->distance(x / n2, y / n2),
                                  c.graph->distance(x % n2, y % n2));
            CHECK(bg.graph->distance(x, y) == expect);
        }
    // measure factorization, exhaustively
    for (int x = 0; x < bg.graph->size(); ++x)
        CHECK(bg.graph->measure(x) ==
              Catch::Approx(p.graph->measure(x / n2) * c.graph->measure(x % n2)));
}

TEST_CASE("free product of non-lazy bipartite factors is rejected") {
    auto spec = BuilderSpec::free_product(raw(BuilderSpec::lattice(1, 2)),
                                          raw(BuilderSpec::lattice(1, 2)));
    CHECK_THROWS_AS(build(spec), std::invalid_argument);  // disconnected product
}

TEST_CASE("sierpinski volume growth exponent is log2(3)") {
    BuilderSpec spec = BuilderSpec::sierpinski(8);
    spec.beta = 1.0;  // fit in the graph metric
    auto bg = build(spec);
    // the vertex nearest the coordinate centroid, plus one corner
    double cx = 0.0, cy = 0.0;
    for (int32_t b : bg.boundary) {
        cx += bg.coords[b][0] / 3.0;
        cy += bg.coords[b][1] / 3.0;
    }
    int32_t centroid = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int x = 0; x < bg.graph->size(); ++x) {
        double dx = bg.coords[x][0] - cx, dy = bg.coords[x][1] - cy;
        if (dx * dx + dy * dy < best) {
            best = dx * dx + dy * dy;
            centroid = x;
        }
    }
    std::vector<int32_t> centers{centroid, bg.boundary[0]};
    std::vector<double> radii{16.0, 24.0, 32.0};
    auto rep = doubling_scan(bg.metric, radii, centers);
    CHECK(rep.fitted_d == Catch::Approx(std::log2(3.0)).margin(0.1));
}

TEST_CASE("builder metadata") {
    auto bg = build(BuilderSpec::sierpinski(3));
    CHECK(bg.family == "sierpinski:3");
    CHECK(bg.eps_lb >= 0.5 - 1e-12);
    CHECK(bg.coords.size() == static_cast<size_t>(bg.graph->size()));
    CHECK(bg.metric.beta_bound() == Catch::Approx(std::log2(5.0)));
}
