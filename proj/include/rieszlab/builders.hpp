#pragma once

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rieszlab/graph.hpp"
#include "rieszlab/metric.hpp"

namespace rieszlab {

enum class Family { Lattice, Cycle, Path, Sierpinski, FreeProduct };

struct BuilderSpec {
    Family family = Family::Path;
    int dim = 1;        // lattice dimension
    int side = 2;       // lattice side length
    int n = 2;          // cycle / path length
    int level = 0;      // sierpinski prefractal level
    std::optional<double> beta;        // metric exponent override
    std::optional<double> loop_alpha = 0.5;  // laziness target; nullopt = keep as built
    std::shared_ptr<BuilderSpec> factor1, factor2;  // free product factors

    static BuilderSpec lattice(int dim, int side) {
        BuilderSpec s;
        s.family = Family::Lattice;
        s.dim = dim;
        s.side = side;
        return s;
    }
    static BuilderSpec cycle(int n) {
        BuilderSpec s;
        s.family = Family::Cycle;
        s.n = n;
        return s;
    }
    static BuilderSpec path(int n) {
        BuilderSpec s;
        s.family = Family::Path;
        s.n = n;
        return s;
    }
    static BuilderSpec sierpinski(int level) {
        BuilderSpec s;
        s.family = Family::Sierpinski;
        s.level = level;
        return s;
    }
    static BuilderSpec free_product(BuilderSpec f1, BuilderSpec f2) {
        BuilderSpec s;
        s.family = Family::FreeProduct;
        s.factor1 = std::make_shared<BuilderSpec>(std::move(f1));
        s.factor2 = std::make_shared<BuilderSpec>(std::move(f2));
        return s;
    }

    std::string name() const {
        switch (family) {
            case Family::Lattice:
                return "lattice" + std::to_string(dim) + ":" + std::to_string(side);
            case Family::Cycle: return "cycle:" + std::to_string(n);
            case Family::Path: return "path:" + std::to_string(n);
            case Family::Sierpinski: return "sierpinski:" + std::to_string(level);
            case Family::FreeProduct:
                return "free(" + factor1->name() + "," + factor2->name() + ")";
        }
        return "?";
    }
};

/// A constructed graph together with its quasimetric and family metadata.
struct BuiltGraph {
    std::shared_ptr<const WeightedGraph> graph;
    QuasiMetric metric;
    std::string family;
    double eps_lb = 0.0;                    // achieved min of p(x,x) m(x)
    std::vector<int32_t> boundary;          // truncation boundary (safe-zone reference)
    std::vector<std::array<double, 2>> coords;  // planar coordinates when meaningful
};

/// Adds or augments loops until p(x,x) m(x) >= alpha at every vertex.
/// Vertices already at or above the target keep their loop weight.
inline WeightedGraph lazify(const WeightedGraph& g, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("lazify: alpha must lie in (0,1)");
    std::vector<Edge> edges;
    std::vector<double> loop(g.size(), 0.0);
    std::vector<double> nonloop(g.size(), 0.0);
    for (const Edge& e : g.edges()) {
        if (e.u == e.v) {
            loop[e.u] = e.w;
        } else {
            edges.push_back(e);
            nonloop[e.u] += e.w;
            nonloop[e.v] += e.w;
        }
    }
    for (int x = 0; x < g.size(); ++x) {
        double w = loop[x];
        if (w < alpha * (w + nonloop[x])) w = alpha * nonloop[x] / (1.0 - alpha);
        if (w > 0.0) edges.push_back(Edge{x, x, w});
    }
    return WeightedGraph(g.size(), std::move(edges));
}

inline double min_laziness(const WeightedGraph& g) {
    double eps = 1.0;
    for (int x = 0; x < g.size(); ++x) eps = std::min(eps, g.loop_weight(x) / g.measure(x));
    return eps;
}

namespace detail {

struct LatticeBuild {
    std::vector<Edge> edges;
    std::vector<int32_t> boundary;
    std::vector<std::array<double, 2>> coords;
    int n = 0;
};

inline LatticeBuild build_lattice(int dim, int side) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("lattice: dim must be 1, 2 or 3");
    if (side < 2) throw std::invalid_argument("lattice: side must be >= 2");
    LatticeBuild b;
    int n = 1;
    for (int i = 0; i < dim; ++i) n *= side;
    b.n = n;
    std::vector<int> strides(dim, 1);
    for (int i = 1; i < dim; ++i) strides[i] = strides[i - 1] * side;
    for (int id = 0; id < n; ++id) {
        bool on_boundary = false;
        int rest = id;
        std::array<double, 2> xy{0.0, 0.0};
        for (int axis = 0; axis < dim; ++axis) {
            int c = rest % side;
            rest /= side;
            if (c == 0 || c == side - 1) on_boundary = true;
            if (axis < 2) xy[axis] = c;
            if (c + 1 < side)
                b.edges.push_back(Edge{id, id + strides[axis], 1.0});
        }
        if (on_boundary) b.boundary.push_back(id);
        b.coords.push_back(xy);
    }
    return b;
}

/// Level-L Sierpinski prefractal on doubled triangular-lattice coordinates:
/// corners at (0,0), (2^{L+1},0), (2^L,2^L); each level-0 cell is a triangle
/// of side 2. Shared corners are merged by coordinate.
struct GasketBuild {
    std::vector<Edge> edges;
    std::array<int32_t, 3> corners{};
    std::vector<std::array<double, 2>> coords;
    int n = 0;
};

inline GasketBuild build_sierpinski(int level) {
    if (level < 0 || level > 12) throw std::invalid_argument("sierpinski: level out of range");
    GasketBuild b;
    std::map<std::pair<int64_t, int64_t>, int32_t> ids;
    auto vertex = [&](int64_t x, int64_t y) {
        auto [it, inserted] = ids.try_emplace({x, y}, static_cast<int32_t>(ids.size()));
        if (inserted)
            b.coords.push_back({0.5 * static_cast<double>(x),
                                0.5 * std::sqrt(3.0) * static_cast<double>(y)});
        return it->second;
    };
    std::set<std::pair<int32_t, int32_t>> edge_set;
    auto add_edge = [&](int32_t a, int32_t c) {
        auto key = std::minmax(a, c);
        if (edge_set.insert({key.first, key.second}).second)
            b.edges.push_back(Edge{key.first, key.second, 1.0});
    };
    struct Frame {
        int64_t x, y;
        int lvl;
    };
    std::vector<Frame> stack{{0, 0, level}};
    while (!stack.empty()) {
        Frame f = stack.back();
        stack.pop_back();
        if (f.lvl == 0) {
            int32_t a = vertex(f.x, f.y);
            int32_t c = vertex(f.x + 2, f.y);
            int32_t d = vertex(f.x + 1, f.y + 1);
            add_edge(a, c);
            add_edge(c, d);
            add_edge(d, a);
        } else {
            int64_t s = int64_t{1} << f.lvl;  // child width in doubled coords
            stack.push_back({f.x, f.y, f.lvl - 1});
            stack.push_back({f.x + s, f.y, f.lvl - 1});
            stack.push_back({f.x + s / 2, f.y + s / 2, f.lvl - 1});
        }
    }
    b.n = static_cast<int>(ids.size());
    int64_t w = int64_t{1} << (level + 1);
    b.corners = {ids.at({0, 0}), ids.at({w, 0}), ids.at({w / 2, w / 2})};
    return b;
}

}  // namespace detail

inline BuiltGraph build(const BuilderSpec& spec);

namespace detail {

inline BuiltGraph finish_single(std::vector<Edge> edges, int n, double beta,
                                std::optional<double> alpha, std::string family,
                                std::vector<int32_t> boundary,
                                std::vector<std::array<double, 2>> coords) {
    WeightedGraph raw(n, std::move(edges));
    auto g = std::make_shared<const WeightedGraph>(alpha ? lazify(raw, *alpha) : std::move(raw));
    BuiltGraph out{g, QuasiMetric::constant(g, beta), std::move(family), min_laziness(*g),
                   std::move(boundary), std::move(coords)};
    return out;
}

inline BuiltGraph build_free_product(const BuilderSpec& spec) {
    BuiltGraph f1 = build(*spec.factor1);
    BuiltGraph f2 = build(*spec.factor2);
    const WeightedGraph& g1 = *f1.graph;
    const WeightedGraph& g2 = *f2.graph;
    int n1 = g1.size(), n2 = g2.size();
    std::vector<Edge> edges;
    // (x1,x2) ~ (y1,y2) iff x1~y1 and x2~y2, weight = product of weights.
    // An unordered product pair determines its unordered factor pairs, so
    // iterating unordered factor edges emits every product edge exactly once;
    // two non-loop factor edges pair up in the two diagonal ways.
    for (const Edge& e1 : g1.edges()) {
        for (const Edge& e2 : g2.edges()) {
            double w = e1.w * e2.w;
            edges.push_back(Edge{e1.u * n2 + e2.u, e1.v * n2 + e2.v, w});
            if (e1.u != e1.v && e2.u != e2.v)
                edges.push_back(Edge{e1.u * n2 + e2.v, e1.v * n2 + e2.u, w});
        }
    }
    auto g = std::make_shared<const WeightedGraph>(n1 * n2, std::move(edges));
    QuasiMetric qm = QuasiMetric::product(f1.metric, f2.metric);
    std::vector<int32_t> boundary;
    std::vector<char> b1(n1, 0), b2(n2, 0);
    for (int32_t x : f1.boundary) b1[x] = 1;
    for (int32_t x : f2.boundary) b2[x] = 1;
    for (int x1 = 0; x1 < n1; ++x1)
        for (int x2 = 0; x2 < n2; ++x2)
            if (b1[x1] || b2[x2]) boundary.push_back(x1 * n2 + x2);
    return BuiltGraph{g, std::move(qm), spec.name(), min_laziness(*g), std::move(boundary), {}};
}

}  // namespace detail

inline BuiltGraph build(const BuilderSpec& spec) {
    switch (spec.family) {
        case Family::Lattice: {
            auto b = detail::build_lattice(spec.dim, spec.side);
            return detail::finish_single(std::move(b.edges), b.n, spec.beta.value_or(2.0),
                                         spec.loop_alpha, spec.name(), std::move(b.boundary),
                                         std::move(b.coords));
        }
        case Family::Path: {
            auto b = detail::build_lattice(1, spec.n);
            return detail::finish_single(std::move(b.edges), b.n, spec.beta.value_or(2.0),
                                         spec.loop_alpha, spec.name(), std::move(b.boundary),
                                         std::move(b.coords));
        }
        case Family::Cycle: {
            if (spec.n < 3) throw std::invalid_argument("cycle: need n >= 3");
            std::vector<Edge> edges;
            std::vector<std::array<double, 2>> coords;
            const double pi = std::acos(-1.0);
            for (int i = 0; i < spec.n; ++i) {
                edges.push_back(Edge{i, (i + 1) % spec.n, 1.0});
                double t = 2.0 * pi * i / spec.n;
                coords.push_back({std::cos(t), std::sin(t)});
            }
            return detail::finish_single(std::move(edges), spec.n, spec.beta.value_or(2.0),
                                         spec.loop_alpha, spec.name(), {}, std::move(coords));
        }
        case Family::Sierpinski: {
            auto b = detail::build_sierpinski(spec.level);
            double beta = spec.beta.value_or(std::log2(5.0));
            std::vector<int32_t> boundary(b.corners.begin(), b.corners.end());
            return detail::finish_single(std::move(b.edges), b.n, beta, spec.loop_alpha,
                                         spec.name(), std::move(boundary), std::move(b.coords));
        }
        case Family::FreeProduct: return detail::build_free_product(spec);
    }
    throw std::invalid_argument("build: unknown family");
}

}  // namespace rieszlab
