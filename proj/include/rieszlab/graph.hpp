#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <memory>
#include <mutex>
#include <ostream>
#include <queue>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rieszlab {

struct Edge {
    int32_t u = 0;
    int32_t v = 0;
    double w = 0.0;
};

struct AdjEntry {
    int32_t to = 0;
    double weight = 0.0;
    int32_t edge = 0;  // index into the canonical undirected edge list
};

/// Shortest round-trip decimal formatting for graph files and CSV output.
inline std::string format_double(double x) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

/// Immutable weighted graph with symmetric edge weights, loops allowed.
///
/// The vertex measure is m(x) = sum of incident edge weights, each loop
/// counted once. Combinatorial distances are cached all-pairs for graphs
/// up to `kDistanceCacheLimit` vertices and computed by on-demand BFS above
/// that. All queries are const and safe to call concurrently.
class WeightedGraph {
public:
    static constexpr int kDistanceCacheLimit = 5000;
    static constexpr uint16_t kUnreachable = 0xFFFF;

    WeightedGraph(int n, std::vector<Edge> edges, bool require_connected = true)
        : n_(n), edges_(std::move(edges)) {
        if (n_ <= 0) throw std::invalid_argument("graph: vertex count must be positive");
        std::vector<int32_t> deg(n_, 0);
        for (const Edge& e : edges_) {
            if (e.u < 0 || e.u >= n_ || e.v < 0 || e.v >= n_)
                throw std::invalid_argument("graph: edge endpoint out of range");
            if (!(e.w > 0.0)) throw std::invalid_argument("graph: edge weight must be positive");
            deg[e.u]++;
            if (e.v != e.u) deg[e.v]++;
        }
        offsets_.assign(n_ + 1, 0);
        for (int x = 0; x < n_; ++x) offsets_[x + 1] = offsets_[x] + deg[x];
        adj_.resize(offsets_[n_]);
        std::vector<int64_t> cursor(offsets_.begin(), offsets_.end() - 1);
        m_.assign(n_, 0.0);
        for (int32_t id = 0; id < static_cast<int32_t>(edges_.size()); ++id) {
            const Edge& e = edges_[id];
            adj_[cursor[e.u]++] = AdjEntry{e.v, e.w, id};
            if (e.v != e.u) adj_[cursor[e.v]++] = AdjEntry{e.u, e.w, id};
            m_[e.u] += e.w;
            if (e.v != e.u) m_[e.v] += e.w;
        }
        max_degree_ = 0;
        total_m_ = 0.0;
        for (int x = 0; x < n_; ++x) {
            if (!(m_[x] > 0.0))
                throw std::invalid_argument("graph: vertex " + std::to_string(x) +
                                            " has zero measure");
            max_degree_ = std::max<int>(max_degree_, deg[x]);
            total_m_ += m_[x];
        }
        // reject duplicate undirected pairs so edge ids are canonical
        for (int x = 0; x < n_; ++x) {
            auto nb = neighbors(x);
            std::vector<int32_t> seen(nb.size());
            for (size_t i = 0; i < nb.size(); ++i) seen[i] = nb[i].to;
            std::sort(seen.begin(), seen.end());
            if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
                throw std::invalid_argument("graph: duplicate edge between a vertex pair");
        }
        connected_ = compute_connected();
        if (require_connected && !connected_)
            throw std::invalid_argument("graph: not connected");
    }

    int size() const { return n_; }
    int64_t edge_count() const { return static_cast<int64_t>(edges_.size()); }
    int max_degree() const { return max_degree_; }
    bool connected() const { return connected_; }
    const std::vector<Edge>& edges() const { return edges_; }

    std::span<const AdjEntry> neighbors(int x) const {
        return {adj_.data() + offsets_[x], static_cast<size_t>(offsets_[x + 1] - offsets_[x])};
    }

    double measure(int x) const { return m_[x]; }
    const std::vector<double>& measures() const { return m_; }
    double total_measure() const { return total_m_; }

    /// Loop weight at x (0 if no loop).
    double loop_weight(int x) const {
        for (const AdjEntry& a : neighbors(x))
            if (a.to == x) return a.weight;
        return 0.0;
    }

    /// BFS distances from x; kUnreachable marks the other components.
    std::vector<uint16_t> bfs_distances(int x) const {
        std::vector<uint16_t> dist(n_, kUnreachable);
        std::queue<int32_t> q;
        dist[x] = 0;
        q.push(x);
        while (!q.empty()) {
            int32_t cur = q.front();
            q.pop();
            uint16_t d = dist[cur];
            for (const AdjEntry& a : neighbors(cur)) {
                if (dist[a.to] == kUnreachable) {
                    dist[a.to] = static_cast<uint16_t>(d + 1);
                    q.push(a.to);
                }
            }
        }
        return dist;
    }

    int distance(int x, int y) const {
        if (x < 0 || x >= n_ || y < 0 || y >= n_)
            throw std::invalid_argument("distance: vertex id out of range");
        if (x == y) return 0;
        uint16_t d;
        if (const uint16_t* row = distance_row(x)) {
            d = row[y];
        } else {
            d = bfs_distances(x)[y];
        }
        if (d == kUnreachable) throw std::runtime_error("unreachable: no path between vertices");
        return d;
    }

    /// Cached all-pairs distance row, or nullptr when the graph is too large
    /// to cache. Built once on first use.
    const uint16_t* distance_row(int x) const {
        if (n_ > kDistanceCacheLimit) return nullptr;
        std::call_once(cache_->once, [this] {
            cache_->dist.resize(static_cast<size_t>(n_) * n_);
            for (int s = 0; s < n_; ++s) {
                auto row = bfs_distances(s);
                std::copy(row.begin(), row.end(),
                          cache_->dist.begin() + static_cast<size_t>(s) * n_);
            }
        });
        return cache_->dist.data() + static_cast<size_t>(x) * n_;
    }

    int diameter() const {
        const uint16_t* row0 = distance_row(0);
        if (!row0) throw std::runtime_error("diameter: graph too large for all-pairs cache");
        int diam = 0;
        for (int x = 0; x < n_; ++x) {
            const uint16_t* row = distance_row(x);
            for (int y = 0; y < n_; ++y) {
                if (row[y] == kUnreachable) throw std::runtime_error("unreachable: disconnected");
                diam = std::max<int>(diam, row[y]);
            }
        }
        return diam;
    }

    void write(std::ostream& os) const {
        os << "vertices " << n_ << "\n";
        for (const Edge& e : edges_)
            os << e.u << " " << e.v << " " << format_double(e.w) << "\n";
    }

    void save(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot open for writing: " + path);
        write(os);
    }

    static WeightedGraph read(std::istream& is, bool require_connected = true) {
        std::string tag;
        int n = 0;
        if (!(is >> tag >> n) || tag != "vertices")
            throw std::runtime_error("graph file: expected 'vertices N' header");
        std::vector<Edge> edges;
        Edge e;
        std::string w;
        while (is >> e.u >> e.v >> w) {
            e.w = std::strtod(w.c_str(), nullptr);
            edges.push_back(e);
        }
        return WeightedGraph(n, std::move(edges), require_connected);
    }

    static WeightedGraph load(const std::string& path, bool require_connected = true) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("cannot open graph file: " + path);
        return read(is, require_connected);
    }

private:
    bool compute_connected() const {
        auto dist = bfs_distances(0);
        for (int x = 0; x < n_; ++x)
            if (dist[x] == kUnreachable) return false;
        return true;
    }

    int n_;
    std::vector<Edge> edges_;
    std::vector<int64_t> offsets_;
    std::vector<AdjEntry> adj_;
    std::vector<double> m_;
    double total_m_ = 0.0;
    int max_degree_ = 0;
    bool connected_ = false;

    struct Caches {
        std::once_flag once;
        std::vector<uint16_t> dist;
        std::mutex aux_mu;
        std::shared_ptr<void> aux;  // spectral data, managed by markov.hpp
    };
    std::unique_ptr<Caches> cache_ = std::make_unique<Caches>();

public:
    /// Per-graph opaque cache slot with its guard; single writer, many readers.
    std::mutex& aux_cache_mutex() const { return cache_->aux_mu; }
    std::shared_ptr<void>& aux_cache_slot() const { return cache_->aux; }
};

}  // namespace rieszlab
