#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "rieszlab/graph.hpp"

namespace rieszlab {

struct BallGeometry {
    int32_t center = 0;
    double radius = 0.0;
    std::vector<int32_t> members;
    double volume = 0.0;
};

/// The distinct balls around one center: vertices sorted by rho, with the
/// prefix boundaries at which the ball actually grows. radii[i] realizes the
/// prefix ending at boundaries[i] as a strict-inequality ball.
struct CenterPrefixes {
    std::vector<int32_t> order;
    std::vector<int32_t> boundaries;
    std::vector<double> radii;
};

/// Quasimetric rho = d^beta. Either a constant exponent on one graph, or the
/// product form rho = max(rho1, rho2) on a free product of two factors, with
/// vertex ids combined as x = x1 * n2 + x2.
class QuasiMetric {
public:
    static QuasiMetric constant(std::shared_ptr<const WeightedGraph> g, double beta) {
        if (!(beta >= 1.0)) throw std::invalid_argument("quasimetric: beta must be >= 1");
        QuasiMetric q;
        q.graph_ = std::move(g);
        q.beta_ = beta;
        q.bound_ = beta;
        q.n_ = q.graph_->size();
        if (beta != 1.0 && beta != 2.0) q.build_pow_cache();
        return q;
    }

    static QuasiMetric product(QuasiMetric left, QuasiMetric right) {
        QuasiMetric q;
        q.bound_ = std::max(left.beta_bound(), right.beta_bound());
        q.n_ = left.size() * right.size();
        q.left_ = std::make_shared<QuasiMetric>(std::move(left));
        q.right_ = std::make_shared<QuasiMetric>(std::move(right));
        return q;
    }

    bool is_product() const { return left_ != nullptr; }
    int size() const { return n_; }
    double beta_bound() const { return bound_; }
    const std::shared_ptr<const WeightedGraph>& graph() const { return graph_; }
    const QuasiMetric& left() const { return *left_; }
    const QuasiMetric& right() const { return *right_; }
    int right_size() const { return right_ ? right_->size() : 0; }

    double rho(int x, int y) const {
        if (is_product()) {
            int n2 = right_->size();
            return std::max(left_->rho(x / n2, y / n2), right_->rho(x % n2, y % n2));
        }
        return powb(graph_->distance(x, y));
    }

    /// Exponent beta(x,y) implied by rho = d^beta; on products this evaluates
    /// the max form (equals the log-ratio formula whenever d >= 2).
    double beta(int x, int y) const {
        if (!is_product()) return beta_;
        int n2 = right_->size();
        int d = std::max(left_->graph_distance(x / n2, y / n2),
                         right_->graph_distance(x % n2, y % n2));
        if (d <= 1) return 1.0;
        return std::log(rho(x, y)) / std::log(static_cast<double>(d));
    }

    int graph_distance(int x, int y) const {
        if (is_product()) {
            int n2 = right_->size();
            return std::max(left_->graph_distance(x / n2, y / n2),
                            right_->graph_distance(x % n2, y % n2));
        }
        return graph_->distance(x, y);
    }

    /// Vertex measure in the metric's ambient space (factor measures multiply
    /// on products).
    double measure(int x) const {
        if (is_product()) {
            int n2 = right_->size();
            return left_->measure(x / n2) * right_->measure(x % n2);
        }
        return graph_->measure(x);
    }

    double total_measure() const {
        if (is_product()) return left_->total_measure() * right_->total_measure();
        return graph_->total_measure();
    }

    void rho_row(int x, std::vector<double>& out) const {
        out.resize(n_);
        if (is_product()) {
            int n2 = right_->size();
            std::vector<double> r1, r2;
            left_->rho_row(x / n2, r1);
            right_->rho_row(x % n2, r2);
            for (int i1 = 0; i1 < left_->size(); ++i1) {
                double a = r1[i1];
                double* dst = out.data() + static_cast<int64_t>(i1) * n2;
                for (int i2 = 0; i2 < n2; ++i2) dst[i2] = std::max(a, r2[i2]);
            }
            return;
        }
        if (const uint16_t* cached = graph_->distance_row(x)) {
            for (int y = 0; y < n_; ++y) {
                if (cached[y] == WeightedGraph::kUnreachable)
                    throw std::runtime_error("unreachable: disconnected pair in rho_row");
                out[y] = powb(cached[y]);
            }
        } else {
            auto fresh = graph_->bfs_distances(x);
            for (int y = 0; y < n_; ++y) {
                if (fresh[y] == WeightedGraph::kUnreachable)
                    throw std::runtime_error("unreachable: disconnected pair in rho_row");
                out[y] = powb(fresh[y]);
            }
        }
    }

    std::vector<int32_t> ball_members(int x, double r) const {
        std::vector<double> row;
        rho_row(x, row);
        std::vector<int32_t> members;
        for (int y = 0; y < n_; ++y)
            if (row[y] < r) members.push_back(y);
        return members;
    }

    double volume(int x, double r) const {
        std::vector<double> row;
        rho_row(x, row);
        double v = 0.0;
        for (int y = 0; y < n_; ++y)
            if (row[y] < r) v += measure(y);
        return v;
    }

    BallGeometry ball(int x, double r) const {
        if (!(r > 0.0)) throw std::invalid_argument("ball: radius must be positive");
        BallGeometry b;
        b.center = x;
        b.radius = r;
        b.members = ball_members(x, r);
        b.volume = 0.0;
        for (int32_t y : b.members) b.volume += measure(y);
        return b;
    }

    /// C_0(x,k) = B(x, 2^{B+1} k); C_j(x,k) = B(x, 2^{B+j+1}k) \ B(x, 2^{B+j}k)
    /// for j >= 1.
    std::vector<int32_t> annulus(int x, double k, int j) const {
        if (!(k > 0.0) || j < 0) throw std::invalid_argument("annulus: need k > 0, j >= 0");
        std::vector<double> row;
        rho_row(x, row);
        std::vector<int32_t> result;
        if (j == 0) {
            double r = std::exp2(bound_ + 1.0) * k;
            for (int y = 0; y < n_; ++y)
                if (row[y] < r) result.push_back(y);
        } else {
            double lo = std::exp2(bound_ + j) * k;
            double hi = std::exp2(bound_ + j + 1.0) * k;
            for (int y = 0; y < n_; ++y)
                if (row[y] >= lo && row[y] < hi) result.push_back(y);
        }
        return result;
    }

    double max_rho_from(int x) const {
        std::vector<double> row;
        rho_row(x, row);
        return *std::max_element(row.begin(), row.end());
    }

    double rho_between_sets(std::span<const int32_t> a, std::span<const int32_t> b) const {
        double best = std::numeric_limits<double>::infinity();
        std::vector<double> row;
        for (int32_t x : a) {
            rho_row(x, row);
            for (int32_t y : b) best = std::min(best, row[y]);
        }
        return best;
    }

    /// min over members of `mask` of rho(y, .); +inf when the mask is empty.
    double rho_to_set(int y, std::span<const char> mask) const {
        std::vector<double> row;
        rho_row(y, row);
        double best = std::numeric_limits<double>::infinity();
        for (int z = 0; z < n_; ++z)
            if (mask[z] && row[z] < best) best = row[z];
        return best;
    }

    CenterPrefixes center_prefixes(int x) const {
        std::vector<double> row;
        rho_row(x, row);
        CenterPrefixes cp;
        cp.order.resize(n_);
        std::iota(cp.order.begin(), cp.order.end(), 0);
        std::stable_sort(cp.order.begin(), cp.order.end(),
                         [&](int32_t a, int32_t b) { return row[a] < row[b]; });
        for (int i = 0; i < n_; ++i) {
            double cur = row[cp.order[i]];
            if (i + 1 < n_ && row[cp.order[i + 1]] == cur) continue;
            cp.boundaries.push_back(i + 1);
            double next = (i + 1 < n_) ? row[cp.order[i + 1]] : cur + 2.0;
            cp.radii.push_back(0.5 * (cur + next));
        }
        return cp;
    }

private:
    double powb(int d) const {
        if (d == 0) return 0.0;
        if (beta_ == 1.0) return d;
        if (beta_ == 2.0) return static_cast<double>(d) * d;
        if (d < static_cast<int>(pow_cache_.size())) return pow_cache_[d];
        return std::pow(static_cast<double>(d), beta_);
    }

    void build_pow_cache() {
        pow_cache_.resize(kPowCache);
        for (int d = 0; d < kPowCache; ++d)
            pow_cache_[d] = std::pow(static_cast<double>(d), beta_);
    }

    static constexpr int kPowCache = 4096;

    std::shared_ptr<const WeightedGraph> graph_;
    double beta_ = 1.0;
    double bound_ = 1.0;
    int n_ = 0;
    std::shared_ptr<QuasiMetric> left_, right_;
    std::vector<double> pow_cache_;
};

struct DoublingReport {
    double max_ratio = 0.0;
    int32_t argmax_center = 0;
    double argmax_radius = 0.0;
    double fitted_d = 0.0;
    std::vector<std::array<double, 3>> lambda_table;  // (lambda, mean log V growth, count)
};

/// Scans V(x,2r)/V(x,r) over a sample grid and fits the volume growth
/// exponent d from V(x, lambda r) against lambda in {2,4,8}.
inline DoublingReport doubling_scan(const QuasiMetric& q, std::span<const double> radii,
                                    std::span<const int32_t> sample) {
    if (sample.empty()) throw std::invalid_argument("doubling_scan: empty sample");
    if (radii.empty()) throw std::invalid_argument("doubling_scan: empty radius grid");
    DoublingReport rep;
    const double lambdas[] = {2.0, 4.0, 8.0};
    double sxx = 0.0, sxy = 0.0;
    std::vector<double> lsum(3, 0.0);
    std::vector<double> lcount(3, 0.0);
    for (int32_t x : sample) {
        for (double r : radii) {
            if (!(r > 0.0)) throw std::invalid_argument("doubling_scan: radii must be positive");
            double v1 = q.volume(x, r);
            double v2 = q.volume(x, 2.0 * r);
            if (v1 > 0.0 && v2 / v1 > rep.max_ratio) {
                rep.max_ratio = v2 / v1;
                rep.argmax_center = x;
                rep.argmax_radius = r;
            }
            for (int li = 0; li < 3; ++li) {
                double vl = q.volume(x, lambdas[li] * r);
                if (v1 > 0.0 && vl > 0.0) {
                    double dx = std::log(lambdas[li]);
                    double dy = std::log(vl / v1);
                    sxx += dx * dx;
                    sxy += dx * dy;
                    lsum[li] += dy / dx;
                    lcount[li] += 1.0;
                }
            }
        }
    }
    rep.fitted_d = (sxx > 0.0) ? sxy / sxx : 0.0;
    for (int li = 0; li < 3; ++li)
        rep.lambda_table.push_back(
            {lambdas[li], lcount[li] > 0 ? lsum[li] / lcount[li] : 0.0, lcount[li]});
    return rep;
}

}  // namespace rieszlab
