#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "rieszlab/calculus.hpp"
#include "rieszlab/graph.hpp"
#include "rieszlab/markov.hpp"
#include "rieszlab/metric.hpp"

namespace rieszlab {

/// Real function on Gamma x {1..K_max}; column k-1 holds the slab at time k.
struct TentField {
    int K_max = 0;
    Matrix vals;  // n rows, K_max columns

    static TentField zero(int n, int K) {
        TentField F;
        F.K_max = K;
        F.vals = Matrix::Zero(n, K);
        return F;
    }

    double frobenius() const { return vals.norm(); }
};

namespace detail {

struct SortedRho {
    std::vector<int32_t> order;
    std::vector<double> rho;      // sorted values, aligned with order
    std::vector<double> m_prefix;  // m_prefix[i] = sum of measures of first i
};

inline SortedRho sorted_rho(const QuasiMetric& q, int x) {
    std::vector<double> row;
    q.rho_row(x, row);
    SortedRho s;
    const int n = static_cast<int>(row.size());
    s.order.resize(n);
    std::iota(s.order.begin(), s.order.end(), 0);
    std::stable_sort(s.order.begin(), s.order.end(),
                     [&](int32_t a, int32_t b) { return row[a] < row[b]; });
    s.rho.resize(n);
    s.m_prefix.assign(n + 1, 0.0);
    for (int i = 0; i < n; ++i) {
        s.rho[i] = row[s.order[i]];
        s.m_prefix[i + 1] = s.m_prefix[i] + q.measure(s.order[i]);
    }
    return s;
}

}  // namespace detail

/// A F(x) = (sum_{(y,k) in gamma(x)} m(y) / (k V(x,k)) |F(y,k)|^2)^{1/2}
/// with gamma(x) = {(y,k): rho(x,y) < k, k <= K_max}.
inline Vector tent_A(const QuasiMetric& q, const TentField& F) {
    const int n = q.size(), K = F.K_max;
    Vector out(n);
    for (int x = 0; x < n; ++x) {
        auto s = detail::sorted_rho(q, x);
        double acc = 0.0;
        size_t prefix = 0;
        for (int k = 1; k <= K; ++k) {
            while (prefix < s.rho.size() && s.rho[prefix] < static_cast<double>(k)) ++prefix;
            double V = s.m_prefix[prefix];
            if (V <= 0.0) continue;
            double inner = 0.0;
            for (size_t i = 0; i < prefix; ++i) {
                int32_t y = s.order[i];
                double v = F.vals(y, k - 1);
                inner += q.measure(y) * v * v;
            }
            acc += inner / (static_cast<double>(k) * V);
        }
        out[x] = std::sqrt(acc);
    }
    return out;
}

/// C F(x) = sup over balls B containing x of
/// ((1/V(B)) sum_{(y,k) in hat B} m(y)/k |F(y,k)|^2)^{1/2}, the sup taken over
/// the canonical family of all distinct balls (every center, every prefix).
inline Vector tent_C(const QuasiMetric& q, const TentField& F) {
    const int n = q.size(), K = F.K_max;
    Vector out = Vector::Zero(n);
    Matrix R(n, n);
    {
        std::vector<double> row;
        for (int y = 0; y < n; ++y) {
            q.rho_row(y, row);
            for (int z = 0; z < n; ++z) R(y, z) = row[z];
        }
    }
    // prefix sums of m(y)/k |F(y,k)|^2 in k, per vertex
    Matrix mass_prefix = Matrix::Zero(n, K + 1);
    for (int y = 0; y < n; ++y)
        for (int k = 1; k <= K; ++k) {
            double v = F.vals(y, k - 1);
            mass_prefix(y, k) = mass_prefix(y, k - 1) + q.measure(y) / k * v * v;
        }
    std::vector<char> in_ball(n);
    for (int c = 0; c < n; ++c) {
        CenterPrefixes cp = q.center_prefixes(c);
        for (size_t bi = 0; bi < cp.boundaries.size(); ++bi) {
            int len = cp.boundaries[bi];
            std::fill(in_ball.begin(), in_ball.end(), 0);
            double V = 0.0;
            for (int i = 0; i < len; ++i) {
                in_ball[cp.order[i]] = 1;
                V += q.measure(cp.order[i]);
            }
            double mass = 0.0;
            for (int y = 0; y < n; ++y) {
                // rho(y, B^c), +inf when the ball is the whole space
                double reach = std::numeric_limits<double>::infinity();
                if (len < n)
                    for (int z = 0; z < n; ++z)
                        if (!in_ball[z] && R(y, z) < reach) reach = R(y, z);
                int k_hi = (reach >= static_cast<double>(K)) ? K
                                                             : static_cast<int>(std::floor(reach));
                if (k_hi >= 1) mass += mass_prefix(y, k_hi);
            }
            double val = std::sqrt(mass / V);
            for (int i = 0; i < len; ++i) {
                int32_t x = cp.order[i];
                out[x] = std::max(out[x], val);
            }
        }
    }
    return out;
}

/// Uncentered maximal function over the canonical ball family, with the
/// 1/V(B) average.
inline Vector maximal_function(const QuasiMetric& q, const Vector& f) {
    const int n = q.size();
    Vector out = Vector::Zero(n);
    for (int c = 0; c < n; ++c) {
        auto s = detail::sorted_rho(q, c);
        // running ball averages of |f| at each prefix boundary
        std::vector<double> avg;
        std::vector<int> ends;
        double mass = 0.0;
        for (int i = 0; i < n; ++i) {
            mass += std::abs(f[s.order[i]]) * q.measure(s.order[i]);
            if (i + 1 < n && s.rho[i + 1] == s.rho[i]) continue;
            avg.push_back(mass / s.m_prefix[i + 1]);
            ends.push_back(i + 1);
        }
        // suffix max: a vertex at sorted position p lies in every prefix ball
        // whose end exceeds p
        std::vector<double> best(avg.size());
        double run = 0.0;
        for (int bi = static_cast<int>(avg.size()) - 1; bi >= 0; --bi) {
            run = std::max(run, avg[bi]);
            best[bi] = run;
        }
        int bi = 0;
        for (int p = 0; p < n; ++p) {
            while (ends[bi] <= p) ++bi;
            int32_t x = s.order[p];
            out[x] = std::max(out[x], best[bi]);
        }
    }
    return out;
}

/// Slabs u_k = Delta^beta P^{k-1} f for k = 1..K (integer beta uses exact
/// Laplacian powers, fractional beta the spectral route).
inline std::vector<Vector> heat_slabs(const WeightedGraph& g, double beta, const Vector& f,
                                      int K) {
    MarkovOperator P(g);
    Vector w;
    if (beta == std::floor(beta)) {
        w = f;
        for (int i = 0; i < static_cast<int>(beta); ++i) w = P.laplacian(w);
    } else {
        w = fractional_laplacian(g, beta, f);
    }
    std::vector<Vector> slabs;
    slabs.reserve(K);
    slabs.push_back(w);
    for (int k = 2; k <= K; ++k) slabs.push_back(P.apply(slabs.back()));
    return slabs;
}

struct LpFunctionalResult {
    Vector values;
    int k_max = 0;
    double tail_increment_rel = 0.0;  // relative growth between K/2 and K
    bool tail_warning = false;
};

/// Conical Littlewood-Paley functional
/// L_beta f(x) = (sum_{(y,k) in gamma(x)} k^{2 beta - 1} / V(x,k)
///               |Delta^beta P^{k-1} f(y)|^2 m(y))^{1/2}.
inline LpFunctionalResult lp_functional_L(const WeightedGraph& g, const QuasiMetric& q,
                                          double beta, const Vector& f, int K_max = 0) {
    if (!(beta > 0.0)) throw std::invalid_argument("lp_functional_L: beta must be positive");
    if (K_max <= 0) {
        double diam_rho = q.rho(0, 0);
        for (int x = 0; x < g.size(); ++x)
            diam_rho = std::max(diam_rho, q.max_rho_from(x));
        K_max = std::max(1, static_cast<int>(std::ceil(diam_rho)));
    }
    auto slabs = heat_slabs(g, beta, f, K_max);
    const int n = g.size();
    LpFunctionalResult res;
    res.k_max = K_max;
    res.values.resize(n);
    Vector half(n);
    for (int x = 0; x < n; ++x) {
        auto s = detail::sorted_rho(q, x);
        double acc = 0.0, acc_half = 0.0;
        size_t prefix = 0;
        for (int k = 1; k <= K_max; ++k) {
            while (prefix < s.rho.size() && s.rho[prefix] < static_cast<double>(k)) ++prefix;
            double V = s.m_prefix[prefix];
            if (V <= 0.0) continue;
            double inner = 0.0;
            for (size_t i = 0; i < prefix; ++i) {
                int32_t y = s.order[i];
                double v = slabs[k - 1][y];
                inner += v * v * q.measure(y);
            }
            acc += std::pow(static_cast<double>(k), 2.0 * beta - 1.0) / V * inner;
            if (k <= K_max / 2) acc_half = acc;
        }
        res.values[x] = std::sqrt(acc);
        half[x] = std::sqrt(acc_half);
    }
    double denom = res.values.norm();
    if (denom > 0.0) res.tail_increment_rel = (res.values - half).norm() / denom;
    res.tail_warning = res.tail_increment_rel > 0.01;
    return res;
}

/// Vertical Littlewood-Paley functional
/// g_beta f(x) = (sum_k k^{2 beta - 1} |Delta^beta P^{k-1} f(x)|^2)^{1/2}.
inline LpFunctionalResult lp_functional_g(const WeightedGraph& g, double beta, const Vector& f,
                                          int K_max) {
    if (!(beta > 0.0)) throw std::invalid_argument("lp_functional_g: beta must be positive");
    if (K_max <= 0) throw std::invalid_argument("lp_functional_g: K_max must be positive");
    auto slabs = heat_slabs(g, beta, f, K_max);
    const int n = g.size();
    LpFunctionalResult res;
    res.k_max = K_max;
    res.values = Vector::Zero(n);
    Vector acc = Vector::Zero(n), acc_half = Vector::Zero(n);
    for (int k = 1; k <= K_max; ++k) {
        double wk = std::pow(static_cast<double>(k), 2.0 * beta - 1.0);
        acc += wk * slabs[k - 1].cwiseProduct(slabs[k - 1]);
        if (k == K_max / 2) acc_half = acc;
    }
    res.values = acc.cwiseSqrt();
    Vector half = acc_half.cwiseSqrt();
    double denom = res.values.norm();
    if (denom > 0.0) res.tail_increment_rel = (res.values - half).norm() / denom;
    res.tail_warning = res.tail_increment_rel > 0.01;
    return res;
}

struct PseudoGradient {
    Vector N_p;  // N_p(P^{k-1} f) = (P^{k-1} f)^{2-p} J_k
    Vector J;    // J_k f = -[d_k + Delta] (P^{k-1} f)^p = P(u^p) - (P u)^p >= 0
};

inline PseudoGradient pseudo_gradient(const WeightedGraph& g, double p, const Vector& f, int k) {
    if (!(p > 1.0 && p <= 2.0))
        throw std::invalid_argument("pseudo_gradient: p must lie in (1,2]");
    if (k < 1) throw std::invalid_argument("pseudo_gradient: k must be >= 1");
    if (f.minCoeff() < 0.0)
        throw std::invalid_argument("pseudo_gradient: f must be nonnegative");
    if (f.maxCoeff() == 0.0)
        throw std::invalid_argument("pseudo_gradient: f must not vanish identically");
    MarkovOperator P(g);
    Vector u = P.power_apply(f, k - 1);
    Vector up = u.array().pow(p).matrix();
    Vector Pup = P.apply(up);
    Vector Pu = P.apply(u);
    PseudoGradient out;
    out.J = Pup - Pu.array().pow(p).matrix();
    out.N_p.resize(g.size());
    for (int x = 0; x < g.size(); ++x) {
        if (p == 2.0)
            out.N_p[x] = out.J[x];
        else
            out.N_p[x] = (u[x] > 0.0) ? std::pow(u[x], 2.0 - p) * out.J[x] : 0.0;
    }
    return out;
}

/// Neighbor-sum operator A f(x) = sum_{y ~ x} f(y) (loops included).
inline Vector neighbor_sum(const WeightedGraph& g, const Vector& f) {
    Vector out(g.size());
    for (int x = 0; x < g.size(); ++x) {
        double acc = 0.0;
        for (const AdjEntry& a : g.neighbors(x)) acc += f[a.to];
        out[x] = acc;
    }
    return out;
}

}  // namespace rieszlab
