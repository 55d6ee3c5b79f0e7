#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "rieszlab/graph.hpp"
#include "rieszlab/markov.hpp"

namespace rieszlab {

/// Antisymmetric function on directed edges (a discrete 1-form). One value is
/// stored per undirected edge, oriented from the edge's first endpoint;
/// F(x,x) = 0 always.
class OneForm {
public:
    explicit OneForm(const WeightedGraph& g)
        : g_(&g), vals_(static_cast<size_t>(g.edge_count()), 0.0) {}

    const WeightedGraph& graph() const { return *g_; }
    std::vector<double>& values() { return vals_; }
    const std::vector<double>& values() const { return vals_; }

    /// F(x, a.to) for an adjacency entry a of vertex x.
    double at(int x, const AdjEntry& a) const {
        if (a.to == x) return 0.0;
        return g_->edges()[a.edge].u == x ? vals_[a.edge] : -vals_[a.edge];
    }

    double at(int x, int y) const {
        for (const AdjEntry& a : g_->neighbors(x))
            if (a.to == y) return at(x, a);
        throw std::invalid_argument("one-form: (x,y) is not an edge");
    }

    void set_oriented(int edge_id, double value_u_to_v) { vals_[edge_id] = value_u_to_v; }

    /// Builds a form from arbitrary directed values, verifying antisymmetry.
    static OneForm from_directed_values(const WeightedGraph& g,
                                        const std::function<double(int, int)>& f) {
        OneForm F(g);
        for (size_t id = 0; id < g.edges().size(); ++id) {
            const Edge& e = g.edges()[id];
            double fwd = f(e.u, e.v), bwd = f(e.v, e.u);
            double scale = std::max({std::abs(fwd), std::abs(bwd), 1.0});
            if (std::abs(fwd + bwd) > 1e-12 * scale)
                throw std::invalid_argument("one-form: input is not antisymmetric");
            if (e.u == e.v && fwd != 0.0)
                throw std::invalid_argument("one-form: loop value must vanish");
            F.vals_[id] = (e.u == e.v) ? 0.0 : fwd;
        }
        return F;
    }

private:
    const WeightedGraph* g_;
    std::vector<double> vals_;
};

/// General (not necessarily antisymmetric) function on directed edges, used
/// as the weight of the linearized gradient.
class DirectedEdgeField {
public:
    explicit DirectedEdgeField(const WeightedGraph& g)
        : g_(&g), fwd_(static_cast<size_t>(g.edge_count()), 0.0), bwd_(fwd_) {}

    /// value on the directed edge (x, a.to)
    double at(int x, const AdjEntry& a) const {
        return g_->edges()[a.edge].u == x ? fwd_[a.edge] : bwd_[a.edge];
    }

    void set(int x, const AdjEntry& a, double v) {
        (g_->edges()[a.edge].u == x ? fwd_ : bwd_)[a.edge] = v;
    }

    static DirectedEdgeField from_form(const OneForm& F) {
        DirectedEdgeField w(F.graph());
        const auto& edges = F.graph().edges();
        for (size_t id = 0; id < edges.size(); ++id) {
            w.fwd_[id] = F.values()[id];
            w.bwd_[id] = -F.values()[id];
        }
        return w;
    }

private:
    const WeightedGraph* g_;
    std::vector<double> fwd_, bwd_;
};

/// d f(x,y) = f(x) - f(y)
inline OneForm differential(const WeightedGraph& g, const Vector& f) {
    OneForm F(g);
    for (size_t id = 0; id < g.edges().size(); ++id) {
        const Edge& e = g.edges()[id];
        F.set_oriented(static_cast<int>(id), f[e.u] - f[e.v]);
    }
    return F;
}

/// d* F(x) = sum_{y ~ x} p(x,y) F(x,y) m(y)
inline Vector codifferential(const WeightedGraph& g, const OneForm& F) {
    Vector out(g.size());
    for (int x = 0; x < g.size(); ++x) {
        double acc = 0.0;
        for (const AdjEntry& a : g.neighbors(x)) acc += a.weight * F.at(x, a);
        out[x] = acc / g.measure(x);
    }
    return out;
}

/// |F_x|_{T_x} = (1/2 sum_y p(x,y) m(y) |F(x,y)|^2)^{1/2}
inline double tx_norm(const WeightedGraph& g, const OneForm& F, int x) {
    double acc = 0.0;
    for (const AdjEntry& a : g.neighbors(x)) {
        double v = F.at(x, a);
        acc += a.weight * v * v;
    }
    return std::sqrt(0.5 * acc / g.measure(x));
}

inline double tx_norm(const WeightedGraph& g, const DirectedEdgeField& W, int x) {
    double acc = 0.0;
    for (const AdjEntry& a : g.neighbors(x)) {
        double v = W.at(x, a);
        acc += a.weight * v * v;
    }
    return std::sqrt(0.5 * acc / g.measure(x));
}

/// pointwise tangent norms x -> |F(x,.)|_{T_x}
inline Vector tx_norms(const WeightedGraph& g, const OneForm& F) {
    Vector out(g.size());
    for (int x = 0; x < g.size(); ++x) out[x] = tx_norm(g, F, x);
    return out;
}

inline double form_inner(const WeightedGraph& g, const OneForm& F, const OneForm& G) {
    double acc = 0.0;
    for (size_t id = 0; id < g.edges().size(); ++id) {
        const Edge& e = g.edges()[id];
        if (e.u != e.v) acc += e.w * F.values()[id] * G.values()[id];
    }
    return acc;
}

inline double form_norm_p(const WeightedGraph& g, const OneForm& F, double p) {
    Vector t = tx_norms(g, F);
    if (std::isinf(p)) return t.lpNorm<Eigen::Infinity>();
    double acc = 0.0;
    for (int x = 0; x < g.size(); ++x) acc += std::pow(t[x], p) * g.measure(x);
    return std::pow(acc, 1.0 / p);
}

inline double form_norm_2(const WeightedGraph& g, const OneForm& F) {
    return std::sqrt(form_inner(g, F, F));
}

/// length of the gradient: grad f(x) = |df(x,.)|_{T_x}
inline Vector gradient_length(const WeightedGraph& g, const Vector& f) {
    Vector out(g.size());
    for (int x = 0; x < g.size(); ++x) {
        double acc = 0.0;
        for (const AdjEntry& a : g.neighbors(x)) {
            double v = f[x] - f[a.to];
            acc += a.weight * v * v;
        }
        out[x] = std::sqrt(0.5 * acc / g.measure(x));
    }
    return out;
}

inline double lp_norm(const WeightedGraph& g, const Vector& f, double p) {
    if (std::isinf(p)) return f.lpNorm<Eigen::Infinity>();
    double acc = 0.0;
    for (int x = 0; x < g.size(); ++x) acc += std::pow(std::abs(f[x]), p) * g.measure(x);
    return std::pow(acc, 1.0 / p);
}

inline double l2_inner(const WeightedGraph& g, const Vector& f, const Vector& h) {
    double acc = 0.0;
    for (int x = 0; x < g.size(); ++x) acc += f[x] * h[x] * g.measure(x);
    return acc;
}

inline double l2_norm(const WeightedGraph& g, const Vector& f) {
    return std::sqrt(l2_inner(g, f, f));
}

/// m-weighted mean, and the projection onto mean-zero functions.
inline double mean_value(const WeightedGraph& g, const Vector& f) {
    double acc = 0.0;
    for (int x = 0; x < g.size(); ++x) acc += f[x] * g.measure(x);
    return acc / g.total_measure();
}

inline Vector mean_zero_project(const WeightedGraph& g, const Vector& f, double* mean_out = nullptr) {
    double mu = mean_value(g, f);
    if (mean_out) *mean_out = mu;
    return f - Vector::Constant(g.size(), mu);
}

/// (I + s Delta)^{-1} f  (spectral route)
inline Vector resolvent(const WeightedGraph& g, double s, const Vector& f) {
    if (!(s > 0.0)) throw std::invalid_argument("resolvent: s must be positive");
    return spectral_of(g).apply([s](double l) { return 1.0 / (1.0 + s * (1.0 - l)); }, f);
}

/// (I + s Delta)^{-1/2} f  (spectral route)
inline Vector resolvent_sqrt(const WeightedGraph& g, double s, const Vector& f) {
    if (!(s > 0.0)) throw std::invalid_argument("resolvent_sqrt: s must be positive");
    return spectral_of(g).apply(
        [s](double l) { return 1.0 / std::sqrt(1.0 + s * (1.0 - l)); }, f);
}

/// Delta^beta f with phi(1) = 0, so constants are annihilated for every
/// beta > 0 including fractional exponents.
inline Vector fractional_laplacian(const WeightedGraph& g, double beta, const Vector& f) {
    if (!(beta > 0.0)) throw std::invalid_argument("fractional_laplacian: beta must be positive");
    return spectral_of(g).apply_with_top(
        [beta](double l) { return std::pow(std::max(1.0 - l, 0.0), beta); }, 0.0, f);
}

/// Delta^{-alpha} on mean-zero functions (the mean is projected out first).
inline Vector negative_power_laplacian(const WeightedGraph& g, double alpha, const Vector& f) {
    Vector f0 = mean_zero_project(g, f);
    return spectral_of(g).apply_with_top(
        [alpha](double l) { return std::pow(std::max(1.0 - l, 1e-300), -alpha); }, 0.0, f0);
}

struct RieszResult {
    OneForm form;
    double projected_mean = 0.0;  // m-mean removed from the input
};

/// Riesz transform d Delta^{-1/2} f.
inline RieszResult riesz_transform(const WeightedGraph& g, const Vector& f) {
    double mean = 0.0;
    Vector f0 = mean_zero_project(g, f, &mean);
    Vector half = spectral_of(g).apply_with_top(
        [](double l) { return std::pow(std::max(1.0 - l, 1e-300), -0.5); }, 0.0, f0);
    return RieszResult{differential(g, half), mean};
}

/// grad_phi f(x) = sum_y p(x,y) df(x,y) phi(x,y) m(y); requires
/// sup_x |phi(x,.)|_{T_x} <= 1.
inline Vector linearized_gradient(const WeightedGraph& g, const DirectedEdgeField& phi,
                                  const Vector& f) {
    for (int x = 0; x < g.size(); ++x)
        if (tx_norm(g, phi, x) > 1.0 + 1e-10)
            throw std::invalid_argument("linearized_gradient: weight exceeds unit T_x bound");
    Vector out(g.size());
    for (int x = 0; x < g.size(); ++x) {
        double acc = 0.0;
        for (const AdjEntry& a : g.neighbors(x)) acc += a.weight * (f[x] - f[a.to]) * phi.at(x, a);
        out[x] = acc / g.measure(x);
    }
    return out;
}

/// The linearizing weight phi_f(x,y) = df(x,y) / grad f(x), zero where the
/// gradient vanishes. Not antisymmetric in general.
inline DirectedEdgeField linearizing_weight(const WeightedGraph& g, const Vector& f) {
    Vector grad = gradient_length(g, f);
    DirectedEdgeField phi(g);
    for (int x = 0; x < g.size(); ++x) {
        if (grad[x] == 0.0) continue;
        for (const AdjEntry& a : g.neighbors(x)) phi.set(x, a, (f[x] - f[a.to]) / grad[x]);
    }
    return phi;
}

}  // namespace rieszlab
