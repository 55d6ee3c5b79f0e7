#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "rieszlab/graph.hpp"

namespace rieszlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Random-walk operator P f(x) = sum_y p(x,y) f(y) m(y) with
/// p(x,y) = mu_xy / (m(x) m(y)). Self-adjoint on L^2(Gamma, m).
class MarkovOperator {
public:
    explicit MarkovOperator(const WeightedGraph& g) : g_(&g) {}

    const WeightedGraph& graph() const { return *g_; }

    void apply(const Vector& f, Vector& out) const {
        const int n = g_->size();
        out.resize(n);
        for (int x = 0; x < n; ++x) {
            double acc = 0.0;
            for (const AdjEntry& a : g_->neighbors(x)) acc += a.weight * f[a.to];
            out[x] = acc / g_->measure(x);
        }
    }

    Vector apply(const Vector& f) const {
        Vector out;
        apply(f, out);
        return out;
    }

    Vector power_apply(const Vector& f, int k) const {
        Vector cur = f, next;
        for (int i = 0; i < k; ++i) {
            apply(cur, next);
            cur.swap(next);
        }
        return cur;
    }

    Vector laplacian(const Vector& f) const {
        Vector out;
        apply(f, out);
        return f - out;
    }

    /// kernel value p(x,y) of the one-step operator
    double p(int x, int y) const {
        for (const AdjEntry& a : g_->neighbors(x))
            if (a.to == y) return a.weight / (g_->measure(x) * g_->measure(y));
        return 0.0;
    }

private:
    const WeightedGraph* g_;
};

/// (k Delta)^j P^{k-1} f by repeated application.
inline Vector laplacian_power_apply(const WeightedGraph& g, const Vector& f, int j, int k) {
    if (j < 0 || k < 1) throw std::invalid_argument("laplacian_power_apply: need j >= 0, k >= 1");
    MarkovOperator P(g);
    Vector cur = P.power_apply(f, k - 1);
    for (int i = 0; i < j; ++i) cur = static_cast<double>(k) * P.laplacian(cur);
    return cur;
}

/// Iterated kernel rows p_k(x, .) for k = 0..K from one source.
/// p_0(x,y) = delta(x,y)/m(y); p_{k+1} = P p_k in the second argument.
struct KernelField {
    int32_t source = 0;
    std::vector<Vector> rows;  // rows[k][y] = p_k(source, y)

    double mass_gap(const WeightedGraph& g) const {
        double worst = 0.0;
        for (const Vector& r : rows) {
            double mass = 0.0;
            for (int y = 0; y < g.size(); ++y) mass += r[y] * g.measure(y);
            worst = std::max(worst, std::abs(mass - 1.0));
        }
        return worst;
    }
};

inline KernelField kernel_rows(const WeightedGraph& g, int x, int K) {
    if (K < 0) throw std::invalid_argument("kernel_rows: K must be >= 0");
    KernelField field;
    field.source = x;
    Vector row = Vector::Zero(g.size());
    row[x] = 1.0 / g.measure(x);
    field.rows.push_back(row);
    MarkovOperator P(g);
    Vector next;
    for (int k = 0; k < K; ++k) {
        P.apply(field.rows.back(), next);
        field.rows.push_back(next);
    }
    return field;
}

/// Streams p_k(x,.) without storing the history; visit(k, row) is called for
/// k = 0..K in order.
template <class Visitor>
void kernel_row_stream(const WeightedGraph& g, int x, int K, Visitor&& visit) {
    Vector row = Vector::Zero(g.size());
    row[x] = 1.0 / g.measure(x);
    visit(0, row);
    MarkovOperator P(g);
    Vector next;
    for (int k = 1; k <= K; ++k) {
        P.apply(row, next);
        row.swap(next);
        visit(k, row);
    }
}

/// Dense eigendecomposition of P as a self-adjoint operator on L^2(Gamma,m),
/// through the symmetric conjugate S = D^{1/2} P D^{-1/2}.
class SpectralDecomposition {
public:
    static constexpr int kMaxDense = 4096;

    explicit SpectralDecomposition(const WeightedGraph& g) {
        const int n = g.size();
        if (n > kMaxDense)
            throw std::runtime_error(
                "spectral: graph too large for dense eigendecomposition; use series_apply");
        sqrt_m_.resize(n);
        for (int x = 0; x < n; ++x) sqrt_m_[x] = std::sqrt(g.measure(x));
        Matrix S = Matrix::Zero(n, n);
        for (int x = 0; x < n; ++x)
            for (const AdjEntry& a : g.neighbors(x))
                S(x, a.to) = a.weight / (sqrt_m_[x] * sqrt_m_[a.to]);
        Eigen::SelfAdjointEigenSolver<Matrix> es(S);
        if (es.info() != Eigen::Success) throw std::runtime_error("spectral: solver failed");
        lambda_ = es.eigenvalues();  // ascending; last is 1 (constants)
        U_ = es.eigenvectors();
    }

    int size() const { return static_cast<int>(lambda_.size()); }
    const Vector& eigenvalues() const { return lambda_; }
    double lambda_min() const { return lambda_[0]; }
    /// largest eigenvalue strictly below the top (the mean-zero contraction rate)
    double lambda_second() const { return lambda_[size() - 2]; }
    double spectral_gap() const { return 1.0 - lambda_second(); }

    /// m-orthonormal eigenfunction for eigenvalue index i (ascending order).
    Vector eigenfunction(int i) const { return U_.col(i).cwiseQuotient(sqrt_m_); }

    /// phi(P) f; phi is evaluated on every eigenvalue including the top one.
    Vector apply(const std::function<double(double)>& phi, const Vector& f) const {
        Vector c = U_.transpose() * sqrt_m_.cwiseProduct(f);
        for (int i = 0; i < size(); ++i) c[i] *= phi(lambda_[i]);
        return (U_ * c).cwiseQuotient(sqrt_m_);
    }

    /// phi(P) f with the top (constant) eigenvalue handled separately, for
    /// functions singular at lambda = 1 such as (1-lambda)^{-1/2}.
    Vector apply_with_top(const std::function<double(double)>& phi, double top_value,
                          const Vector& f) const {
        Vector c = U_.transpose() * sqrt_m_.cwiseProduct(f);
        const int n = size();
        for (int i = 0; i < n - 1; ++i) c[i] *= phi(lambda_[i]);
        c[n - 1] *= top_value;
        return (U_ * c).cwiseQuotient(sqrt_m_);
    }

private:
    Vector lambda_;
    Matrix U_;
    Vector sqrt_m_;
};

/// Per-graph spectral cache, built once under the graph's own lock and tied
/// to its lifetime.
inline const SpectralDecomposition& spectral_of(const WeightedGraph& g) {
    std::lock_guard<std::mutex> lock(g.aux_cache_mutex());
    auto& slot = g.aux_cache_slot();
    if (!slot) slot = std::make_shared<SpectralDecomposition>(g);
    return *static_cast<SpectralDecomposition*>(slot.get());
}

inline Vector spectral_apply(const WeightedGraph& g, const std::function<double(double)>& phi,
                             const Vector& f) {
    return spectral_of(g).apply(phi, f);
}

/// Truncated power series sum_k c_k P^k with its tail bound certificate.
struct SeriesCoeffs {
    std::vector<double> c;
    double tail_bound = 0.0;  // bound on the dropped operator mass, see makers below
    size_t length() const { return c.size(); }
};

struct SeriesResult {
    Vector value;
    size_t terms_used = 0;
};

inline SeriesResult series_apply(const WeightedGraph& g, const SeriesCoeffs& coeffs,
                                 const Vector& f) {
    if (coeffs.c.empty()) throw std::invalid_argument("series_apply: empty coefficient list");
    MarkovOperator P(g);
    Vector acc = coeffs.c[0] * f;
    Vector cur = f, next;
    for (size_t k = 1; k < coeffs.c.size(); ++k) {
        P.apply(cur, next);
        cur.swap(next);
        acc += coeffs.c[k] * cur;
    }
    return SeriesResult{std::move(acc), coeffs.c.size()};
}

namespace series {

constexpr size_t kMaxTerms = 1u << 24;

/// (I + s Delta)^{-1} = sum_k (1/(1+s)) (s/(1+s))^k P^k; geometric tail, valid
/// for every |lambda| <= 1.
inline SeriesCoeffs resolvent_coeffs(double s, double tol) {
    if (!(s > 0.0)) throw std::invalid_argument("resolvent series: s must be positive");
    double sigma = s / (1.0 + s);
    SeriesCoeffs out;
    double term = 1.0 / (1.0 + s);
    double tail = 1.0;  // sum_{j>k} sigma^j / (1+s) = sigma^{k+1}
    for (size_t k = 0;; ++k) {
        out.c.push_back(term);
        tail *= sigma;
        if (tail <= tol) break;
        if (k + 1 >= kMaxTerms)
            throw std::runtime_error("resolvent series: tail does not reach tolerance " +
                                     std::to_string(tol) + " within term cap");
        term *= sigma;
    }
    out.tail_bound = tail;
    return out;
}

/// Taylor coefficients of (1-z)^{-1/2}: a_k = C(2k,k) 4^{-k}, decreasing.
inline double sqrt_recip_coeff_step(double a_k, size_t k) {
    return a_k * (2.0 * k + 1.0) / (2.0 * k + 2.0);
}

/// (I + s Delta)^{-1/2} = (1+s)^{-1/2} sum_k a_k (s/(1+s))^k P^k with a_k from
/// (1-z)^{-1/2}; tail bounded by a_{L+1} sigma^{L+1} (1+s) / sqrt(1+s).
inline SeriesCoeffs resolvent_sqrt_coeffs(double s, double tol) {
    if (!(s > 0.0)) throw std::invalid_argument("resolvent_sqrt series: s must be positive");
    double sigma = s / (1.0 + s);
    double scale = 1.0 / std::sqrt(1.0 + s);
    SeriesCoeffs out;
    double a = 1.0, sig_pow = 1.0;
    for (size_t k = 0;; ++k) {
        out.c.push_back(scale * a * sig_pow);
        double a_next = sqrt_recip_coeff_step(a, k);
        double tail = scale * a_next * sig_pow * sigma / (1.0 - sigma);
        if (tail <= tol) {
            out.tail_bound = tail;
            break;
        }
        if (k + 1 >= kMaxTerms)
            throw std::runtime_error("resolvent_sqrt series: tail does not reach tolerance " +
                                     std::to_string(tol) + " within term cap");
        a = a_next;
        sig_pow *= sigma;
    }
    return out;
}

/// Coefficients of (1-z)^{gamma} for gamma in (-1, 0), truncated using a known
/// contraction factor lambda_star < 1 on the mean-zero subspace. The caller
/// applies the result to a mean-zero input (e.g. Delta f).
inline SeriesCoeffs fractional_power_coeffs(double gamma, double lambda_star, double tol) {
    if (!(gamma > -1.0 && gamma < 0.0))
        throw std::invalid_argument("fractional series: exponent must lie in (-1,0)");
    if (!(lambda_star >= 0.0 && lambda_star < 1.0))
        throw std::runtime_error(
            "fractional series: tail not convergent under tolerance (need contraction < 1; "
            "got lambda_star = " +
            std::to_string(lambda_star) + ")");
    SeriesCoeffs out;
    double a = 1.0, lpow = 1.0;
    for (size_t k = 0;; ++k) {
        out.c.push_back(a);
        double a_next = a * (static_cast<double>(k) - gamma) / (static_cast<double>(k) + 1.0);
        double tail = a_next * lpow * lambda_star / (1.0 - lambda_star);
        if (tail <= tol) {
            out.tail_bound = tail;
            break;
        }
        if (k + 1 >= kMaxTerms)
            throw std::runtime_error("fractional series: tail does not reach tolerance " +
                                     std::to_string(tol) + " within term cap");
        a = a_next;
        lpow *= lambda_star;
    }
    return out;
}

}  // namespace series

}  // namespace rieszlab
