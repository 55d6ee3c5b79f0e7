#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rieszlab/calculus.hpp"
#include "rieszlab/functionals.hpp"
#include "rieszlab/graph.hpp"
#include "rieszlab/markov.hpp"
#include "rieszlab/metric.hpp"

namespace rieszlab {

struct TentPoint {
    int32_t y = 0;
    int32_t k = 1;
    double value = 0.0;
};

/// T^1-atom: supported in hat B for a ball B = B(center, radius), with
/// sum_{(y,k) in hat B} m(y)/k |A(y,k)|^2 <= 1/V(B).
struct TentAtom {
    int32_t center = 0;
    double radius = 0.0;
    std::vector<TentPoint> points;
};

struct TentAtomCertificate {
    bool support_ok = false;
    double quad_sum = 0.0;
    double bound = 0.0;  // 1/V(B)
    bool ok() const { return support_ok && quad_sum <= bound * (1.0 + 1e-10); }
};

inline TentAtomCertificate check_tent_atom(const QuasiMetric& q, const TentAtom& atom) {
    TentAtomCertificate cert;
    const int n = q.size();
    std::vector<double> row;
    q.rho_row(atom.center, row);
    std::vector<char> outside(n, 0);
    int ball_size = 0;
    for (int z = 0; z < n; ++z) {
        outside[z] = row[z] < atom.radius ? 0 : 1;
        ball_size += 1 - outside[z];
    }
    double V = 0.0;
    for (int z = 0; z < n; ++z)
        if (!outside[z]) V += q.measure(z);
    cert.bound = 1.0 / V;
    cert.support_ok = true;
    for (const TentPoint& pt : atom.points) {
        cert.quad_sum += q.measure(pt.y) / pt.k * pt.value * pt.value;
        if (ball_size < n) {
            double reach = q.rho_to_set(pt.y, outside);
            if (reach < static_cast<double>(pt.k)) cert.support_ok = false;
        }
    }
    return cert;
}

struct TentDecomposition {
    std::vector<TentAtom> atoms;
    std::vector<double> lambda;
    double t1_norm = 0.0;        // ||F||_{T^1} = sum_x A F(x) m(x)
    double t2_norm = 0.0;
    double residual_t2 = 0.0;    // T^2 norm of F - sum lambda_j A_j
    double sum_abs_lambda = 0.0;
};

/// Stopping-time atomic decomposition of a finite tent field.
///
/// Level sets O_i = {A F > 2^i} over the dyadic range of A F; each tent point
/// carries its level i with hat(O_i) \ hat(O_{i+1}); each O_i is covered
/// greedily by balls B(x_j, rho(x_j, O_i^c) / 2^{B+1}) with centers taken in
/// decreasing distance-to-complement order, and a tent point is assigned to
/// the cover ball of its vertex. The certifying ball of a piece is the cover
/// ball dilated by 4^B, which contains every assigned tent point in its hat.
/// Pieces are rescaled to saturate the atom bound, the scale absorbed into
/// lambda, so the reconstruction is exact on the finite index set.
inline TentDecomposition tent_atomic_decompose(const QuasiMetric& q, const TentField& F,
                                               double tol = 1e-8) {
    const int n = q.size(), K = F.K_max;
    TentDecomposition dec;
    Vector AF = tent_A(q, F);
    for (int x = 0; x < n; ++x) dec.t1_norm += AF[x] * q.measure(x);
    {
        double acc = 0.0;
        for (int x = 0; x < n; ++x) acc += AF[x] * AF[x] * q.measure(x);
        dec.t2_norm = std::sqrt(acc);
    }
    double max_af = AF.maxCoeff();
    if (max_af <= 0.0) return dec;  // zero field: empty decomposition
    double min_pos = max_af;
    for (int x = 0; x < n; ++x)
        if (AF[x] > 0.0) min_pos = std::min(min_pos, AF[x]);
    int i_lo = static_cast<int>(std::floor(std::log2(min_pos))) - 1;
    int i_hi = static_cast<int>(std::ceil(std::log2(max_af)));
    const double B = q.beta_bound();
    const double cover_shrink = std::exp2(B + 1.0);
    const double dilation = std::exp2(2.0 * B);  // 4^B

    // rho(x, O_i^c) per level; O_i shrinks with i so R_i decreases
    const int levels = i_hi - i_lo;  // pieces live on i = i_lo .. i_hi - 1
    std::vector<std::vector<double>> R(levels, std::vector<double>(n));
    std::vector<double> row;
    for (int li = 0; li < levels; ++li) {
        double threshold = std::exp2(static_cast<double>(i_lo + li));
        std::vector<char> complement(n);
        bool empty_complement = true;
        for (int z = 0; z < n; ++z) {
            complement[z] = AF[z] > threshold ? 0 : 1;
            if (!complement[z]) continue;
            empty_complement = false;
        }
        for (int y = 0; y < n; ++y) {
            if (empty_complement) {
                R[li][y] = std::numeric_limits<double>::infinity();
            } else {
                q.rho_row(y, row);
                double best = std::numeric_limits<double>::infinity();
                for (int z = 0; z < n; ++z)
                    if (complement[z] && row[z] < best) best = row[z];
                R[li][y] = best;
            }
        }
    }

    // greedy cover per level: ball index for every vertex of O_i
    struct CoverBall {
        int32_t center;
        double cert_radius;
    };
    std::vector<std::vector<CoverBall>> balls(levels);
    std::vector<std::vector<int32_t>> assign(levels, std::vector<int32_t>(n, -1));
    for (int li = 0; li < levels; ++li) {
        std::vector<int32_t> members;
        for (int z = 0; z < n; ++z)
            if (R[li][z] > 0.0) members.push_back(z);  // z in O_i iff rho to complement > 0
        std::stable_sort(members.begin(), members.end(), [&](int32_t a, int32_t b) {
            return R[li][a] > R[li][b];
        });
        for (int32_t x : members) {
            if (assign[li][x] >= 0) continue;
            double Rx = R[li][x];
            int ball_id = static_cast<int>(balls[li].size());
            if (std::isinf(Rx)) {
                // O_i is the whole finite space: one all-covering ball
                double radius = q.max_rho_from(x) + 1.0;
                balls[li].push_back(CoverBall{x, radius});
                for (int32_t z : members)
                    if (assign[li][z] < 0) assign[li][z] = ball_id;
                break;
            }
            balls[li].push_back(CoverBall{x, dilation * Rx});
            double cover_radius = Rx / cover_shrink;
            q.rho_row(x, row);
            for (int32_t z : members)
                if (assign[li][z] < 0 && row[z] < cover_radius) assign[li][z] = ball_id;
        }
    }

    // route every tent point to (level, ball) and cut the pieces
    std::vector<std::vector<std::vector<TentPoint>>> pieces(levels);
    for (int li = 0; li < levels; ++li) pieces[li].resize(balls[li].size());
    for (int y = 0; y < n; ++y) {
        for (int k = 1; k <= K; ++k) {
            double v = F.vals(y, k - 1);
            if (v == 0.0) continue;
            // level: the unique i with R_i(y) >= k > R_{i+1}(y)
            int li = -1;
            for (int cand = levels - 1; cand >= 0; --cand) {
                if (R[cand][y] >= static_cast<double>(k)) {
                    li = cand;
                    break;
                }
            }
            if (li < 0)
                throw std::logic_error("tent decomposition: point escapes every level set");
            int32_t ball_id = assign[li][y];
            if (ball_id < 0)
                throw std::logic_error("tent decomposition: vertex not covered at its level");
            pieces[li][ball_id].push_back(TentPoint{y, k, v});
        }
    }

    for (int li = 0; li < levels; ++li) {
        for (size_t bi = 0; bi < balls[li].size(); ++bi) {
            auto& pts = pieces[li][bi];
            if (pts.empty()) continue;
            double S = 0.0;
            for (const TentPoint& pt : pts) S += q.measure(pt.y) / pt.k * pt.value * pt.value;
            if (S <= 0.0) continue;
            double V = q.volume(balls[li][bi].center, balls[li][bi].cert_radius);
            double lam = std::sqrt(V * S);
            TentAtom atom;
            atom.center = balls[li][bi].center;
            atom.radius = balls[li][bi].cert_radius;
            atom.points = pts;
            for (TentPoint& pt : atom.points) pt.value /= lam;
            dec.atoms.push_back(std::move(atom));
            dec.lambda.push_back(lam);
            dec.sum_abs_lambda += std::abs(lam);
        }
    }

    // exact residual in T^2 via the A functional
    TentField recon = TentField::zero(n, K);
    for (size_t i = 0; i < dec.atoms.size(); ++i)
        for (const TentPoint& pt : dec.atoms[i].points)
            recon.vals(pt.y, pt.k - 1) += dec.lambda[i] * pt.value;
    recon.vals -= F.vals;
    Vector ar = tent_A(q, recon);
    double acc = 0.0;
    for (int x = 0; x < n; ++x) acc += ar[x] * ar[x] * q.measure(x);
    dec.residual_t2 = std::sqrt(acc);
    if (dec.t2_norm > 0.0 && dec.residual_t2 > tol * dec.t2_norm)
        throw std::logic_error("tent decomposition: reconstruction residual above tolerance");
    return dec;
}

/// Coefficients c_l^eta of the Taylor series of (1-z)^{-eta} indexed from
/// l = 1: sum_{l>=1} c_l^eta z^{l-1}.
inline std::vector<double> binomial_series_coeffs(int eta, int L) {
    std::vector<double> c(static_cast<size_t>(L) + 1, 0.0);
    if (L >= 1) c[1] = 1.0;
    for (int l = 1; l < L; ++l)
        c[l + 1] = c[l] * (static_cast<double>(l) + eta - 1.0) / static_cast<double>(l);
    return c;
}

namespace detail {

/// Horner sum over slabs: sum_{l=1}^{K} coeff_l P^{l-1} A(.,l).
inline Vector slab_horner(const WeightedGraph& g, const TentField& A,
                          const std::vector<double>& coeff) {
    MarkovOperator P(g);
    const int K = A.K_max;
    Vector acc = Vector::Zero(g.size());
    Vector tmp;
    for (int l = K; l >= 1; --l) {
        if (l < K) {
            P.apply(acc, tmp);
            acc.swap(tmp);
        }
        acc += coeff[l] * A.vals.col(l - 1);
    }
    return acc;
}

inline TentField atom_to_field(int n, int K, const TentAtom& atom) {
    TentField A = TentField::zero(n, K);
    for (const TentPoint& pt : atom.points) A.vals(pt.y, pt.k - 1) += pt.value;
    return A;
}

}  // namespace detail

/// pi_{eta,beta} F = sum_{l>=1} (c_l^eta / l^beta) Delta^{eta-beta} (I+P)^eta
/// P^{l-1} F(.,l), with c_l^eta from (1-z)^{-eta}. Requires eta >= ceil(beta)+1.
inline Vector pi_synthesis(const WeightedGraph& g, int eta, double beta, const TentField& F) {
    if (!(static_cast<double>(eta) > beta))
        throw std::invalid_argument("pi_synthesis: need eta > beta");
    if (eta < static_cast<int>(std::ceil(beta)) + 1)
        throw std::invalid_argument("pi_synthesis: need eta >= ceil(beta) + 1");
    auto c = binomial_series_coeffs(eta, F.K_max);
    std::vector<double> coeff(c.size());
    for (size_t l = 1; l < c.size(); ++l)
        coeff[l] = c[l] / std::pow(static_cast<double>(l), beta);
    Vector w = detail::slab_horner(g, F, coeff);
    double power = static_cast<double>(eta) - beta;
    return spectral_of(g).apply(
        [power, eta](double lam) {
            return std::pow(std::max(1.0 - lam, 0.0), power) * std::pow(1.0 + lam, eta);
        },
        w);
}

/// epsilon-molecule on Gamma (function kind) or on T_Gamma (form kind).
struct Molecule {
    enum class Kind { Function, Form };
    Kind kind = Kind::Function;
    int32_t center = 0;
    double radius = 0.0;  // real ball radius k; used as a real in (I + k Delta)^{-1}
    double eps = 1.0;
    Vector b;
    Vector a;                       // function kind realization
    std::optional<OneForm> a_form;  // form kind realization
};

struct MoleculeCertificate {
    bool structure_ok = false;     // a really is the stated image of b
    double structure_residual = 0.0;
    double worst_margin = 0.0;     // min over j of bound_j / ||b||_{C_j}; >= 1 passes
    int worst_j = -1;
    double l1_norm = 0.0;          // ||a||_1 (function) or ||a||_{L^1(T_Gamma)} (form)
    bool ok() const { return structure_ok && worst_margin >= 1.0 - 1e-10; }
};

inline MoleculeCertificate check_molecule(const WeightedGraph& g, const QuasiMetric& q,
                                          const Molecule& mol) {
    MoleculeCertificate cert;
    const double k = mol.radius;
    // structural identity
    if (mol.kind == Molecule::Kind::Function) {
        Vector expect = spectral_of(g).apply(
            [k](double lam) { return k * (1.0 - lam) / (1.0 + k * (1.0 - lam)); }, mol.b);
        double denom = std::max(l2_norm(g, expect), 1e-300);
        cert.structure_residual = l2_norm(g, Vector(expect - mol.a)) / denom;
    } else {
        Vector u = spectral_of(g).apply(
            [k](double lam) { return std::sqrt(k / (1.0 + k * (1.0 - lam))); }, mol.b);
        OneForm expect = differential(g, u);
        if (!mol.a_form) throw std::invalid_argument("check_molecule: form kind without a_form");
        double denom = std::max(form_norm_2(g, expect), 1e-300);
        OneForm diff(g);
        for (size_t id = 0; id < g.edges().size(); ++id)
            diff.values()[id] = expect.values()[id] - mol.a_form->values()[id];
        cert.structure_residual = form_norm_2(g, diff) / denom;
    }
    cert.structure_ok = cert.structure_residual <= 1e-8;
    // annular size bounds on b
    double max_rho = q.max_rho_from(mol.center);
    cert.worst_margin = std::numeric_limits<double>::infinity();
    std::vector<double> row;
    q.rho_row(mol.center, row);
    const double B = q.beta_bound();
    for (int j = 0;; ++j) {
        double inner = (j == 0) ? 0.0 : std::exp2(B + j) * k;
        if (j >= 1 && inner > max_rho) break;
        double outer = std::exp2(B + j + 1.0) * k;
        double norm2 = 0.0;
        for (int y = 0; y < g.size(); ++y) {
            bool in = (j == 0) ? (row[y] < outer) : (row[y] >= inner && row[y] < outer);
            if (in) norm2 += mol.b[y] * mol.b[y] * g.measure(y);
        }
        double V = q.volume(mol.center, std::exp2(j) * k);
        double bound = std::exp2(-j * mol.eps) / std::sqrt(std::max(V, 1e-300));
        double norm = std::sqrt(norm2);
        double margin = (norm > 0.0) ? bound / norm : std::numeric_limits<double>::infinity();
        if (margin < cert.worst_margin) {
            cert.worst_margin = margin;
            cert.worst_j = j;
        }
    }
    // L1 norm of the realization
    if (mol.kind == Molecule::Kind::Function) {
        cert.l1_norm = lp_norm(g, mol.a, 1.0);
    } else {
        cert.l1_norm = form_norm_p(g, *mol.a_form, 1.0);
    }
    return cert;
}

/// max over j of ||b||_{L^2(C_j)} 2^{j eps} V(x, 2^j k)^{1/2}: dividing b by
/// this makes every annular bound hold with equality at the worst annulus.
inline double molecule_certificate_scale(const WeightedGraph& g, const QuasiMetric& q,
                                         const Molecule& mol) {
    double k = mol.radius;
    double max_rho = q.max_rho_from(mol.center);
    std::vector<double> row;
    q.rho_row(mol.center, row);
    const double B = q.beta_bound();
    double scale = 0.0;
    for (int j = 0;; ++j) {
        double inner = (j == 0) ? 0.0 : std::exp2(B + j) * k;
        if (j >= 1 && inner > max_rho) break;
        double outer = std::exp2(B + j + 1.0) * k;
        double norm2 = 0.0;
        for (int y = 0; y < g.size(); ++y) {
            bool in = (j == 0) ? (row[y] < outer) : (row[y] >= inner && row[y] < outer);
            if (in) norm2 += mol.b[y] * mol.b[y] * g.measure(y);
        }
        double V = q.volume(mol.center, std::exp2(j) * k);
        scale = std::max(scale, std::sqrt(norm2) * std::exp2(j * mol.eps) * std::sqrt(V));
    }
    return scale;
}

struct MolecularDecomposition {
    std::vector<Molecule> molecules;
    std::vector<double> lambda;
    double sum_abs_lambda = 0.0;
    double residual_rel = 0.0;
    int eta = 0;
    int k_max = 0;
    double fitted_d0 = 0.0;
    double projected_mean = 0.0;
    TentDecomposition tent;  // the underlying tent-space decomposition
};

namespace detail {

inline double fitted_doubling_exponent(const QuasiMetric& q) {
    double diam = 0.0;
    for (int x = 0; x < q.size(); ++x) diam = std::max(diam, q.max_rho_from(x));
    std::vector<double> radii;
    for (double r = 1.0; r * 8.0 <= diam; r *= 2.0) radii.push_back(r);
    if (radii.empty()) radii.push_back(1.0);
    std::vector<int32_t> sample;
    int stride = std::max(1, q.size() / 16);
    for (int x = 0; x < q.size(); x += stride) sample.push_back(x);
    return doubling_scan(q, radii, sample).fitted_d;
}

/// Smallest K with max over mean-zero eigenvalues of
/// |1 - (1-lam^2)^eta sum_{l<=K} c_l^eta lam^{2(l-1)}| <= tol.
inline int synthesis_truncation(const SpectralDecomposition& S, int eta, double tol,
                                int k_cap = 1 << 20) {
    const int n = S.size();
    std::vector<double> lam2(n - 1), factor(n - 1), partial(n - 1, 0.0), zpow(n - 1, 1.0);
    for (int i = 0; i + 1 < n; ++i) {
        double l = S.eigenvalues()[i];
        lam2[i] = l * l;
        factor[i] = std::pow(1.0 - lam2[i], eta);
    }
    double c = 1.0;  // c_l^eta, starting at l = 1
    for (int K = 1; K <= k_cap; ++K) {
        double worst = 0.0;
        for (int i = 0; i + 1 < n; ++i) {
            partial[i] += c * zpow[i];
            zpow[i] *= lam2[i];
            worst = std::max(worst, std::abs(1.0 - factor[i] * partial[i]));
        }
        if (worst <= tol) return K;
        c *= (static_cast<double>(K) + eta - 1.0) / static_cast<double>(K);
    }
    throw std::runtime_error("molecular synthesis: truncation cap reached before tolerance");
}

}  // namespace detail

/// Molecular decomposition of a mean-zero function: Littlewood-Paley
/// transform, tent-space atomic decomposition, then pi_{eta,beta} per atom.
/// Every output molecule is normalized to pass its own certificate, the
/// normalization absorbed into the coefficient.
inline MolecularDecomposition molecular_decompose(const WeightedGraph& g, const QuasiMetric& q,
                                                  const Vector& f, double beta, double eps,
                                                  double tol = 1e-6) {
    if (!(beta > 0.0)) throw std::invalid_argument("molecular_decompose: beta must be positive");
    const int n = g.size();
    MolecularDecomposition out;
    Vector f0 = mean_zero_project(g, f, &out.projected_mean);
    double f_norm = l2_norm(g, f0);
    if (f_norm == 0.0) return out;
    const SpectralDecomposition& S = spectral_of(g);

    out.fitted_d0 = detail::fitted_doubling_exponent(q);
    out.eta = static_cast<int>(std::ceil(out.fitted_d0 / 2.0 + eps + beta)) + 2;
    out.k_max = detail::synthesis_truncation(S, out.eta, tol / 2.0);

    // F(., l) = (l Delta)^beta P^{l-1} f
    TentField F = TentField::zero(n, out.k_max);
    {
        auto slabs = heat_slabs(g, beta, f0, out.k_max);
        for (int l = 1; l <= out.k_max; ++l)
            F.vals.col(l - 1) = std::pow(static_cast<double>(l), beta) * slabs[l - 1];
    }
    out.tent = tent_atomic_decompose(q, F);

    auto c = binomial_series_coeffs(out.eta, out.k_max);
    Vector recon = Vector::Zero(n);
    const int eta = out.eta;
    for (size_t i = 0; i < out.tent.atoms.size(); ++i) {
        const TentAtom& atom = out.tent.atoms[i];
        TentField A = detail::atom_to_field(n, out.k_max, atom);
        std::vector<double> coeff(c.size());
        for (size_t l = 1; l < c.size(); ++l)
            coeff[l] = c[l] / std::pow(static_cast<double>(l), beta);
        Vector w = detail::slab_horner(g, A, coeff);
        double k = atom.radius;
        double power = static_cast<double>(eta) - beta;
        Vector a = S.apply(
            [power, eta](double lam) {
                return std::pow(std::max(1.0 - lam, 0.0), power) * std::pow(1.0 + lam, eta);
            },
            w);
        Vector b = S.apply(
            [power, eta, k](double lam) {
                return (1.0 + k * (1.0 - lam)) / k *
                       std::pow(std::max(1.0 - lam, 0.0), power - 1.0) *
                       std::pow(1.0 + lam, eta);
            },
            w);
        recon += out.tent.lambda[i] * a;

        Molecule mol;
        mol.kind = Molecule::Kind::Function;
        mol.center = atom.center;
        mol.radius = k;
        mol.eps = eps;
        mol.b = b;
        mol.a = a;
        // normalize so the annular certificate saturates; lambda absorbs it
        double scale = molecule_certificate_scale(g, q, mol);
        if (scale <= 0.0) continue;
        mol.b /= scale;
        mol.a /= scale;
        out.molecules.push_back(std::move(mol));
        out.lambda.push_back(out.tent.lambda[i] * scale);
        out.sum_abs_lambda += std::abs(out.tent.lambda[i] * scale);
    }
    out.residual_rel = l2_norm(g, Vector(f0 - recon)) / f_norm;
    return out;
}

struct E1AtomCheck {
    bool valid = false;
    std::string clause;  // violated clause when invalid
    Vector a;
};

/// E^1_0 atom checker: a = (I - P^k) b with b supported in B(x,k) and
/// ||b||_{L^2} <= V(x,k)^{-1/2}; k is the integer radius.
inline E1AtomCheck check_e1_atom(const WeightedGraph& g, const QuasiMetric& q, const Vector& b,
                                 int center, int k) {
    E1AtomCheck out;
    if (k < 1) throw std::invalid_argument("check_e1_atom: k must be >= 1");
    std::vector<double> row;
    q.rho_row(center, row);
    double bmax = b.cwiseAbs().maxCoeff();
    for (int y = 0; y < g.size(); ++y) {
        if (row[y] >= static_cast<double>(k) && std::abs(b[y]) > 1e-14 * bmax) {
            out.clause = "support";
            return out;
        }
    }
    double V = q.volume(center, static_cast<double>(k));
    if (l2_norm(g, b) > (1.0 + 1e-10) / std::sqrt(V)) {
        out.clause = "norm";
        return out;
    }
    MarkovOperator P(g);
    out.a = b - P.power_apply(b, k);
    out.valid = true;
    return out;
}

struct FormDecomposition {
    std::vector<Molecule> molecules;
    std::vector<double> lambda;
    double sum_abs_lambda = 0.0;
    double residual_rel = 0.0;  // in L^2(T_Gamma), against d Delta^{-1/2} f
    int eta = 0;
    int k_max = 0;
    double projected_mean = 0.0;
};

/// Decomposes the Riesz image d Delta^{-1/2} f into form molecules
/// sqrt(k) d (I + k Delta)^{-1/2} b via the beta = 1/2 tent pipeline.
inline FormDecomposition riesz_hardy_map(const WeightedGraph& g, const QuasiMetric& q,
                                         const Vector& f, double eps, double tol = 1e-6) {
    const int n = g.size();
    const double beta = 0.5;
    FormDecomposition out;
    Vector f0 = mean_zero_project(g, f, &out.projected_mean);
    if (l2_norm(g, f0) == 0.0) return out;
    const SpectralDecomposition& S = spectral_of(g);
    double d0 = detail::fitted_doubling_exponent(q);
    out.eta = static_cast<int>(std::ceil(d0 / 2.0 + eps + beta)) + 2;
    out.k_max = detail::synthesis_truncation(S, out.eta, tol / 2.0);

    TentField F = TentField::zero(n, out.k_max);
    {
        auto slabs = heat_slabs(g, beta, f0, out.k_max);
        for (int l = 1; l <= out.k_max; ++l)
            F.vals.col(l - 1) = std::sqrt(static_cast<double>(l)) * slabs[l - 1];
    }
    TentDecomposition tent = tent_atomic_decompose(q, F);

    RieszResult riesz = riesz_transform(g, f0);
    double g_norm = form_norm_2(g, riesz.form);

    auto c = binomial_series_coeffs(out.eta, out.k_max);
    OneForm recon(g);
    const int eta = out.eta;
    for (size_t i = 0; i < tent.atoms.size(); ++i) {
        const TentAtom& atom = tent.atoms[i];
        TentField A = detail::atom_to_field(n, out.k_max, atom);
        std::vector<double> coeff(c.size());
        for (size_t l = 1; l < c.size(); ++l)
            coeff[l] = c[l] / std::sqrt(static_cast<double>(l));
        Vector w = detail::slab_horner(g, A, coeff);
        double k = atom.radius;
        // d Delta^{-1/2} pi_{eta,1/2}(A) = d Delta^{eta-1} (I+P)^eta w
        Vector u = S.apply(
            [eta](double lam) {
                return std::pow(std::max(1.0 - lam, 0.0), eta - 1.0) * std::pow(1.0 + lam, eta);
            },
            w);
        Vector b = S.apply(
            [eta, k](double lam) {
                return std::sqrt((1.0 + k * (1.0 - lam)) / k) *
                       std::pow(std::max(1.0 - lam, 0.0), eta - 1.0) * std::pow(1.0 + lam, eta);
            },
            w);
        OneForm a_form = differential(g, u);
        for (size_t id = 0; id < g.edges().size(); ++id)
            recon.values()[id] += tent.lambda[i] * a_form.values()[id];

        Molecule mol;
        mol.kind = Molecule::Kind::Form;
        mol.center = atom.center;
        mol.radius = k;
        mol.eps = eps;
        mol.b = b;
        mol.a_form = std::move(a_form);
        double scale = molecule_certificate_scale(g, q, mol);
        if (scale <= 0.0) continue;
        mol.b /= scale;
        for (double& v : mol.a_form->values()) v /= scale;
        out.molecules.push_back(std::move(mol));
        out.lambda.push_back(tent.lambda[i] * scale);
        out.sum_abs_lambda += std::abs(tent.lambda[i] * scale);
    }
    OneForm diff(g);
    for (size_t id = 0; id < g.edges().size(); ++id)
        diff.values()[id] = riesz.form.values()[id] - recon.values()[id];
    out.residual_rel = (g_norm > 0.0) ? form_norm_2(g, diff) / g_norm : 0.0;
    return out;
}

}  // namespace rieszlab
