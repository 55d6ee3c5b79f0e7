#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "rieszlab/builders.hpp"
#include "rieszlab/calculus.hpp"
#include "rieszlab/functionals.hpp"
#include "rieszlab/graph.hpp"
#include "rieszlab/hardy.hpp"
#include "rieszlab/markov.hpp"
#include "rieszlab/metric.hpp"
#include "rieszlab/parallel.hpp"
#include "rieszlab/report.hpp"
#include "rieszlab/rng.hpp"

namespace rieszlab {

/// Vertices x with rho(x, boundary) >= margin * k: far enough from the
/// truncation boundary that k-step kernels match the infinite graph.
inline std::vector<int32_t> safe_zone(const BuiltGraph& bg, double k, double margin = 4.0) {
    std::vector<int32_t> safe;
    const int n = bg.metric.size();
    if (bg.boundary.empty()) {
        for (int x = 0; x < n; ++x) safe.push_back(x);
        return safe;
    }
    std::vector<char> mask(n, 0);
    for (int32_t b : bg.boundary) mask[b] = 1;
    for (int x = 0; x < n; ++x)
        if (bg.metric.rho_to_set(x, mask) >= margin * k) safe.push_back(x);
    return safe;
}

/// Evenly spread subsample of a vertex list.
inline std::vector<int32_t> spread_sample(const std::vector<int32_t>& pool, int count) {
    std::vector<int32_t> out;
    if (pool.empty() || count <= 0) return out;
    if (static_cast<int>(pool.size()) <= count) return pool;
    for (int i = 0; i < count; ++i)
        out.push_back(pool[static_cast<size_t>(i) * pool.size() / count]);
    return out;
}

/// The vertex deepest inside the safe zone (max rho to the boundary).
inline int32_t deepest_vertex(const BuiltGraph& bg) {
    const int n = bg.metric.size();
    if (bg.boundary.empty()) return 0;
    std::vector<char> mask(n, 0);
    for (int32_t b : bg.boundary) mask[b] = 1;
    int best = 0;
    double best_rho = -1.0;
    for (int x = 0; x < n; ++x) {
        double r = bg.metric.rho_to_set(x, mask);
        if (r > best_rho) {
            best_rho = r;
            best = x;
        }
    }
    return best;
}

// --------------------------------------------------------------------------
// (UE) verification: C_N^emp(k) = max over safe (x,y) of
// p_{k-1}(x,y) V(x,k) (1 + rho(x,y)/k)^N, stable across dyadic k.
// --------------------------------------------------------------------------

struct UeOptions {
    std::vector<int> N_list{0, 1, 2, 3, 4};
    std::vector<int> k_grid{4, 8, 16, 32, 64};
    int sources = 8;
    double margin = 4.0;
    double band = 2.0;
};

inline Report verify_ue(const BuiltGraph& bg, const UeOptions& opt = {}) {
    WallTimer timer;
    Report rep("verify_ue", bg.family);
    rep.payload["params"] = {{"N_list", opt.N_list},
                             {"k_grid", opt.k_grid},
                             {"sources", opt.sources},
                             {"margin", opt.margin}};
    const WeightedGraph& g = *bg.graph;
    int k_max = *std::max_element(opt.k_grid.begin(), opt.k_grid.end());
    auto safe = safe_zone(bg, k_max, opt.margin);
    if (safe.empty()) throw std::runtime_error("verify_ue: empty safe zone");
    auto sources = spread_sample(safe, opt.sources);

    // C[source][grid][N]
    std::vector<std::vector<std::vector<double>>> C(
        sources.size(),
        std::vector<std::vector<double>>(opt.k_grid.size(),
                                         std::vector<double>(opt.N_list.size(), 0.0)));
    parallel_for(0, static_cast<int64_t>(sources.size()), [&](int64_t si) {
        int32_t x = sources[si];
        std::vector<double> rho;
        bg.metric.rho_row(x, rho);
        kernel_row_stream(g, x, k_max - 1, [&](int step, const Vector& row) {
            for (size_t gi = 0; gi < opt.k_grid.size(); ++gi) {
                int k = opt.k_grid[gi];
                if (step != k - 1) continue;
                double V = bg.metric.volume(x, static_cast<double>(k));
                for (size_t ni = 0; ni < opt.N_list.size(); ++ni) {
                    int N = opt.N_list[ni];
                    double best = 0.0;
                    for (int y = 0; y < g.size(); ++y) {
                        double c = row[y] * V * std::pow(1.0 + rho[y] / k, N);
                        best = std::max(best, c);
                    }
                    C[si][gi][ni] = best;
                }
            }
        });
    });

    std::vector<std::vector<double>> rows;
    bool all_pass = true;
    for (size_t ni = 0; ni < opt.N_list.size(); ++ni) {
        double cmin = std::numeric_limits<double>::infinity(), cmax = 0.0;
        for (size_t gi = 0; gi < opt.k_grid.size(); ++gi) {
            double c = 0.0;
            for (size_t si = 0; si < sources.size(); ++si) c = std::max(c, C[si][gi][ni]);
            rows.push_back({static_cast<double>(opt.N_list[ni]),
                            static_cast<double>(opt.k_grid[gi]), c});
            cmin = std::min(cmin, c);
            cmax = std::max(cmax, c);
        }
        bool pass = cmax <= opt.band * cmin;
        all_pass = all_pass && pass;
        rep.add_verdict("ue_stability_N" + std::to_string(opt.N_list[ni]), pass,
                        "max/min = " + format_double(cmax / cmin));
    }
    rep.add_table("constants", {"N", "k", "C_emp"}, rows);
    rep.add_verdict("ue_stability_all", all_pass, "factor-" + format_double(opt.band) + " band");
    rep.wall_ms = timer.ms();
    return rep;
}

// --------------------------------------------------------------------------
// On-diagonal decay: slope of log p_{2k}(x,x) vs log k, and the band of
// p_{2k}(x,x) V(x,k).
// --------------------------------------------------------------------------

struct DiagonalOptions {
    std::vector<int> k_grid{8, 16, 32, 64, 128};
    int sources = 5;
    double margin = 4.0;
};

struct DiagonalResult {
    Report report;
    LineFit fit;
    double ratio_band = 0.0;  // max/min of p_{2k}(x,x) V(x,k)
};

inline DiagonalResult fit_on_diagonal(const BuiltGraph& bg, const DiagonalOptions& opt = {}) {
    WallTimer timer;
    DiagonalResult out{Report("fit_on_diagonal", bg.family), {}, 0.0};
    Report& rep = out.report;
    rep.payload["params"] = {{"k_grid", opt.k_grid}, {"sources", opt.sources}};
    const WeightedGraph& g = *bg.graph;
    int k_max = *std::max_element(opt.k_grid.begin(), opt.k_grid.end());
    auto safe = safe_zone(bg, k_max, opt.margin);
    if (safe.empty()) throw std::runtime_error("fit_on_diagonal: empty safe zone");
    auto sources = spread_sample(safe, opt.sources);

    std::vector<std::vector<double>> diag(sources.size(),
                                          std::vector<double>(opt.k_grid.size(), 0.0));
    parallel_for(0, static_cast<int64_t>(sources.size()), [&](int64_t si) {
        int32_t x = sources[si];
        kernel_row_stream(g, x, 2 * k_max, [&](int step, const Vector& row) {
            for (size_t gi = 0; gi < opt.k_grid.size(); ++gi)
                if (step == 2 * opt.k_grid[gi]) diag[si][gi] = row[x];
        });
    });

    std::vector<double> log_k, log_p;
    std::vector<std::vector<double>> rows;
    double band_lo = std::numeric_limits<double>::infinity(), band_hi = 0.0;
    for (size_t gi = 0; gi < opt.k_grid.size(); ++gi) {
        int k = opt.k_grid[gi];
        double mean_log = 0.0;
        for (size_t si = 0; si < sources.size(); ++si) {
            double p = diag[si][gi];
            mean_log += std::log(p);
            double ratio = p * bg.metric.volume(sources[si], static_cast<double>(k));
            band_lo = std::min(band_lo, ratio);
            band_hi = std::max(band_hi, ratio);
            rows.push_back({static_cast<double>(k), static_cast<double>(sources[si]), p, ratio});
        }
        log_k.push_back(std::log(static_cast<double>(k)));
        log_p.push_back(mean_log / sources.size());
    }
    out.fit = fit_line(log_k, log_p);
    out.ratio_band = band_hi / band_lo;
    rep.add_table("diagonal", {"k", "source", "p_2k", "p_2k_times_V"}, rows);
    rep.payload["fits"]["slope"] = out.fit.slope;
    rep.payload["fits"]["slope_stderr"] = out.fit.slope_stderr;
    rep.payload["fits"]["residual_se"] = out.fit.residual_se;
    rep.payload["fits"]["ratio_band"] = out.ratio_band;
    rep.wall_ms = timer.ms();
    return out;
}

// --------------------------------------------------------------------------
// Gaffney estimates between annuli.
// --------------------------------------------------------------------------

enum class GaffneyOp {
    DeltaPk,        // (k Delta)^j P^{k-1}, j = 1
    Pk,             // P^{k-1}
    GradPk,         // sqrt(k) grad P^{k-1}
    Resolvent,      // I - (I + s Delta)^{-1}, s = max(k, rho(E,F))
    GradResolvent,  // sqrt(s) grad (I + s Delta)^{-1/2}, s >= rho(E,F)
};

inline std::string gaffney_op_name(GaffneyOp op) {
    switch (op) {
        case GaffneyOp::DeltaPk: return "kDelta_Pk";
        case GaffneyOp::Pk: return "Pk";
        case GaffneyOp::GradPk: return "sqrtk_grad_Pk";
        case GaffneyOp::Resolvent: return "resolvent_complement";
        case GaffneyOp::GradResolvent: return "sqrts_grad_resolvent_sqrt";
    }
    return "?";
}

struct GaffneyOptions {
    std::vector<GaffneyOp> ops{GaffneyOp::DeltaPk, GaffneyOp::GradPk};
    std::vector<int> k_grid{4, 8, 16, 32, 64};
    std::vector<int> j_list{1, 2, 3, 4};
    int N = 2;
    double p = 2.0;
    uint64_t seed = 1;
    int random_probes = 4;
    double band = 2.0;
    bool include_l1l2_table = true;
};

inline Report verify_gaffney(const BuiltGraph& bg, const GaffneyOptions& opt = {}) {
    WallTimer timer;
    Report rep("verify_gaffney", bg.family);
    {
        std::vector<std::string> op_names;
        for (auto op : opt.ops) op_names.push_back(gaffney_op_name(op));
        rep.payload["params"] = {{"ops", op_names},   {"k_grid", opt.k_grid},
                                 {"j_list", opt.j_list}, {"N", opt.N},
                                 {"p", opt.p},        {"seed", opt.seed}};
    }
    const WeightedGraph& g = *bg.graph;
    int32_t x0 = deepest_vertex(bg);

    auto lp_on_set = [&](const Vector& v, const std::vector<int32_t>& set, double p) {
        if (std::isinf(p)) {
            double m = 0.0;
            for (int32_t y : set) m = std::max(m, std::abs(v[y]));
            return m;
        }
        double acc = 0.0;
        for (int32_t y : set) acc += std::pow(std::abs(v[y]), p) * g.measure(y);
        return std::pow(acc, 1.0 / p);
    };

    // per (op, j): C(k) band
    std::vector<std::vector<double>> rows;
    bool all_pass = true;
    Rng rng(opt.seed);
    for (GaffneyOp op : opt.ops) {
        for (int j : opt.j_list) {
            std::vector<double> cs, ks;
            for (int k : opt.k_grid) {
                auto F = bg.metric.ball_members(x0, static_cast<double>(k));
                auto E = bg.metric.annulus(x0, static_cast<double>(k), j);
                if (E.empty() || F.empty()) continue;
                double sep = bg.metric.rho_between_sets(F, E);
                double s = std::max(static_cast<double>(k), sep);
                // probes supported on F
                std::vector<Vector> probes;
                Vector ind = Vector::Zero(g.size());
                for (int32_t y : F) ind[y] = 1.0;
                probes.push_back(ind);
                Vector delta = Vector::Zero(g.size());
                delta[x0] = 1.0;
                probes.push_back(delta);
                for (int r = 0; r < opt.random_probes; ++r) {
                    Vector v = Vector::Zero(g.size());
                    for (int32_t y : F)
                        v[y] = (r % 2 == 0) ? rng.gaussian() : rng.rademacher();
                    probes.push_back(v);
                }
                double best = 0.0;
                for (const Vector& f : probes) {
                    double fn = lp_norm(g, f, opt.p);
                    if (fn == 0.0) continue;
                    Vector img;
                    double time_scale = static_cast<double>(k);
                    switch (op) {
                        case GaffneyOp::DeltaPk: img = laplacian_power_apply(g, f, 1, k); break;
                        case GaffneyOp::Pk: img = laplacian_power_apply(g, f, 0, k); break;
                        case GaffneyOp::GradPk: {
                            Vector u = laplacian_power_apply(g, f, 0, k);
                            img = std::sqrt(static_cast<double>(k)) * gradient_length(g, u);
                            break;
                        }
                        case GaffneyOp::Resolvent: {
                            img = f - resolvent(g, s, f);
                            time_scale = s;
                            break;
                        }
                        case GaffneyOp::GradResolvent: {
                            Vector u = resolvent_sqrt(g, s, f);
                            img = std::sqrt(s) * gradient_length(g, u);
                            time_scale = s;
                            break;
                        }
                    }
                    double c = lp_on_set(img, E, opt.p) *
                               std::pow(1.0 + sep / time_scale, opt.N) / fn;
                    best = std::max(best, c);
                }
                cs.push_back(best);
                ks.push_back(static_cast<double>(k));
                rows.push_back({static_cast<double>(static_cast<int>(op)),
                                static_cast<double>(j), static_cast<double>(k), sep, best});
            }
            if (cs.size() < 3) {
                rep.add_verdict(gaffney_op_name(op) + "_j" + std::to_string(j) + "_band", true,
                                "inconclusive: fewer than 3 scales available");
                continue;
            }
            double cmin = *std::min_element(cs.begin(), cs.end());
            double cmax = *std::max_element(cs.begin(), cs.end());
            bool pass = cmax <= opt.band * cmin && cmin > 0.0;
            all_pass = all_pass && pass;
            rep.add_verdict(gaffney_op_name(op) + "_j" + std::to_string(j) + "_band", pass,
                            "max/min = " + format_double(cmin > 0 ? cmax / cmin
                                                                  : std::numeric_limits<double>::infinity()));
        }
    }
    rep.add_table("constants", {"op", "j", "k", "rho_EF", "C_emp"}, rows);
    rep.add_verdict("gaffney_band_all", all_pass, "factor-" + format_double(opt.band) + " band");

    // L1 -> L2 table for (k Delta)^j P^{k-1} under the four listed
    // configurations, normalized with the V(x0,k) prefactor as stated.
    if (opt.include_l1l2_table) {
        std::vector<std::vector<double>> l12;
        int k = opt.k_grid[opt.k_grid.size() / 2];
        auto ballk = bg.metric.ball_members(x0, static_cast<double>(k));
        auto far = bg.metric.annulus(x0, static_cast<double>(k), 2);
        if (!far.empty()) {
            struct Config {
                std::vector<int32_t> E, F;
                int id;
            };
            std::vector<Config> configs{{far, ballk, 3},   // sup rho(x0, F) <= k
                                        {ballk, far, 4}};  // sup rho(x0, E) <= k
            // conditions 1 and 2: x0 adjacent to F (resp. E) within 2^B rho(E,F)
            configs.push_back({far, ballk, 1});
            configs.push_back({ballk, far, 2});
            for (const auto& cfg : configs) {
                for (int jj : {0, 1}) {
                    std::vector<double> probe_vals;
                    Vector f = Vector::Zero(g.size());
                    for (int32_t y : cfg.F) f[y] = 1.0;
                    double sep = bg.metric.rho_between_sets(cfg.F, cfg.E);
                    Vector img = laplacian_power_apply(g, f, jj, k);
                    double c = lp_on_set(img, cfg.E, 2.0) *
                               std::pow(static_cast<double>(k), jj) *
                               bg.metric.volume(x0, static_cast<double>(k)) *
                               std::pow(1.0 + sep / k, opt.N) / lp_norm(g, f, 1.0);
                    l12.push_back({static_cast<double>(cfg.id), static_cast<double>(jj),
                                   static_cast<double>(k), c});
                }
            }
            rep.add_table("l1_l2_constants", {"config", "j", "k", "C_emp"}, l12);
        }
    }
    rep.wall_ms = timer.ms();
    return rep;
}

// --------------------------------------------------------------------------
// Riesz L^p sweep across graph sizes.
// --------------------------------------------------------------------------

struct RieszSweepOptions {
    std::vector<double> p_list{1.1, 1.3, 1.5, 1.7, 2.0};
    int probes = 20;
    uint64_t seed = 7;
    double slope_limit = 0.05;
    double p2_tol = 1e-8;
};

struct RieszSweepResult {
    Report report;
    std::map<double, LineFit> slope_by_p;
    double worst_p2_dev = 0.0;
};

inline RieszSweepResult riesz_lp_sweep(const std::vector<BuiltGraph>& family,
                                       const RieszSweepOptions& opt = {}) {
    WallTimer timer;
    RieszSweepResult out{Report("riesz_lp_sweep",
                                family.empty() ? "?" : family.front().family),
                         {},
                         0.0};
    Report& rep = out.report;
    rep.payload["params"] = {
        {"p_list", opt.p_list}, {"probes", opt.probes}, {"seed", opt.seed}};
    std::vector<std::vector<double>> rows;
    std::map<double, std::vector<double>> log_ratio;
    std::vector<double> log_n;
    for (const BuiltGraph& bg : family) {
        const WeightedGraph& g = *bg.graph;
        const int n = g.size();
        Rng rng(opt.seed);
        std::vector<Vector> probes;
        for (int i = 0; i < opt.probes; ++i) {
            switch (i % 4) {
                case 0: probes.push_back(rng.gaussian_vector(n)); break;
                case 1: probes.push_back(rng.rademacher_vector(n)); break;
                case 2: {  // single-vertex atom
                    Vector v = Vector::Zero(n);
                    v[rng.uniform_int(n)] = 1.0;
                    probes.push_back(v);
                    break;
                }
                case 3: {  // molecule-shaped probe
                    int c = rng.uniform_int(n);
                    double r = 1.0 + rng.uniform() * 8.0;
                    Vector b = Vector::Zero(n);
                    for (int32_t y : bg.metric.ball_members(c, r)) b[y] = 1.0;
                    double norm = l2_norm(g, b);
                    if (norm > 0.0) b /= norm * std::sqrt(bg.metric.volume(c, r));
                    probes.push_back(spectral_of(g).apply(
                        [r](double lam) {
                            return r * (1.0 - lam) / (1.0 + r * (1.0 - lam));
                        },
                        b));
                    break;
                }
            }
        }
        std::map<double, double> max_ratio;
        for (Vector& f : probes) {
            f = mean_zero_project(g, f);
            double l2 = l2_norm(g, f);
            if (l2 == 0.0) continue;
            RieszResult rr = riesz_transform(g, f);
            Vector grad = tx_norms(g, rr.form);
            for (double p : opt.p_list) {
                double num = lp_norm(g, grad, p);
                double den = lp_norm(g, f, p);
                if (den == 0.0) continue;
                double ratio = num / den;
                auto it = max_ratio.find(p);
                if (it == max_ratio.end() || ratio > it->second) max_ratio[p] = ratio;
                if (p == 2.0)
                    out.worst_p2_dev = std::max(out.worst_p2_dev, std::abs(ratio - 1.0));
            }
        }
        log_n.push_back(std::log(static_cast<double>(n)));
        for (double p : opt.p_list) {
            rows.push_back({static_cast<double>(n), p, max_ratio[p]});
            log_ratio[p].push_back(std::log(max_ratio[p]));
        }
    }
    rep.add_table("ratios", {"n", "p", "max_ratio"}, rows);
    bool all_pass = true;
    for (double p : opt.p_list) {
        LineFit fit = fit_line(log_n, log_ratio[p]);
        out.slope_by_p[p] = fit;
        bool pass = fit.slope <= opt.slope_limit;
        all_pass = all_pass && pass;
        rep.add_verdict("riesz_slope_p" + format_double(p), pass,
                        "slope = " + format_double(fit.slope));
        rep.payload["fits"]["slope_p" + format_double(p)] = fit.slope;
    }
    bool p2_pass = out.worst_p2_dev <= opt.p2_tol;
    rep.add_verdict("riesz_p2_isometry", p2_pass,
                    "max |ratio-1| = " + format_double(out.worst_p2_dev));
    rep.add_verdict("riesz_sweep_all", all_pass && p2_pass, "");
    rep.wall_ms = timer.ms();
    return out;
}

// --------------------------------------------------------------------------
// Free-product experiment: kernel factorization, two-exponent on-diagonal
// decay, and failure of any single sub-Gaussian exponent.
// --------------------------------------------------------------------------

struct FreeProductOptions {
    std::vector<int> k_grid{8, 16, 32, 64, 128};
    int sources = 3;
    int fact_check_k = 24;       // factorization checked for k <= this
    int fact_check_pairs = 200;  // sampled second endpoints per source
    uint64_t seed = 11;
    double slope_target = 0.0;   // expected -(D1/m1 + D2/m2); 0 = skip verdict
    double slope_tol = 0.07;
    double residual_factor = 3.0;
};

struct FreeProductResult {
    Report report;
    double factorization_gap = 0.0;
    LineFit slope_fit;
    double single_m_best = 0.0;
    double rmse_single = 0.0;
    double rmse_two = 0.0;
};

inline FreeProductResult free_product_experiment(const BuiltGraph& f1, const BuiltGraph& f2,
                                                 const BuiltGraph& prod,
                                                 const FreeProductOptions& opt = {}) {
    WallTimer timer;
    FreeProductResult out{Report("free_product", prod.family), 0.0, {}, 0.0, 0.0, 0.0};
    Report& rep = out.report;
    rep.payload["params"] = {{"k_grid", opt.k_grid},
                             {"sources", opt.sources},
                             {"fact_check_k", opt.fact_check_k},
                             {"seed", opt.seed}};
    const WeightedGraph& g = *prod.graph;
    const WeightedGraph& g1 = *f1.graph;
    const WeightedGraph& g2 = *f2.graph;
    const int n2 = g2.size();
    int k_max = *std::max_element(opt.k_grid.begin(), opt.k_grid.end());

    auto safe = safe_zone(prod, static_cast<double>(k_max), 4.0);
    if (safe.empty()) throw std::runtime_error("free_product_experiment: empty safe zone");
    auto sources = spread_sample(safe, opt.sources);

    // (a) exact kernel factorization on sampled pairs, (b) diagonal decay
    Rng rng(opt.seed);
    std::vector<int32_t> targets;
    for (int i = 0; i < opt.fact_check_pairs; ++i) targets.push_back(rng.uniform_int(g.size()));
    std::vector<std::vector<double>> diag(sources.size(),
                                          std::vector<double>(opt.k_grid.size(), 0.0));
    double worst_fact = 0.0;
    for (size_t si = 0; si < sources.size(); ++si) {
        int32_t x = sources[si];
        KernelField k1 = kernel_rows(g1, x / n2, opt.fact_check_k);
        KernelField k2 = kernel_rows(g2, x % n2, opt.fact_check_k);
        kernel_row_stream(g, x, 2 * k_max, [&](int step, const Vector& row) {
            if (step <= opt.fact_check_k) {
                for (int32_t y : targets) {
                    double expect = k1.rows[step][y / n2] * k2.rows[step][y % n2];
                    worst_fact = std::max(worst_fact, std::abs(row[y] - expect));
                }
            }
            for (size_t gi = 0; gi < opt.k_grid.size(); ++gi)
                if (step == 2 * opt.k_grid[gi]) diag[si][gi] = row[x];
        });
    }
    out.factorization_gap = worst_fact;
    rep.add_verdict("kernel_factorization", worst_fact <= 1e-12,
                    "max |p_k - p1_k p2_k| = " + format_double(worst_fact));

    std::vector<double> log_k, log_p;
    std::vector<std::vector<double>> rows;
    for (size_t gi = 0; gi < opt.k_grid.size(); ++gi) {
        double mean_log = 0.0;
        for (size_t si = 0; si < sources.size(); ++si) {
            mean_log += std::log(diag[si][gi]);
            rows.push_back({static_cast<double>(opt.k_grid[gi]),
                            static_cast<double>(sources[si]), diag[si][gi]});
        }
        log_k.push_back(std::log(static_cast<double>(opt.k_grid[gi])));
        log_p.push_back(mean_log / sources.size());
    }
    out.slope_fit = fit_line(log_k, log_p);
    rep.add_table("diagonal", {"k", "source", "p_2k"}, rows);
    rep.payload["fits"]["slope"] = out.slope_fit.slope;
    if (opt.slope_target != 0.0)
        rep.add_verdict("two_exponent_slope",
                        std::abs(out.slope_fit.slope - opt.slope_target) <= opt.slope_tol,
                        "slope = " + format_double(out.slope_fit.slope) + ", target = " +
                            format_double(opt.slope_target));

    // (c) single-m model p_{2k}(x,x) ~ 1 / V_d(x, k^{1/m}) against the
    // two-exponent model 1 / (V_d1(x1, k^{1/m1}) V_d2(x2, k^{1/m2})).
    auto volume_d = [](const WeightedGraph& gg, int x, double r) {
        const uint16_t* row = gg.distance_row(x);
        double v = 0.0;
        for (int y = 0; y < gg.size(); ++y)
            if (row[y] != WeightedGraph::kUnreachable && row[y] < r) v += gg.measure(y);
        return v;
    };
    auto model_rmse = [&](double m1, double m2) {
        // profile out the additive constant
        double acc = 0.0, cnt = 0.0;
        std::vector<double> resid;
        for (size_t si = 0; si < sources.size(); ++si) {
            int x1 = sources[si] / n2, x2 = sources[si] % n2;
            for (size_t gi = 0; gi < opt.k_grid.size(); ++gi) {
                double k = opt.k_grid[gi];
                double pred = -std::log(volume_d(g1, x1, std::pow(k, 1.0 / m1)) *
                                        volume_d(g2, x2, std::pow(k, 1.0 / m2)));
                double r = std::log(diag[si][gi]) - pred;
                resid.push_back(r);
                acc += r;
                cnt += 1.0;
            }
        }
        double mean = acc / cnt;
        double ss = 0.0;
        for (double r : resid) ss += (r - mean) * (r - mean);
        return std::sqrt(ss / cnt);
    };
    double best_single = std::numeric_limits<double>::infinity(), best_m = 0.0;
    for (double m = 1.5; m <= 4.0 + 1e-9; m += 0.005) {
        double r = model_rmse(m, m);
        if (r < best_single) {
            best_single = r;
            best_m = m;
        }
    }
    double best_two = std::numeric_limits<double>::infinity();
    double best_m1 = 0.0, best_m2 = 0.0;
    for (double m1 = 1.6; m1 <= 2.8 + 1e-9; m1 += 0.02) {
        for (double m2 = 1.6; m2 <= 3.2 + 1e-9; m2 += 0.02) {
            double r = model_rmse(m1, m2);
            if (r < best_two) {
                best_two = r;
                best_m1 = m1;
                best_m2 = m2;
            }
        }
    }
    out.single_m_best = best_m;
    out.rmse_single = best_single;
    out.rmse_two = best_two;
    rep.payload["fits"]["single_m"] = best_m;
    rep.payload["fits"]["single_m_rmse"] = best_single;
    rep.payload["fits"]["two_exponent_m1"] = best_m1;
    rep.payload["fits"]["two_exponent_m2"] = best_m2;
    rep.payload["fits"]["two_exponent_rmse"] = best_two;
    rep.add_verdict("no_single_exponent", best_single >= opt.residual_factor * best_two,
                    "rmse single/two = " + format_double(best_single / best_two));
    rep.wall_ms = timer.ms();
    return out;
}

// --------------------------------------------------------------------------
// sup_{y in B(x,k)} |P^k h(y)| <= C inf_{z in B(x,k)} sqrt(M(|h|^2)(z))
// --------------------------------------------------------------------------

struct MaximalBoundOptions {
    int samples = 50;
    std::vector<int> k_list{2, 4, 8};
    uint64_t seed = 3;
};

inline Report verify_pk_maximal_bound(const BuiltGraph& bg, const MaximalBoundOptions& opt = {}) {
    WallTimer timer;
    Report rep("verify_pk_maximal_bound", bg.family);
    rep.payload["params"] = {{"samples", opt.samples}, {"k_list", opt.k_list}, {"seed", opt.seed}};
    const WeightedGraph& g = *bg.graph;
    MarkovOperator P(g);
    Rng rng(opt.seed);
    std::vector<double> constants;
    std::vector<std::vector<double>> rows;
    for (int s = 0; s < opt.samples; ++s) {
        Vector h = rng.gaussian_vector(g.size());
        Vector h2 = h.cwiseProduct(h);
        Vector Mh2 = maximal_function(bg.metric, h2);
        for (int k : opt.k_list) {
            Vector pk = P.power_apply(h, k);
            int x = rng.uniform_int(g.size());
            auto ball = bg.metric.ball_members(x, static_cast<double>(k));
            double lhs = 0.0, rhs = std::numeric_limits<double>::infinity();
            for (int32_t y : ball) {
                lhs = std::max(lhs, std::abs(pk[y]));
                rhs = std::min(rhs, std::sqrt(Mh2[y]));
            }
            if (rhs > 0.0) {
                constants.push_back(lhs / rhs);
                rows.push_back({static_cast<double>(s), static_cast<double>(k), lhs / rhs});
            }
        }
    }
    double cmax = *std::max_element(constants.begin(), constants.end());
    // stability: max over the two halves of the sample within a factor 2
    size_t half = constants.size() / 2;
    double c1 = *std::max_element(constants.begin(), constants.begin() + half);
    double c2 = *std::max_element(constants.begin() + half, constants.end());
    double band = std::max(c1, c2) / std::min(c1, c2);
    rep.add_table("constants", {"sample", "k", "C"}, rows);
    rep.payload["fits"]["C_max"] = cmax;
    rep.add_verdict("maximal_bound_stable", band <= 2.0,
                    "half-sample band = " + format_double(band));
    rep.wall_ms = timer.ms();
    return rep;
}

// --------------------------------------------------------------------------
// Analytic lemma grids.
// --------------------------------------------------------------------------

/// max over the grid of (s/(1+s))^k (1 + (1+k)/(1+s))^m.
inline double expdecay_grid_max(const std::vector<double>& s_grid, int k_max, int m) {
    double best = 0.0;
    for (double s : s_grid) {
        double sigma = s / (1.0 + s);
        double pw = 1.0;
        for (int k = 0; k <= k_max; ++k) {
            double val = pw * std::pow(1.0 + (1.0 + k) / (1.0 + s), m);
            best = std::max(best, val);
            pw *= sigma;
            if (pw == 0.0) break;
        }
    }
    return best;
}

struct GridStability {
    double coarse = 0.0;
    double fine = 0.0;
    double rel_change() const { return std::abs(fine - coarse) / std::max(coarse, 1e-300); }
};

inline GridStability expdecay_scan(int m, int k_max = 10000) {
    std::vector<double> coarse{0.1, 1.0, 10.0, 100.0};
    std::vector<double> fine;
    for (size_t i = 0; i < coarse.size(); ++i) {
        fine.push_back(coarse[i]);
        if (i + 1 < coarse.size()) fine.push_back(std::sqrt(coarse[i] * coarse[i + 1]));
    }
    GridStability out;
    out.coarse = expdecay_grid_max(coarse, k_max, m);
    out.fine = expdecay_grid_max(fine, 2 * k_max, m);
    return out;
}

/// ratio of the l2-type to the l1-type sums in the dyadic summation lemma:
/// (sum_k (1/k) [k^a/(k+u)^2 (1+r/(k+u))^{-N}]^2)^{1/2}
///   <= C sum_k (1/k) k^a/(k+u)^2 (1+r/(k+u))^{-N}.
inline double l2l1_ratio(double r, double u, double alpha, int N) {
    double l2 = 0.0, l1 = 0.0;
    int64_t K = std::max<int64_t>(1 << 20, static_cast<int64_t>(16.0 * (r + u + 2.0)));
    for (int64_t k = 1; k <= K; ++k) {
        double kk = static_cast<double>(k);
        double term = std::pow(kk, alpha) / ((kk + u) * (kk + u)) *
                      std::pow(1.0 + r / (kk + u), -N);
        l2 += term * term / kk;
        l1 += term / kk;
        if (k > 64 && term / kk < 1e-18 * l1 && kk > 4.0 * (r + u + 1.0)) break;
    }
    return std::sqrt(l2) / l1;
}

inline GridStability l2l1_scan(int N) {
    auto grid_max = [&](const std::vector<double>& rs, const std::vector<double>& us,
                        const std::vector<double>& alphas) {
        double best = 0.0;
        for (double r : rs)
            for (double u : us)
                for (double a : alphas) best = std::max(best, l2l1_ratio(r, u, a, N));
        return best;
    };
    std::vector<double> r_coarse{0.0, 1.0, 10.0, 100.0, 1000.0};
    std::vector<double> a_coarse{-1.0, 0.0, 0.5, 1.0, 1.5, 1.9};
    auto refine = [](const std::vector<double>& v) {
        std::vector<double> out;
        for (size_t i = 0; i < v.size(); ++i) {
            out.push_back(v[i]);
            if (i + 1 < v.size()) out.push_back(0.5 * (v[i] + v[i + 1]));
        }
        return out;
    };
    GridStability out;
    out.coarse = grid_max(r_coarse, r_coarse, a_coarse);
    out.fine = grid_max(refine(r_coarse), refine(r_coarse), refine(a_coarse));
    return out;
}

}  // namespace rieszlab
