#include <Eigen/Dense>
#include <catch2/catch_amalgamated.hpp>

#include "rieszlab/builders.hpp"
#include "rieszlab/markov.hpp"
#include "rieszlab/rng.hpp"

using namespace rieszlab;

namespace {

BuiltGraph lazy_k2() { return build(BuilderSpec::lattice(1, 2)); }
BuiltGraph lazy_c4() { return build(BuilderSpec::cycle(4)); }

// dense kernel oracle: p_k(x,y) = (P^k)_{xy} / m(y) with P_{xy} = mu_xy/m(x)
Eigen::MatrixXd dense_walk_matrix(const WeightedGraph& g) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(g.size(), g.size());
    for (int x = 0; x < g.size(); ++x)
        for (const AdjEntry& a : g.neighbors(x)) P(x, a.to) = a.weight / g.measure(x);
    return P;
}

}  // namespace

TEST_CASE("kernel base case and one step on lazy K2") {
    auto bg = lazy_k2();
    const WeightedGraph& g = *bg.graph;
    auto field = kernel_rows(g, 0, 1);
    CHECK(field.rows[0][0] == Catch::Approx(1.0 / g.measure(0)));
    CHECK(field.rows[0][1] == 0.0);
    // m = 2 everywhere; p(x,y) = mu/(m m) = 1/4 for both entries
    CHECK(field.rows[1][0] == Catch::Approx(0.25));
    CHECK(field.rows[1][1] == Catch::Approx(0.25));
}

TEST_CASE("kernel recursion matches the dense matrix-power oracle") {
    auto bg = lazy_c4();
    const WeightedGraph& g = *bg.graph;
    Eigen::MatrixXd P = dense_walk_matrix(g);
    Eigen::MatrixXd P2 = P * P;
    auto field = kernel_rows(g, 0, 2);
    for (int y = 0; y < 4; ++y)
        CHECK(field.rows[2][y] == Catch::Approx(P2(0, y) / g.measure(y)).epsilon(1e-13));
}

TEST_CASE("kernel mass and symmetry invariants") {
    auto bg = build(BuilderSpec::sierpinski(3));
    const WeightedGraph& g = *bg.graph;
    const int K = 50;
    std::vector<KernelField> fields;
    for (int x : {0, 7, 20}) fields.push_back(kernel_rows(g, x, K));
    for (const auto& f : fields) CHECK(f.mass_gap(g) <= 1e-12);
    for (size_t i = 0; i < fields.size(); ++i)
        for (size_t j = 0; j < fields.size(); ++j)
            for (int k = 0; k <= K; ++k)
                CHECK(std::abs(fields[i].rows[k][fields[j].source] -
                               fields[j].rows[k][fields[i].source]) <= 1e-12);
}

TEST_CASE("self-adjointness and contraction") {
    auto bg = build(BuilderSpec::sierpinski(2));
    const WeightedGraph& g = *bg.graph;
    MarkovOperator P(g);
    Rng rng(42);
    for (int trial = 0; trial < 5; ++trial) {
        Vector f = rng.gaussian_vector(g.size());
        Vector h = rng.gaussian_vector(g.size());
        double lhs = 0.0, rhs = 0.0;
        Vector Pf = P.apply(f), Ph = P.apply(h);
        for (int x = 0; x < g.size(); ++x) {
            lhs += Pf[x] * h[x] * g.measure(x);
            rhs += f[x] * Ph[x] * g.measure(x);
        }
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(std::abs(lhs), 1.0));
        for (double p : {1.0, 2.0}) {
            double num = 0.0, den = 0.0;
            for (int x = 0; x < g.size(); ++x) {
                num += std::pow(std::abs(Pf[x]), p) * g.measure(x);
                den += std::pow(std::abs(f[x]), p) * g.measure(x);
            }
            CHECK(num <= den * (1.0 + 1e-12));
        }
        CHECK(Pf.lpNorm<Eigen::Infinity>() <= f.lpNorm<Eigen::Infinity>() * (1.0 + 1e-12));
    }
    // P1 = 1
    Vector ones = Vector::Ones(g.size());
    CHECK((P.apply(ones) - ones).lpNorm<Eigen::Infinity>() <= 1e-14);
}

TEST_CASE("laplacian power apply") {
    auto bg = lazy_k2();
    const WeightedGraph& g = *bg.graph;
    Vector f(2);
    f << 1.0, -1.0;

    // j = 0, k = 1 is the identity
    CHECK((laplacian_power_apply(g, f, 0, 1) - f).lpNorm<Eigen::Infinity>() == 0.0);

    // constants die for j >= 1
    Vector ones = Vector::Ones(2);
    CHECK(laplacian_power_apply(g, ones, 1, 3).lpNorm<Eigen::Infinity>() <= 1e-15);

    // on lazy K2, f = (1,-1) is the lambda = 0 eigenfunction: P f = 0
    CHECK(laplacian_power_apply(g, f, 1, 2).lpNorm<Eigen::Infinity>() <= 1e-15);

    // agreement with the spectral route phi(l) = (k(1-l))^j l^{k-1}
    auto gasket = build(BuilderSpec::sierpinski(2));
    Rng rng(7);
    Vector rf = rng.gaussian_vector(gasket.graph->size());
    for (int j : {0, 1, 2}) {
        for (int k : {1, 3, 8}) {
            Vector direct = laplacian_power_apply(*gasket.graph, rf, j, k);
            Vector viaspec = spectral_apply(
                *gasket.graph,
                [j, k](double l) {
                    return std::pow(k * (1.0 - l), j) * std::pow(l, k - 1);
                },
                rf);
            CHECK((direct - viaspec).lpNorm<Eigen::Infinity>() <= 1e-10);
        }
    }
}

TEST_CASE("spectral apply basics") {
    auto bg = build(BuilderSpec::sierpinski(2));
    const WeightedGraph& g = *bg.graph;
    Rng rng(3);
    Vector f = rng.gaussian_vector(g.size());

    CHECK((spectral_apply(g, [](double) { return 1.0; }, f) - f).lpNorm<Eigen::Infinity>() <=
          1e-11);

    MarkovOperator P(g);
    for (int k : {1, 2, 5}) {
        Vector iter = P.power_apply(f, k);
        Vector spec = spectral_apply(g, [k](double l) { return std::pow(l, k); }, f);
        CHECK((iter - spec).lpNorm<Eigen::Infinity>() <= 1e-10);
    }

    Vector ones = Vector::Ones(g.size());
    CHECK(spectral_apply(g, [](double l) { return 1.0 - l; }, ones).lpNorm<Eigen::Infinity>() <=
          1e-12);

    // top eigenvalue is 1 with the constant eigenfunction
    const auto& S = spectral_of(g);
    CHECK(S.eigenvalues()[S.size() - 1] == Catch::Approx(1.0).margin(1e-12));
    Vector top = S.eigenfunction(S.size() - 1);
    Vector scaled = top * (1.0 / top[0]);
    CHECK((scaled - ones).lpNorm<Eigen::Infinity>() <= 1e-10);
    CHECK(S.lambda_min() >= -1e-10);  // lazified
}

TEST_CASE("series apply: identity, resolvent, truncation length") {
    auto bg = build(BuilderSpec::sierpinski(2));
    const WeightedGraph& g = *bg.graph;
    Rng rng(5);
    Vector f = rng.gaussian_vector(g.size());

    SeriesCoeffs ident;
    ident.c = {1.0};
    CHECK((series_apply(g, ident, f).value - f).lpNorm<Eigen::Infinity>() == 0.0);

    // resolvent s = 1 against the spectral value (1 + (1-l))^{-1}
    auto coeffs = series::resolvent_coeffs(1.0, 1e-8);
    Vector via_series = series_apply(g, coeffs, f).value;
    Vector via_spec =
        spectral_apply(g, [](double l) { return 1.0 / (2.0 - l); }, f);
    CHECK((via_series - via_spec).lpNorm<Eigen::Infinity>() <=
          1e-8 * f.lpNorm<Eigen::Infinity>());

    // geometric tail for s = 1, tol 1e-8: 27 coefficients (oracle: 2^-L <= 1e-8)
    int oracle_terms = 0;
    double tail = 1.0;
    while (tail > 1e-8) {
        tail *= 0.5;
        ++oracle_terms;
    }
    CHECK(oracle_terms == 27);
    CHECK(coeffs.length() == static_cast<size_t>(oracle_terms));

    CHECK_THROWS_AS(series::fractional_power_coeffs(-0.5, 1.0, 1e-8), std::runtime_error);
}

TEST_CASE("analyticity surrogate k * ||Delta P^k f|| is bounded") {
    auto bg = build(BuilderSpec::sierpinski(3));
    const WeightedGraph& g = *bg.graph;
    MarkovOperator P(g);
    Rng rng(11);
    Vector f = rng.gaussian_vector(g.size());
    double fn = f.norm();
    double worst = 0.0;
    Vector cur = f;
    for (int k = 1; k <= 200; ++k) {
        cur = P.apply(cur);
        double val = static_cast<double>(k) * P.laplacian(cur).norm() / fn;
        worst = std::max(worst, val);
    }
    INFO("max_k k*||Delta P^k f||/||f|| = " << worst);
    CHECK(std::isfinite(worst));
    CHECK(worst < 10.0);
}

TEST_CASE("spectral size guard") {
    // the dense path refuses oversized graphs with a pointer to series_apply
    BuilderSpec big = BuilderSpec::lattice(1, SpectralDecomposition::kMaxDense + 2);
    auto bg = build(big);
    CHECK_THROWS_WITH(spectral_of(*bg.graph), Catch::Matchers::ContainsSubstring("series"));
}
