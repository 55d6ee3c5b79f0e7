#include <catch2/catch_amalgamated.hpp>

#include "rieszlab/experiments.hpp"

using namespace rieszlab;

TEST_CASE("safe zone and sampling") {
    auto z1 = build(BuilderSpec::lattice(1, 65));
    auto safe = safe_zone(z1, 4.0);  // rho >= 16 means d >= 4 from the ends
    for (int32_t x : safe) {
        CHECK(x >= 4);
        CHECK(x <= 60);
    }
    auto sample = spread_sample(safe, 5);
    CHECK(sample.size() == 5);

    auto cyc = build(BuilderSpec::cycle(12));
    CHECK(safe_zone(cyc, 100.0).size() == 12);  // no boundary
}

TEST_CASE("UE verification: correct beta passes, wrong beta fails") {
    BuilderSpec spec = BuilderSpec::lattice(1, 1025);
    auto bg = build(spec);
    UeOptions opt;
    opt.N_list = {0, 2};
    opt.k_grid = {4, 8, 16, 32, 64};
    opt.sources = 4;
    Report good = verify_ue(bg, opt);
    CHECK(good.all_pass());

    // the on-diagonal value keeps C_0 away from zero
    bool saw_positive = false;
    for (const auto& row : good.payload["tables"]["constants"]["rows"])
        if (row[0].get<double>() == 0.0) {
            CHECK(row[2].get<double>() > 0.01);
            saw_positive = true;
        }
    CHECK(saw_positive);

    // misdeclared beta = 1 on the same walk: constants drift, band fails
    BuilderSpec wrong = spec;
    wrong.beta = 1.0;
    auto bad = build(wrong);
    Report neg = verify_ue(bad, opt);
    CHECK_FALSE(neg.all_pass());
}

TEST_CASE("on-diagonal fit on a lattice box") {
    auto z2 = build(BuilderSpec::lattice(2, 31));
    DiagonalOptions opt;
    opt.k_grid = {4, 8, 16, 32};
    opt.sources = 3;
    auto res = fit_on_diagonal(z2, opt);
    CHECK(res.fit.slope == Catch::Approx(-1.0).margin(0.08));
    CHECK(res.ratio_band < 4.0);

    // saturation negative control: a closed graph loses all decay
    auto k2 = build(BuilderSpec::lattice(1, 2));
    k2.boundary.clear();  // K2 is a closed two-point space, no truncation
    DiagonalOptions sat;
    sat.k_grid = {2, 4, 8, 16};
    sat.sources = 1;
    auto flat = fit_on_diagonal(k2, sat);
    CHECK(std::abs(flat.fit.slope) <= 0.05);
}

TEST_CASE("gaffney bands on a small gasket") {
    auto gasket = build(BuilderSpec::sierpinski(4));
    GaffneyOptions opt;
    opt.k_grid = {2, 4, 8, 16};
    opt.j_list = {1, 2};
    Report rep = verify_gaffney(gasket, opt);
    CHECK(rep.all_pass());
    CHECK(rep.payload["tables"].contains("l1_l2_constants"));
}

TEST_CASE("riesz sweep on two gasket sizes") {
    std::vector<BuiltGraph> fam;
    fam.push_back(build(BuilderSpec::sierpinski(2)));
    fam.push_back(build(BuilderSpec::sierpinski(3)));
    RieszSweepOptions opt;
    opt.p_list = {1.5, 2.0};
    opt.probes = 8;
    auto res = riesz_lp_sweep(fam, opt);
    CHECK(res.worst_p2_dev <= 1e-8);
    CHECK(res.report.all_pass());
}

TEST_CASE("free product kernel factorization on K2 x K2") {
    auto spec = BuilderSpec::free_product(BuilderSpec::lattice(1, 2), BuilderSpec::lattice(1, 2));
    auto prod = build(spec);
    auto f = build(BuilderSpec::lattice(1, 2));
    const int n2 = 2;
    for (int x = 0; x < 4; ++x) {
        auto kp = kernel_rows(*prod.graph, x, 6);
        auto k1 = kernel_rows(*f.graph, x / n2, 6);
        auto k2 = kernel_rows(*f.graph, x % n2, 6);
        for (int k = 0; k <= 6; ++k)
            for (int y = 0; y < 4; ++y)
                CHECK(kp.rows[k][y] ==
                      Catch::Approx(k1.rows[k][y / n2] * k2.rows[k][y % n2]).margin(1e-13));
    }
}

TEST_CASE("free product experiment harness") {
    auto s1 = BuilderSpec::path(9);
    auto s2 = BuilderSpec::path(9);
    auto f1 = build(s1);
    auto f2 = build(s2);
    auto prod = build(BuilderSpec::free_product(s1, s2));
    FreeProductOptions opt;
    opt.k_grid = {2, 3, 4, 6, 8};
    opt.sources = 2;
    opt.fact_check_k = 8;
    opt.fact_check_pairs = 40;
    opt.residual_factor = 0.0;  // residual contrast needs distinct exponents
    auto res = free_product_experiment(f1, f2, prod, opt);
    CHECK(res.factorization_gap <= 1e-12);
}

TEST_CASE("maximal bound constant") {
    auto gasket = build(BuilderSpec::sierpinski(3));
    MaximalBoundOptions opt;
    opt.samples = 30;
    Report rep = verify_pk_maximal_bound(gasket, opt);
    CHECK(rep.all_pass());
    CHECK(rep.payload["fits"]["C_max"].get<double>() > 0.0);

    // constant h: both sides agree exactly, so the constant is 1
    const WeightedGraph& g = *gasket.graph;
    Vector h = Vector::Constant(g.size(), 3.0);
    Vector Mh2 = maximal_function(gasket.metric, Vector(h.cwiseProduct(h)));
    Vector pk = MarkovOperator(g).power_apply(h, 3);
    for (int x = 0; x < g.size(); ++x) {
        CHECK(pk[x] == Catch::Approx(3.0));
        CHECK(std::sqrt(Mh2[x]) == Catch::Approx(3.0));
    }
}

TEST_CASE("reports regenerate bit-identically") {
    auto bg = build(BuilderSpec::lattice(1, 257));
    UeOptions opt;
    opt.N_list = {2};
    opt.k_grid = {4, 8, 16};
    opt.sources = 3;
    Report a = verify_ue(bg, opt);
    Report b = verify_ue(bg, opt);
    CHECK(a.payload.dump() == b.payload.dump());

    GaffneyOptions gopt;
    gopt.k_grid = {2, 4, 8};
    gopt.j_list = {1};
    gopt.seed = 5;
    auto gasket = build(BuilderSpec::sierpinski(3));
    CHECK(verify_gaffney(gasket, gopt).payload.dump() ==
          verify_gaffney(gasket, gopt).payload.dump());
}

TEST_CASE("analytic lemma grids are refinement-stable") {
    for (int m : {1, 2, 4}) {
        auto st = expdecay_scan(m, 2000);
        INFO("expdecay m=" << m << " coarse=" << st.coarse << " fine=" << st.fine);
        CHECK(std::isfinite(st.coarse));
        CHECK(st.coarse > 0.0);
        CHECK(st.rel_change() <= 0.05);
    }
    for (int N : {0, 1, 2}) {
        auto st = l2l1_scan(N);
        INFO("l2l1 N=" << N << " coarse=" << st.coarse << " fine=" << st.fine);
        CHECK(std::isfinite(st.coarse));
        CHECK(st.coarse > 0.0);
        CHECK(st.rel_change() <= 0.05);
    }
}

TEST_CASE("fit_line sanity") {
    std::vector<double> xs{0, 1, 2, 3}, ys{1, 3, 5, 7};
    auto fit = fit_line(xs, ys);
    CHECK(fit.slope == Catch::Approx(2.0));
    CHECK(fit.intercept == Catch::Approx(1.0));
    CHECK(fit.residual_se == Catch::Approx(0.0).margin(1e-12));
    CHECK_THROWS_AS(fit_line({1.0}, {2.0}), std::invalid_argument);
}
