#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "core/econometrics.hpp"
#include "core/errors.hpp"
#include "core/rng.hpp"

using namespace superspill;

namespace {

std::vector<std::optional<double>> col(const Eigen::VectorXd& v) {
    std::vector<std::optional<double>> out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = v(i);
    return out;
}

// Dense-dummy OLS oracle: regress y on [X, dummies for every FE group but a
// reference per dimension, intercept], return the X coefficients.
Eigen::VectorXd dense_dummy_ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                const std::vector<std::vector<int>>& fe) {
    const Eigen::Index n = y.size();
    std::vector<int> n_groups;
    Eigen::Index extra = 1;  // intercept
    for (const auto& dim : fe) {
        int g = *std::max_element(dim.begin(), dim.end()) + 1;
        n_groups.push_back(g);
        extra += g - 1;
    }
    Eigen::MatrixXd D(n, X.cols() + extra);
    D.leftCols(X.cols()) = X;
    Eigen::Index c = X.cols();
    D.col(c++).setOnes();
    for (std::size_t d = 0; d < fe.size(); ++d)
        for (int g = 1; g < n_groups[d]; ++g) {
            for (Eigen::Index i = 0; i < n; ++i) D(i, c) = fe[d][i] == g ? 1.0 : 0.0;
            ++c;
        }
    Eigen::VectorXd beta = (D.transpose() * D).ldlt().solve(D.transpose() * y);
    return beta.head(X.cols());
}

}  // namespace

TEST_CASE("absorb_fixed_effects: one dimension demeans exactly in one pass") {
    Eigen::MatrixXd cols(6, 1);
    cols << 1, 2, 3, 10, 20, 30;
    std::vector<int> g = {0, 0, 0, 1, 1, 1};
    absorb_fixed_effects(cols, {g}, {});
    CHECK(cols(0, 0) == doctest::Approx(-1.0));
    CHECK(cols(2, 0) == doctest::Approx(1.0));
    CHECK(cols(3, 0) == doctest::Approx(-10.0));
    // group means are exactly zero
    CHECK(std::abs(cols.block(0, 0, 3, 1).sum()) < 1e-14);
    CHECK(std::abs(cols.block(3, 0, 3, 1).sum()) < 1e-14);
}

TEST_CASE("absorb_fixed_effects: column constant within every group collapses to zero") {
    // value depends only on the group labels of both dimensions additively
    std::vector<int> g1 = {0, 0, 1, 1, 2, 2, 0, 1};
    std::vector<int> g2 = {0, 1, 0, 1, 0, 1, 0, 1};
    Eigen::MatrixXd cols(8, 1);
    for (int i = 0; i < 8; ++i) cols(i, 0) = 3.0 * g1[i] - 2.0 * g2[i] + 5.0;
    absorb_fixed_effects(cols, {g1, g2}, {});
    CHECK(cols.cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("FE absorption + OLS equals dense-dummy OLS (two dimensions)") {
    CounterRng rng(42, 0);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 120;
        std::vector<int> g1(n), g2(n);
        Eigen::VectorXd x1(n), x2(n), y(n);
        std::vector<std::string> k1(n), k2(n), cl(n);
        for (int i = 0; i < n; ++i) {
            g1[i] = static_cast<int>(rng.next_below(7));
            g2[i] = static_cast<int>(rng.next_below(5));
            x1(i) = rng.next_normal();
            x2(i) = rng.next_normal();
            y(i) = 1.5 * x1(i) - 0.7 * x2(i) + 2.0 * g1[i] - 1.3 * g2[i] + rng.next_normal();
            k1[i] = "a" + std::to_string(g1[i]);
            k2[i] = "b" + std::to_string(g2[i]);
            cl[i] = "c" + std::to_string(i % 10);
        }
        Frame frame;
        frame.add_numeric("y", col(y));
        frame.add_numeric("x1", col(x1));
        frame.add_numeric("x2", col(x2));
        frame.add_key("f1", k1);
        frame.add_key("f2", k2);
        frame.add_key("cl", cl);

        RegressionSpec spec;
        spec.name = "fe_oracle";
        spec.dependent = "y";
        spec.exogenous = {"x1", "x2"};
        spec.fe_dims = {"f1", "f2"};
        spec.cluster = "cl";
        RegressionResult res = ols(spec, frame);

        Eigen::MatrixXd X(n, 2);
        X.col(0) = x1;
        X.col(1) = x2;
        Eigen::VectorXd oracle = dense_dummy_ols(y, X, {g1, g2});
        CHECK(std::abs(*res.coefficient("x1") - oracle(0)) < 1e-8);
        CHECK(std::abs(*res.coefficient("x2") - oracle(1)) < 1e-8);
    }
}

TEST_CASE("ols: exact fit and degenerate clusters") {
    const int n = 30;
    Eigen::VectorXd x(n), y(n);
    std::vector<std::string> cl_each(n), one_fe(n);
    CounterRng rng(9, 1);
    for (int i = 0; i < n; ++i) {
        x(i) = rng.next_normal();
        y(i) = 2.0 * x(i);
        cl_each[i] = "c" + std::to_string(i);
        one_fe[i] = "all";
    }
    Frame frame;
    frame.add_numeric("y", col(y));
    frame.add_numeric("x", col(x));
    frame.add_key("cl", cl_each);
    frame.add_key("g", one_fe);

    RegressionSpec spec;
    spec.name = "exact";
    spec.dependent = "y";
    spec.exogenous = {"x"};
    spec.fe_dims = {"g"};
    spec.cluster = "cl";
    RegressionResult res = ols(spec, frame);
    CHECK(*res.coefficient("x") == doctest::Approx(2.0).epsilon(1e-12));

    SUBCASE("one cluster per observation: CR1 equals HC1") {
        // Add noise so the variance is nonzero.
        Eigen::VectorXd y2 = y;
        for (int i = 0; i < n; ++i) y2(i) += 0.3 * rng.next_normal();
        Frame f2;
        f2.add_numeric("y", col(y2));
        f2.add_numeric("x", col(x));
        f2.add_key("cl", cl_each);
        f2.add_key("g", one_fe);
        RegressionResult r2 = ols(spec, f2);

        // HC1 oracle on the demeaned data.
        Eigen::VectorXd xd = x.array() - x.mean();
        Eigen::VectorXd yd = y2.array() - y2.mean();
        double beta = xd.dot(yd) / xd.dot(xd);
        Eigen::VectorXd u = yd - beta * xd;
        double meat = (xd.array().square() * u.array().square()).sum();
        double hc1 = static_cast<double>(n) / (n - 1) * meat / std::pow(xd.dot(xd), 2);
        CHECK(*r2.std_error("x") == doctest::Approx(std::sqrt(hc1)).epsilon(1e-10));
    }
}

TEST_CASE("ols: clustered sandwich matches hand-assembled matrix algebra") {
    // 20 rows, 4 clusters, 2 regressors + single FE group (pure demeaning).
    const int n = 20, k = 2;
    CounterRng rng(77, 2);
    Eigen::MatrixXd X(n, k);
    Eigen::VectorXd y(n);
    std::vector<int> cluster(n);
    std::vector<std::string> cl(n), g(n, "all");
    for (int i = 0; i < n; ++i) {
        X(i, 0) = rng.next_normal();
        X(i, 1) = rng.next_normal();
        cluster[i] = i % 4;
        cl[i] = "c" + std::to_string(cluster[i]);
        y(i) = 0.5 * X(i, 0) - 1.0 * X(i, 1) + (1.0 + 0.5 * cluster[i]) * rng.next_normal();
    }
    Frame frame;
    frame.add_numeric("y", col(y));
    frame.add_numeric("x1", col(X.col(0)));
    frame.add_numeric("x2", col(X.col(1)));
    frame.add_key("cl", cl);
    frame.add_key("g", g);

    RegressionSpec spec;
    spec.name = "sandwich";
    spec.dependent = "y";
    spec.exogenous = {"x1", "x2"};
    spec.fe_dims = {"g"};
    spec.cluster = "cl";
    RegressionResult res = ols(spec, frame);

    // Oracle: demean, solve, CR1 sandwich assembled cluster by cluster.
    Eigen::MatrixXd Xd = X.rowwise() - X.colwise().mean();
    Eigen::VectorXd yd = y.array() - y.mean();
    Eigen::MatrixXd xtx_inv = (Xd.transpose() * Xd).inverse();
    Eigen::VectorXd beta = xtx_inv * Xd.transpose() * yd;
    Eigen::VectorXd u = yd - Xd * beta;
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (int c = 0; c < 4; ++c) {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(k);
        for (int i = 0; i < n; ++i)
            if (cluster[i] == c) s += u(i) * Xd.row(i).transpose();
        meat += s * s.transpose();
    }
    double factor = (4.0 / 3.0) * (static_cast<double>(n - 1) / (n - k));
    Eigen::MatrixXd V = factor * xtx_inv * meat * xtx_inv;

    CHECK(std::abs(*res.coefficient("x1") - beta(0)) < 1e-10);
    CHECK(std::abs(*res.coefficient("x2") - beta(1)) < 1e-10);
    CHECK(std::abs(*res.std_error("x1") - std::sqrt(V(0, 0))) < 1e-10);
    CHECK(std::abs(*res.std_error("x2") - std::sqrt(V(1, 1))) < 1e-10);
}

TEST_CASE("ols: rank deficiency names the collinear column") {
    const int n = 40;
    CounterRng rng(5, 5);
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x(i) = rng.next_normal();
    Frame frame;
    frame.add_numeric("y", col(x));
    frame.add_numeric("x1", col(x));
    frame.add_numeric("x1_copy", col(2.0 * x));
    std::vector<std::string> cl(n), g(n, "all");
    for (int i = 0; i < n; ++i) cl[i] = "c" + std::to_string(i % 5);
    frame.add_key("cl", cl);
    frame.add_key("g", g);

    RegressionSpec spec;
    spec.name = "collinear";
    spec.dependent = "y";
    spec.exogenous = {"x1", "x1_copy"};
    spec.fe_dims = {"g"};
    spec.cluster = "cl";
    try {
        ols(spec, frame);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("x1") != std::string::npos);
    }
}

namespace {

// Shared simulated-IV fixture: x is endogenous through a shared error
// component; z is relevant and exogenous.
struct IvData {
    Frame frame;
    int n;
};

IvData make_iv_data(int n, double endogeneity, std::uint64_t seed) {
    CounterRng rng(seed, 3);
    Eigen::VectorXd z(n), x(n), y(n);
    std::vector<std::string> cl(n), g(n, "all");
    for (int i = 0; i < n; ++i) {
        double confound = rng.next_normal();
        z(i) = rng.next_normal();
        x(i) = 1.0 * z(i) + endogeneity * confound + 0.5 * rng.next_normal();
        y(i) = 2.0 * x(i) + confound + 0.3 * rng.next_normal();
        cl[i] = "c" + std::to_string(i % 25);
    }
    IvData d;
    d.n = n;
    d.frame.add_numeric("y", col(y));
    d.frame.add_numeric("x", col(x));
    d.frame.add_numeric("z", col(z));
    d.frame.add_key("cl", cl);
    d.frame.add_key("g", g);
    return d;
}

}  // namespace

TEST_CASE("tsls: instrumenting a column with itself reproduces OLS") {
    IvData d = make_iv_data(200, 0.0, 11);
    RegressionSpec ols_spec;
    ols_spec.name = "o";
    ols_spec.dependent = "y";
    ols_spec.exogenous = {"x"};
    ols_spec.fe_dims = {"g"};
    ols_spec.cluster = "cl";
    RegressionResult r_ols = ols(ols_spec, d.frame);

    // Duplicate x as its own instrument (projection is the identity).
    Frame frame = d.frame;
    frame.add_numeric("x_inst", frame.numeric.at("x"));
    RegressionSpec iv;
    iv.name = "self";
    iv.dependent = "y";
    iv.endogenous = {"x"};
    iv.instruments = {"x_inst"};
    iv.fe_dims = {"g"};
    iv.cluster = "cl";
    RegressionResult r_iv = tsls(iv, frame);
    CHECK(std::abs(*r_iv.coefficient("x") - *r_ols.coefficient("x")) < 1e-10);
    CHECK(std::abs(*r_iv.std_error("x") - *r_ols.std_error("x")) < 1e-10);
}

TEST_CASE("tsls: reduces to ols with empty endogenous set") {
    IvData d = make_iv_data(100, 0.5, 12);
    RegressionSpec spec;
    spec.name = "r";
    spec.dependent = "y";
    spec.exogenous = {"x"};
    spec.fe_dims = {"g"};
    spec.cluster = "cl";
    RegressionResult a = ols(spec, d.frame);
    RegressionResult b = tsls(spec, d.frame);
    CHECK(*a.coefficient("x") == *b.coefficient("x"));
}

TEST_CASE("tsls: corrects the endogeneity bias that OLS shows") {
    IvData d = make_iv_data(4000, 1.2, 13);
    RegressionSpec ospec;
    ospec.name = "o";
    ospec.dependent = "y";
    ospec.exogenous = {"x"};
    ospec.fe_dims = {"g"};
    ospec.cluster = "cl";
    RegressionResult r_ols = ols(ospec, d.frame);

    RegressionSpec ivspec;
    ivspec.name = "iv";
    ivspec.dependent = "y";
    ivspec.endogenous = {"x"};
    ivspec.instruments = {"z"};
    ivspec.fe_dims = {"g"};
    ivspec.cluster = "cl";
    RegressionResult r_iv = tsls(ivspec, d.frame);

    CHECK(*r_ols.coefficient("x") > 2.0 + 5.0 * *r_ols.std_error("x"));  // biased up
    CHECK(std::abs(*r_iv.coefficient("x") - 2.0) < 3.0 * *r_iv.std_error("x"));
    REQUIRE(r_iv.first_stage.has_value());
    CHECK(r_iv.first_stage->f_excluded > 10.0);
    CHECK(r_iv.kp_wald_f.has_value());
    CHECK(r_iv.cd_wald_f.has_value());
}

TEST_CASE("weak_iv_stats: KP approximately equals CD under homoskedastic singleton clusters") {
    const int n = 3000;
    CounterRng rng(21, 4);
    Eigen::VectorXd z(n), x(n);
    std::vector<int> cluster(n);
    for (int i = 0; i < n; ++i) {
        z(i) = rng.next_normal();
        x(i) = 0.4 * z(i) + rng.next_normal();  // homoskedastic
        cluster[i] = i;
    }
    Eigen::MatrixXd Z(n, 1), E(n, 0);
    Z.col(0) = z;
    WeakIvStats s = weak_iv_stats(x, Z, E, cluster);
    CHECK(std::abs(s.kp_wald_f - s.cd_wald_f) / s.cd_wald_f < 0.15);
    CHECK(s.cd_wald_f > 100.0);  // strongly relevant by construction
}

TEST_CASE("weak_iv_stats: irrelevant instrument gives small F") {
    CounterRng rng(22, 5);
    std::vector<double> fs;
    for (int rep = 0; rep < 30; ++rep) {
        const int n = 400;
        Eigen::VectorXd z(n), x(n);
        std::vector<int> cluster(n);
        for (int i = 0; i < n; ++i) {
            z(i) = rng.next_normal();
            x(i) = rng.next_normal();  // orthogonal in population
            cluster[i] = i % 50;
        }
        Eigen::MatrixXd Z(n, 1), E(n, 0);
        Z.col(0) = z;
        fs.push_back(weak_iv_stats(x, Z, E, cluster).cd_wald_f);
    }
    std::sort(fs.begin(), fs.end());
    CHECK(fs[fs.size() / 2] < 3.0);  // median under the null
}

TEST_CASE("weak_iv_stats: zero-variance instrument raises") {
    Eigen::VectorXd x(10), z = Eigen::VectorXd::Zero(10);
    for (int i = 0; i < 10; ++i) x(i) = i;
    Eigen::MatrixXd Z(10, 1), E(10, 0);
    Z.col(0) = z;
    std::vector<int> cluster(10);
    for (int i = 0; i < 10; ++i) cluster[i] = i;
    CHECK_THROWS_AS(weak_iv_stats(x, Z, E, cluster), NumericError);
}

TEST_CASE("invariance: cluster relabeling and dependent shift") {
    IvData d = make_iv_data(300, 0.8, 31);
    RegressionSpec spec;
    spec.name = "inv";
    spec.dependent = "y";
    spec.endogenous = {"x"};
    spec.instruments = {"z"};
    spec.fe_dims = {"g"};
    spec.cluster = "cl";
    RegressionResult base = tsls(spec, d.frame);

    SUBCASE("relabeled clusters") {
        Frame f2 = d.frame;
        auto cl = f2.keys.at("cl");
        for (auto& c : cl) c = "relabel_" + c + "_x";
        f2.keys["cl"] = cl;
        RegressionResult r = tsls(spec, f2);
        CHECK(*r.std_error("x") == doctest::Approx(*base.std_error("x")).epsilon(1e-12));
    }

    SUBCASE("adding a constant to the dependent variable") {
        Frame f2 = d.frame;
        auto y = f2.numeric.at("y");
        for (auto& v : y)
            if (v) v = *v + 1234.5;
        f2.numeric["y"] = y;
        RegressionResult r = tsls(spec, f2);
        CHECK(*r.coefficient("x") == doctest::Approx(*base.coefficient("x")).epsilon(1e-9));
    }
}

TEST_CASE("logistic_irls matches an independent Newton solver") {
    const int n = 500;
    CounterRng rng(61, 6);
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = rng.next_normal();
        X(i, 2) = rng.next_normal();
        double eta = 0.3 + 0.8 * X(i, 1) - 0.5 * X(i, 2);
        double p = 1.0 / (1.0 + std::exp(-eta));
        y(i) = rng.next_uniform() < p ? 1.0 : 0.0;
    }
    LogisticFit fit = logistic_irls(y, X);

    // Newton oracle with explicit gradient/Hessian.
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(3);
    for (int it = 0; it < 100; ++it) {
        Eigen::VectorXd eta = X * beta;
        Eigen::VectorXd p = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
        Eigen::VectorXd grad = X.transpose() * (y - p);
        Eigen::MatrixXd H = X.transpose() *
                            (p.array() * (1.0 - p.array())).matrix().asDiagonal() * X;
        Eigen::VectorXd step = H.ldlt().solve(grad);
        beta += step;
        if (step.cwiseAbs().maxCoeff() < 1e-12) break;
    }
    for (int j = 0; j < 3; ++j) CHECK(std::abs(fit.coef(j) - beta(j)) < 1e-6);
}

TEST_CASE("ipw_weights") {
    SUBCASE("intercept-only model gives uniform 1/share weights") {
        const int n = 200;
        std::vector<double> nonstar(n);
        for (int i = 0; i < n; ++i) nonstar[i] = i < 160 ? 1.0 : 0.0;  // share 0.8
        auto w = ipw_weights(nonstar, {});
        for (int i = 0; i < n; ++i) {
            if (nonstar[i] > 0.5) {
                REQUIRE(w[i].has_value());
                CHECK(*w[i] == doctest::Approx(1.0 / 0.8).epsilon(1e-6));
            } else {
                CHECK(!w[i].has_value());
            }
        }
    }

    SUBCASE("separation raises an advisory error") {
        const int n = 60;
        std::vector<double> nonstar(n);
        std::vector<std::optional<double>> x(n);
        for (int i = 0; i < n; ++i) {
            nonstar[i] = i < 30 ? 1.0 : 0.0;
            x[i] = i < 30 ? 1.0 : -1.0;  // perfect separation
        }
        CHECK_THROWS_AS(ipw_weights(nonstar, {x}), NumericError);
    }

    SUBCASE("weights are winsorized at the 99th percentile") {
        const int n = 2000;
        CounterRng rng(71, 7);
        std::vector<double> nonstar(n);
        std::vector<std::optional<double>> x(n);
        for (int i = 0; i < n; ++i) {
            x[i] = rng.next_normal();
            double p = 1.0 / (1.0 + std::exp(-(1.5 + 2.0 * *x[i])));
            nonstar[i] = rng.next_uniform() < p ? 1.0 : 0.0;
        }
        auto w = ipw_weights(nonstar, {x});
        std::vector<double> vals;
        for (const auto& v : w)
            if (v) vals.push_back(*v);
        REQUIRE(!vals.empty());
        double mx = *std::max_element(vals.begin(), vals.end());
        long at_cap = std::count_if(vals.begin(), vals.end(),
                                    [mx](double v) { return v == mx; });
        CHECK(at_cap >= 2);  // the tail was capped onto the percentile value
    }
}

TEST_CASE("assemble: singleton FE groups are dropped iteratively") {
    // Row 4 is alone in f1-group "lone"; dropping it makes row 3 alone in f2.
    Frame frame;
    frame.add_numeric("y", {1.0, 2.0, 3.0, 4.0, 5.0});
    frame.add_numeric("x", {0.5, 1.0, 1.5, 2.0, 2.5});
    frame.add_key("f1", {"a", "a", "a", "a", "lone"});
    frame.add_key("f2", {"u", "u", "u", "v", "v"});
    frame.add_key("cl", {"c1", "c1", "c2", "c2", "c3"});

    RegressionSpec spec;
    spec.name = "s";
    spec.dependent = "y";
    spec.exogenous = {"x"};
    spec.fe_dims = {"f1", "f2"};
    spec.cluster = "cl";
    RegressionData d = assemble(frame, spec);
    CHECK(d.y.size() == 3);
    CHECK(d.singletons_dropped == 2);
}
