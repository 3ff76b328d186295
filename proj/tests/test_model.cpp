#include <doctest.h>

#include <cmath>
#include <functional>

#include "core/errors.hpp"
#include "core/model.hpp"
#include "core/rng.hpp"

using namespace superspill;

namespace {

// Independent oracle: maximize revenue - cost over quantity by golden-section
// search on log q. Demand q = Theta p^{1/(rho-1)} inverts to
// p(q) = (q/Theta)^{rho-1}; cost = f + w q / phi.
double brute_force_profit(double phi, const ModelParams& p) {
    auto profit_at_q = [&](double q) {
        double price = std::pow(q / p.theta, p.rho - 1.0);
        return price * q - (p.f + p.w * q / phi);
    };
    // Bracket around the analytic optimum, generously wide.
    double q_star = std::pow(phi * p.rho / p.w, 1.0 / (1.0 - p.rho)) * p.theta;
    double lo = std::log(q_star) - 5.0, hi = std::log(q_star) + 5.0;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
    double fc = profit_at_q(std::exp(c)), fd = profit_at_q(std::exp(d));
    for (int it = 0; it < 200; ++it) {
        if (fc > fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - gr * (hi - lo);
            fc = profit_at_q(std::exp(c));
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + gr * (hi - lo);
            fd = profit_at_q(std::exp(d));
        }
    }
    return profit_at_q(std::exp(0.5 * (lo + hi)));
}

// Independent root-finder for the zero-profit capability.
double bisect_cutoff(const SpillExposure& e, const ModelParams& p) {
    double lo = 1e-12, hi = 1.0;
    while (optimal_profit(hi, e, p) < 0.0) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (optimal_profit(mid, e, p) < 0.0) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

ModelParams random_params(CounterRng& rng) {
    ModelParams p;
    p.rho = 0.3 + 0.5 * rng.next_uniform();
    p.theta = 0.5 + 1.5 * rng.next_uniform();
    p.w = 0.5 + 1.5 * rng.next_uniform();
    p.c = 0.5 + 1.5 * rng.next_uniform();
    p.f = 0.1 + 1.9 * rng.next_uniform();
    p.alpha = -0.02 + 0.04 * rng.next_uniform();
    p.tau = -0.02 + 0.04 * rng.next_uniform();
    p.psi = -0.02 + 0.04 * rng.next_uniform();
    return p;
}

SpillExposure random_exposure(CounterRng& rng) {
    return SpillExposure{90.0 * rng.next_uniform(), 5.0 * rng.next_uniform(),
                         5.0 * rng.next_uniform()};
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

}  // namespace

TEST_CASE("productivity_phi") {
    ModelParams p;
    p.alpha = p.tau = p.psi = 0.0;
    p.c = 1.0;
    CHECK(productivity_phi(2.0, SpillExposure{50, 3, 7}, p) == doctest::Approx(2.0));

    p.alpha = 0.01;
    CHECK(productivity_phi(1.0, SpillExposure{50, 0, 0}, p) ==
          doctest::Approx(std::exp(0.5)).epsilon(1e-12));

    p.alpha = 0.0;
    p.c = 3.0;
    CHECK(productivity_phi(1.0, SpillExposure{}, p) == doctest::Approx(3.0));

    CHECK_THROWS_AS(productivity_phi(0.0, SpillExposure{}, p), DomainError);
    CHECK_THROWS_AS(productivity_phi(-1.0, SpillExposure{}, p), DomainError);
}

TEST_CASE("optimal_price") {
    ModelParams p;
    p.w = 1.0;
    p.rho = 0.5;
    CHECK(optimal_price(1.0, p) == doctest::Approx(2.0));

    p.w = 0.5;
    p.rho = 0.5;
    CHECK(optimal_price(1.0, p) == doctest::Approx(1.0));  // w = rho cancels

    p.w = 1.3;
    p.rho = 0.7;
    double base = optimal_price(1.7, p);
    CHECK(optimal_price(3.4, p) == doctest::Approx(base / 2.0));  // homogeneity -1

    CHECK_THROWS_AS(optimal_price(0.0, p), DomainError);
}

TEST_CASE("optimal_profit: lambda -> 0 converges to -f") {
    ModelParams p;
    p.f = 0.7;
    CHECK(optimal_profit(1e-12, SpillExposure{}, p) == doctest::Approx(-0.7).epsilon(1e-6));
}

TEST_CASE("optimal_profit: zero spillovers and c=1 reduce exponentials") {
    ModelParams p;
    p.alpha = 0.05;
    p.tau = 0.05;
    p.psi = 0.05;
    p.c = 1.0;
    double with_zero_exposure = optimal_profit(1.5, SpillExposure{0, 0, 0}, p);
    ModelParams p0 = p;
    p0.alpha = p0.tau = p0.psi = 0.0;
    double with_zero_elasticities = optimal_profit(1.5, SpillExposure{40, 2, 3}, p0);
    CHECK(with_zero_exposure == doctest::Approx(with_zero_elasticities).epsilon(1e-14));
}

TEST_CASE("optimal_profit matches brute-force quantity maximization") {
    CounterRng rng(2024, 1);
    for (int i = 0; i < 200; ++i) {
        ModelParams p = random_params(rng);
        SpillExposure e = random_exposure(rng);
        double lambda = 0.5 + 2.5 * rng.next_uniform();
        double phi = productivity_phi(lambda, e, p);
        double closed = optimal_profit(lambda, e, p);
        double numeric = brute_force_profit(phi, p);
        CHECK(rel_err(closed, numeric) < 1e-8);
    }
}

TEST_CASE("profit strictly increasing in lambda; MR = MC at the optimum") {
    CounterRng rng(7, 2);
    for (int i = 0; i < 300; ++i) {
        ModelParams p = random_params(rng);
        SpillExposure e = random_exposure(rng);
        double l1 = 0.2 + 2.0 * rng.next_uniform();
        double l2 = l1 + 0.01 + rng.next_uniform();
        CHECK(optimal_profit(l2, e, p) > optimal_profit(l1, e, p));

        // rho * p(phi) = w / phi identically.
        double phi = productivity_phi(l1, e, p);
        CHECK(p.rho * optimal_price(phi, p) == doctest::Approx(p.w / phi).epsilon(1e-12));
    }
}

TEST_CASE("cutoff_capability: defining identity and bisection oracle") {
    CounterRng rng(99, 3);
    for (int i = 0; i < 300; ++i) {
        ModelParams p = random_params(rng);
        SpillExposure e = random_exposure(rng);
        double cutoff = cutoff_capability(e, p);
        CHECK(std::abs(optimal_profit(cutoff, e, p)) < 1e-10);
        CHECK(rel_err(cutoff, bisect_cutoff(e, p)) < 1e-9);
    }
}

TEST_CASE("cutoff_capability: strictly decreasing in HSpill when alpha > 0") {
    ModelParams p;
    p.alpha = 0.01;
    double prev = cutoff_capability(SpillExposure{0, 0, 0}, p);
    for (int h = 10; h <= 90; h += 10) {
        double cur = cutoff_capability(SpillExposure{static_cast<double>(h), 0, 0}, p);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("cutoff_capability: f = 0 gives degenerate zero cutoff") {
    ModelParams p;
    p.f = 0.0;
    bool degenerate = false;
    CHECK(cutoff_capability(SpillExposure{}, p, &degenerate) == 0.0);
    CHECK(degenerate);
}

TEST_CASE("expected_log_productivity: no truncation recovers unconditional mean") {
    ModelParams p;
    p.capability_dist = LogNormalDist{0.3, 0.8};
    p.alpha = p.tau = p.psi = 0.0;
    p.c = 1.0;
    p.f = 1e-30;  // cutoff far below the support mass
    double e = expected_log_productivity(SpillExposure{}, p);
    CHECK(e == doctest::Approx(0.3).epsilon(1e-6));  // E[ln lambda] = mu
}

TEST_CASE("expected_log_productivity: truncated-normal closed form") {
    // ln lambda ~ N(0,1) truncated at lambda* = 1 (z = 0): conditional mean of
    // ln lambda is phi(0)/(1-Phi(0)) = sqrt(2/pi).
    ModelParams p;
    p.capability_dist = LogNormalDist{0.0, 1.0};
    p.alpha = 0.013;
    p.tau = 0.0;
    p.psi = 0.0;
    p.c = 2.0;
    // Choose f so the cutoff is exactly 1: lambda* = 1 iff
    // f = (1-rho) w^{-k} rho^k c^k theta e^{alpha H k} with k = rho/(1-rho).
    SpillExposure e{30.0, 0, 0};
    double k = p.rho / (1.0 - p.rho);
    p.f = (1.0 - p.rho) * std::pow(p.w, -k) * std::pow(p.rho, k) * std::pow(p.c, k) * p.theta *
          std::exp(p.alpha * e.hspill * k);
    CHECK(cutoff_capability(e, p) == doctest::Approx(1.0).epsilon(1e-12));

    double expected_direct = p.alpha * e.hspill + std::log(p.c);
    double truncated_mean = std::sqrt(2.0 / M_PI);
    CHECK(expected_log_productivity(e, p) ==
          doctest::Approx(expected_direct + truncated_mean).epsilon(1e-7));
}

TEST_CASE("expected_log_productivity matches Monte Carlo") {
    ModelParams p;
    p.capability_dist = LogNormalDist{0.2, 0.7};
    p.alpha = 0.01;
    p.f = 0.4;
    SpillExposure e{25.0, 0, 0};
    double quad = expected_log_productivity(e, p);

    double cutoff = cutoff_capability(e, p);
    CounterRng rng(5150, 11);
    const int n = 2'000'000;
    double sum = 0.0, sum2 = 0.0;
    long kept = 0;
    for (int i = 0; i < n; ++i) {
        double lam = dist_quantile(p.capability_dist,
                                   std::min(1.0 - 1e-15, std::max(1e-15, rng.next_uniform())));
        if (lam < cutoff) continue;
        double v = std::log(lam);
        sum += v;
        sum2 += v * v;
        ++kept;
    }
    double mc_mean = sum / kept;
    double mc_se = std::sqrt((sum2 / kept - mc_mean * mc_mean) / kept);
    double direct = p.alpha * e.hspill + std::log(p.c);
    CHECK(std::abs(quad - (direct + mc_mean)) < 3.0 * mc_se + 1e-9);
}

TEST_CASE("expected_log_productivity: empty market error") {
    ModelParams p;
    p.capability_dist = UniformDist{0.5, 1.0};
    p.f = 1e9;  // cutoff far above the support
    CHECK_THROWS_AS(expected_log_productivity(SpillExposure{}, p), EmptyMarketError);
}

TEST_CASE("spillover_marginal_effect: null channel") {
    ModelParams p;
    p.alpha = 0.0;
    p.tau = 0.02;
    MarginalEffect m = spillover_marginal_effect(SpillExposure{40, 1, 0}, p, SpillChannel::H);
    CHECK(m.direct == 0.0);
    CHECK(m.indirect == 0.0);
    CHECK(m.total == 0.0);
}

TEST_CASE("spillover_marginal_effect: sign pattern for positive spillovers") {
    ModelParams p;
    p.alpha = 0.012;
    p.f = 0.5;
    MarginalEffect m = spillover_marginal_effect(SpillExposure{30, 0, 0}, p, SpillChannel::H);
    CHECK(m.direct > 0.0);
    CHECK(m.indirect < 0.0);
}

TEST_CASE("spillover_marginal_effect: total matches finite differences") {
    CounterRng rng(31337, 4);
    int checked = 0;
    for (int i = 0; i < 100; ++i) {
        ModelParams p = random_params(rng);
        p.capability_dist = LogNormalDist{0.0, 0.6 + 0.6 * rng.next_uniform()};
        SpillExposure e = random_exposure(rng);
        e.hspill = 5.0 + 80.0 * rng.next_uniform();

        MarginalEffect m = spillover_marginal_effect(e, p, SpillChannel::H);
        const double h = 1e-4;
        SpillExposure up = e, dn = e;
        up.hspill += h;
        dn.hspill -= h;
        double fd =
            (expected_log_productivity(up, p) - expected_log_productivity(dn, p)) / (2.0 * h);
        CHECK(rel_err(m.total, fd) < 1e-4);
        ++checked;
    }
    CHECK(checked == 100);
}

TEST_CASE("entry_value") {
    ModelParams p;
    p.delta = 0.1;
    p.f = 0.3;

    // Profit below zero floors at 0.
    double phi_tiny = 1e-9;
    CHECK(entry_value(phi_tiny, SpillExposure{}, p) == 0.0);

    // pi = 2, delta = 0.1 -> 20 (pick f so pi(phi)=2 at phi=1).
    p.theta = 20.0;
    double k = p.rho / (1.0 - p.rho);
    double gross = (1.0 - p.rho) * std::pow(p.w, -k) * std::pow(p.rho, k) * p.theta;
    p.f = gross - 2.0;
    REQUIRE(p.f >= 0.0);
    REQUIRE(profit_at_productivity(1.0, p) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(entry_value(1.0, SpillExposure{}, p) == doctest::Approx(20.0).epsilon(1e-12));

    // delta = 1: value equals one-period profit when positive.
    p.delta = 1.0;
    CHECK(entry_value(1.0, SpillExposure{}, p) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("equilibrium_distribution") {
    ModelParams p;

    SUBCASE("cutoff below support leaves g unchanged") {
        p.capability_dist = UniformDist{1.0, 2.0};
        TruncatedDistribution mu = equilibrium_distribution(p, 0.5);
        CHECK(mu.pdf(1.5) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(mu.pdf(0.9) == 0.0);
    }

    SUBCASE("uniform(0,1) truncated at 0.5 doubles the density") {
        p.capability_dist = UniformDist{0.0, 1.0};
        TruncatedDistribution mu = equilibrium_distribution(p, 0.5);
        CHECK(mu.pdf(0.75) == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(mu.pdf(0.25) == 0.0);
    }

    SUBCASE("normalization: integral of mu is 1") {
        p.capability_dist = LogNormalDist{0.1, 0.9};
        for (double cutoff : {0.2, 0.8, 1.5, 3.0}) {
            TruncatedDistribution mu = equilibrium_distribution(p, cutoff);
            double hi = dist_quantile(p.capability_dist, 1.0 - 1e-12);
            double step = (hi - cutoff) / 200000.0;
            double integral = 0.0;
            for (int i = 0; i < 200000; ++i) {
                double x0 = cutoff + i * step, x1 = x0 + step;
                integral += 0.5 * (mu.pdf(x0) + mu.pdf(x1)) * step;
            }
            CHECK(integral == doctest::Approx(1.0).epsilon(1e-5));
        }
    }

    SUBCASE("empty market") {
        p.capability_dist = UniformDist{0.0, 1.0};
        CHECK_THROWS_AS(equilibrium_distribution(p, 1.0 + 1e-9), EmptyMarketError);
    }
}

TEST_CASE("aggregate_productivity_tilde") {
    ModelParams p;

    SUBCASE("degenerate distribution returns the point mass") {
        p.capability_dist = DegenerateDist{1.7};
        for (double sigma : {1.5, 2.0, 4.0})
            CHECK(aggregate_productivity_tilde(p, 0.5, sigma) == doctest::Approx(1.7));
    }

    SUBCASE("matches Monte Carlo power mean") {
        p.capability_dist = LogNormalDist{0.0, 0.5};
        double sigma = 3.0, cutoff = 0.8;
        double quad = aggregate_productivity_tilde(p, cutoff, sigma);

        CounterRng rng(777, 5);
        const int n = 2'000'000;
        double sum = 0.0, sum2 = 0.0;
        long kept = 0;
        for (int i = 0; i < n; ++i) {
            double lam = dist_quantile(
                p.capability_dist, std::min(1.0 - 1e-15, std::max(1e-15, rng.next_uniform())));
            if (lam < cutoff) continue;
            double v = std::pow(lam, sigma - 1.0);
            sum += v;
            sum2 += v * v;
            ++kept;
        }
        double mean = sum / kept;
        double se = std::sqrt((sum2 / kept - mean * mean) / kept);
        double mc = std::pow(mean, 1.0 / (sigma - 1.0));
        // Delta method through the outer power.
        double mc_se = se * std::abs(mc / ((sigma - 1.0) * mean));
        CHECK(std::abs(quad - mc) < 3.0 * mc_se + 1e-9);
    }

    SUBCASE("nondecreasing in the cutoff") {
        p.capability_dist = LogNormalDist{0.0, 0.7};
        double prev = 0.0;
        for (double cutoff : {0.1, 0.5, 1.0, 1.5, 2.0}) {
            double v = aggregate_productivity_tilde(p, cutoff, 2.5);
            CHECK(v >= prev);
            prev = v;
        }
    }

    SUBCASE("Pareto divergence raises") {
        p.capability_dist = ParetoDist{1.0, 1.5};
        CHECK_THROWS_AS(aggregate_productivity_tilde(p, 1.2, 3.0), NumericError);
    }

    SUBCASE("printed exponent variant runs and differs") {
        p.capability_dist = LogNormalDist{0.0, 0.5};
        double standard = aggregate_productivity_tilde(p, 0.8, 2.5, false);
        double printed = aggregate_productivity_tilde(p, 0.8, 2.5, true);
        CHECK(standard != printed);
        CHECK(printed > 0.0);
    }
}
