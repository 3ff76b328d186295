#include "core/model.hpp"

#include <cmath>

#include "core/errors.hpp"
#include "core/quadrature.hpp"

namespace superspill {

void ModelParams::validate() const {
    if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must be in (0,1)");
    if (!(theta > 0.0)) throw ConfigError("theta must be > 0");
    if (!(w > 0.0)) throw ConfigError("w must be > 0");
    if (!(c > 0.0)) throw ConfigError("c must be > 0");
    if (f < 0.0) throw ConfigError("f must be >= 0");
    if (f_e < 0.0) throw ConfigError("f_e must be >= 0");
    if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must be in (0,1]");
}

double productivity_phi(double lambda, const SpillExposure& e, const ModelParams& p) {
    if (!(lambda > 0.0)) throw DomainError("productivity_phi: lambda must be > 0");
    return lambda * std::exp(p.alpha * e.hspill) * std::exp(p.tau * e.bspill) *
           std::exp(p.psi * e.fspill) * p.c;
}

double optimal_price(double phi, const ModelParams& p) {
    if (!(phi > 0.0)) throw DomainError("optimal_price: phi must be > 0");
    return p.w / (p.rho * phi);
}

double profit_at_productivity(double phi, const ModelParams& p) {
    if (!(phi > 0.0)) throw DomainError("profit_at_productivity: phi must be > 0");
    double r = p.rho;
    double k = r / (1.0 - r);
    return (1.0 - r) * std::pow(p.w, -k) * std::pow(r, k) * std::pow(phi, k) * p.theta - p.f;
}

double optimal_profit(double lambda, const SpillExposure& e, const ModelParams& p) {
    return profit_at_productivity(productivity_phi(lambda, e, p), p);
}

double cutoff_capability(const SpillExposure& e, const ModelParams& p, bool* degenerate) {
    if (degenerate) *degenerate = false;
    if (p.f == 0.0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    double r = p.rho;
    double k = r / (1.0 - r);
    // Zero of the optimal-profit function: the variable-profit factor at
    // lambda = 1 with unit spillovers, inverted against f.
    double base = (1.0 - r) * std::pow(p.w, -k) * std::pow(r, k) * std::pow(p.c, k) * p.theta;
    double spill_shift = p.alpha * e.hspill + p.tau * e.bspill + p.psi * e.fspill;
    return std::pow(p.f / base, 1.0 / k) * std::exp(-spill_shift);
}

namespace {

struct TruncatedMoments {
    double mass;      // Integral_{lambda*}^inf g
    double log_mass;  // Integral_{lambda*}^inf ln(lambda) g
};

TruncatedMoments truncated_moments(const Distribution& d, double lambda_star) {
    if (dist_is_degenerate(d)) {
        double v = dist_quantile(d, 0.5);
        if (v >= lambda_star) return {1.0, std::log(v)};
        return {0.0, 0.0};
    }
    double lo = std::max(lambda_star, dist_lower_truncation(d));
    double hi = dist_upper_truncation(d);
    if (lo >= hi) return {0.0, 0.0};
    double mass = integrate([&d](double x) { return dist_pdf(d, x); }, lo, hi, 1e-10);
    double log_mass = integrate(
        [&d](double x) {
            double g = dist_pdf(d, x);
            return g == 0.0 ? 0.0 : std::log(x) * g;
        },
        lo, hi, 1e-10);
    return {mass, log_mass};
}

double channel_elasticity(const ModelParams& p, SpillChannel ch) {
    switch (ch) {
        case SpillChannel::H: return p.alpha;
        case SpillChannel::B: return p.tau;
        case SpillChannel::F: return p.psi;
    }
    return 0.0;
}

}  // namespace

double expected_log_productivity(const SpillExposure& e, const ModelParams& p) {
    double lambda_star = cutoff_capability(e, p);
    TruncatedMoments m = truncated_moments(p.capability_dist, lambda_star);
    if (m.mass < 1e-12)
        throw EmptyMarketError("no capability mass above cutoff " + std::to_string(lambda_star));
    double direct = p.alpha * e.hspill + p.tau * e.bspill + p.psi * e.fspill + std::log(p.c);
    return direct + m.log_mass / m.mass;
}

MarginalEffect spillover_marginal_effect(const SpillExposure& e, const ModelParams& p,
                                         SpillChannel channel) {
    MarginalEffect out;
    out.direct = channel_elasticity(p, channel);

    bool degenerate = false;
    double lambda_star = cutoff_capability(e, p, &degenerate);
    // d lambda*/d Spill from the closed form: lambda* carries e^{-elasticity*Spill}.
    double dlambda = -out.direct * lambda_star;
    if (degenerate || dlambda == 0.0) {
        out.indirect = 0.0;
        out.total = out.direct;
        return out;
    }

    TruncatedMoments m = truncated_moments(p.capability_dist, lambda_star);
    if (m.mass < 1e-12)
        throw EmptyMarketError("no capability mass above cutoff " + std::to_string(lambda_star));
    double g_star = dist_pdf(p.capability_dist, lambda_star);
    // d/d lambda* of (log_mass/mass) = g(lambda*) (log_mass - mass ln lambda*) / mass^2.
    out.indirect =
        g_star * (m.log_mass - m.mass * std::log(lambda_star)) / (m.mass * m.mass) * dlambda;
    out.total = out.direct + out.indirect;
    return out;
}

double entry_value(double phi, const SpillExposure& /*exposure*/, const ModelParams& p) {
    if (!(phi > 0.0)) throw DomainError("entry_value: phi must be > 0");
    if (!(p.delta > 0.0)) throw DomainError("entry_value: delta must be > 0");
    double pi = profit_at_productivity(phi, p);
    return std::max(0.0, pi / p.delta);
}

double TruncatedDistribution::pdf(double phi) const {
    if (phi < phi_star) return 0.0;
    return dist_pdf(base, phi) / survival;
}

TruncatedDistribution equilibrium_distribution(const ModelParams& p, double phi_star) {
    const Distribution& g = p.capability_dist;
    if (dist_cdf(g, phi_star) >= 1.0 - 1e-12)
        throw EmptyMarketError("cutoff " + std::to_string(phi_star) +
                               " leaves no entrant mass (G >= 1 - 1e-12)");
    double survival = 1.0;
    if (!dist_is_degenerate(g)) {
        double lo = std::max(phi_star, dist_lower_truncation(g));
        double hi = dist_upper_truncation(g);
        if (lo < hi)
            survival = integrate([&g](double x) { return dist_pdf(g, x); }, lo, hi, 1e-10);
    }
    TruncatedDistribution out;
    out.base = g;
    out.phi_star = phi_star;
    out.survival = survival;
    return out;
}

double aggregate_productivity_tilde(const ModelParams& p, double phi_star, double sigma,
                                    bool use_printed_exponent) {
    if (!(sigma > 1.0)) throw DomainError("aggregate_productivity_tilde: sigma must be > 1");
    const Distribution& g = p.capability_dist;
    if (dist_cdf(g, phi_star) >= 1.0 - 1e-12)
        throw EmptyMarketError("cutoff leaves no entrant mass");

    double power = use_printed_exponent ? (1.0 - sigma) : (sigma - 1.0);
    if (const auto* pareto = std::get_if<ParetoDist>(&g)) {
        if (power > 0.0 && power >= pareto->shape)
            throw NumericError("aggregate productivity integral diverges: Pareto shape " +
                               std::to_string(pareto->shape) + " <= sigma - 1");
    }
    if (dist_is_degenerate(g)) {
        double v = std::get<DegenerateDist>(g).value;
        if (v < phi_star) throw EmptyMarketError("degenerate mass below cutoff");
        return v;
    }
    double lo = std::max(phi_star, dist_lower_truncation(g));
    double hi = dist_upper_truncation(g);
    double mass = integrate([&g](double x) { return dist_pdf(g, x); }, lo, hi, 1e-10);
    if (mass < 1e-12) throw EmptyMarketError("no mass above cutoff");
    double moment = integrate(
        [&g, power](double x) {
            double gpdf = dist_pdf(g, x);
            return gpdf == 0.0 ? 0.0 : std::pow(x, power) * gpdf;
        },
        lo, hi, 1e-10);
    return std::pow(moment / mass, 1.0 / (sigma - 1.0));
}

}  // namespace superspill
