#pragma once

#include "core/distributions.hpp"

namespace superspill {

// CES heterogeneous-firm model primitives with spillover-shifted productivity.
struct ModelParams {
    double rho = 0.6;    // CES substitution parameter, in (0,1)
    double theta = 1.0;  // aggregate demand shifter
    double w = 1.0;      // input price
    double f = 0.1;      // fixed production cost
    double f_e = 0.5;    // entry sunk cost
    double delta = 0.1;  // exogenous exit-shock probability, in (0,1]
    double alpha = 0.0;  // horizontal spillover elasticity
    double tau = 0.0;    // backward spillover elasticity
    double psi = 0.0;    // forward spillover elasticity
    double c = 1.0;      // firm-characteristics scale c(Z)
    Distribution capability_dist = LogNormalDist{0.0, 1.0};

    void validate() const;  // throws ConfigError naming the offending field
};

// Cell-level spillover exposure entering firm productivity. HSpill is an
// output share in percent (0-100); B/F are IO-weighted composites.
struct SpillExposure {
    double hspill = 0.0;
    double bspill = 0.0;
    double fspill = 0.0;
};

enum class SpillChannel { H, B, F };

// lambda * exp(alpha H) * exp(tau B) * exp(psi F) * c
double productivity_phi(double lambda, const SpillExposure& e, const ModelParams& p);

// w / (rho * phi), the MR = MC pricing rule.
double optimal_price(double phi, const ModelParams& p);

// Per-period profit at the pricing optimum for a firm with productivity phi:
// (1-rho) w^{rho/(rho-1)} rho^{rho/(1-rho)} phi^{rho/(1-rho)} Theta - f.
double profit_at_productivity(double phi, const ModelParams& p);

// Same, expressed in capability lambda with spillover-shifted productivity.
double optimal_profit(double lambda, const SpillExposure& e, const ModelParams& p);

// Unique zero-profit capability. f = 0 yields 0 and sets *degenerate.
double cutoff_capability(const SpillExposure& e, const ModelParams& p,
                         bool* degenerate = nullptr);

// alpha H + tau B + psi F + ln c + E[ln lambda | lambda > lambda*], the
// conditional expectation by adaptive quadrature over the truncated density.
// Throws EmptyMarketError when the survival mass is below 1e-12.
double expected_log_productivity(const SpillExposure& e, const ModelParams& p);

struct MarginalEffect {
    double direct = 0.0;
    double indirect = 0.0;
    double total = 0.0;
};

// Direct (channel elasticity) and indirect (cutoff-shift) components of
// d E[ln productivity | surviving] / d Spill for one channel.
MarginalEffect spillover_marginal_effect(const SpillExposure& e, const ModelParams& p,
                                         SpillChannel channel);

// max(0, pi(phi) / delta): discounted value of entering at productivity phi.
double entry_value(double phi, const SpillExposure& e, const ModelParams& p);

// Equilibrium productivity distribution mu(phi) = g(phi) / (1 - G(phi*)) on
// phi >= phi*, numerically normalized.
struct TruncatedDistribution {
    Distribution base;
    double phi_star = 0.0;
    double survival = 1.0;  // quadrature mass above phi_star

    double pdf(double phi) const;
};

TruncatedDistribution equilibrium_distribution(const ModelParams& p, double phi_star);

// CES aggregate productivity of survivors:
//   [ (1/(1-G(phi*))) Integral_{phi*}^inf phi^{sigma-1} g(phi) dphi ]^{1/(sigma-1)}
// use_printed_exponent flips the integrand power to phi^{1-sigma}.
double aggregate_productivity_tilde(const ModelParams& p, double phi_star, double sigma,
                                    bool use_printed_exponent = false);

}  // namespace superspill
