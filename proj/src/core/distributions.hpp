#pragma once

#include <string>
#include <variant>

namespace superspill {

// Capability / productivity distribution menu. LogNormal and Pareto are the
// model's choices; Uniform and Degenerate exist for fixtures and oracles.
struct LogNormalDist {
    double mu = 0.0;
    double sigma = 1.0;
};
struct ParetoDist {
    double xmin = 1.0;
    double shape = 2.0;
};
struct UniformDist {
    double lo = 0.0;
    double hi = 1.0;
};
struct DegenerateDist {
    double value = 1.0;
};

using Distribution = std::variant<LogNormalDist, ParetoDist, UniformDist, DegenerateDist>;

double dist_pdf(const Distribution& d, double x);
double dist_cdf(const Distribution& d, double x);
double dist_quantile(const Distribution& d, double p);
double dist_support_lo(const Distribution& d);
// Finite cutoff carrying all but 1e-12 of the upper tail (quadrature bound).
double dist_upper_truncation(const Distribution& d);
// Strictly positive lower quadrature bound; equals the support minimum except
// for densities whose support touches 0 (lognormal), where it is the 1e-14
// quantile.
double dist_lower_truncation(const Distribution& d);
bool dist_is_degenerate(const Distribution& d);

std::string dist_describe(const Distribution& d);

// Standard normal helpers (Wichura AS241 for the inverse).
double normal_cdf(double x);
double normal_pdf(double x);
double normal_quantile(double p);

}  // namespace superspill
