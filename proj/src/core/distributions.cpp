#include "core/distributions.hpp"

#include <cmath>
#include <sstream>

#include "core/errors.hpp"

namespace superspill {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;
}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }
double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

// Wichura (1988) algorithm AS241, PPND16.
double normal_quantile(double p) {
    if (p <= 0.0 || p >= 1.0) throw DomainError("normal_quantile: p must be in (0,1)");
    double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                  3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
}

double dist_pdf(const Distribution& d, double x) {
    return std::visit(
        [x](const auto& dd) -> double {
            using T = std::decay_t<decltype(dd)>;
            if constexpr (std::is_same_v<T, LogNormalDist>) {
                if (x <= 0.0) return 0.0;
                double z = (std::log(x) - dd.mu) / dd.sigma;
                return normal_pdf(z) / (x * dd.sigma);
            } else if constexpr (std::is_same_v<T, ParetoDist>) {
                if (x < dd.xmin) return 0.0;
                return dd.shape * std::pow(dd.xmin, dd.shape) / std::pow(x, dd.shape + 1.0);
            } else if constexpr (std::is_same_v<T, UniformDist>) {
                return (x >= dd.lo && x <= dd.hi) ? 1.0 / (dd.hi - dd.lo) : 0.0;
            } else {
                (void)dd;
                throw DomainError("degenerate distribution has no density");
            }
        },
        d);
}

double dist_cdf(const Distribution& d, double x) {
    return std::visit(
        [x](const auto& dd) -> double {
            using T = std::decay_t<decltype(dd)>;
            if constexpr (std::is_same_v<T, LogNormalDist>) {
                if (x <= 0.0) return 0.0;
                return normal_cdf((std::log(x) - dd.mu) / dd.sigma);
            } else if constexpr (std::is_same_v<T, ParetoDist>) {
                if (x < dd.xmin) return 0.0;
                return 1.0 - std::pow(dd.xmin / x, dd.shape);
            } else if constexpr (std::is_same_v<T, UniformDist>) {
                if (x <= dd.lo) return 0.0;
                if (x >= dd.hi) return 1.0;
                return (x - dd.lo) / (dd.hi - dd.lo);
            } else {
                return x >= dd.value ? 1.0 : 0.0;
            }
        },
        d);
}

double dist_quantile(const Distribution& d, double p) {
    if (p < 0.0 || p > 1.0) throw DomainError("dist_quantile: p outside [0,1]");
    return std::visit(
        [p](const auto& dd) -> double {
            using T = std::decay_t<decltype(dd)>;
            if constexpr (std::is_same_v<T, LogNormalDist>) {
                return std::exp(dd.mu + dd.sigma * normal_quantile(p));
            } else if constexpr (std::is_same_v<T, ParetoDist>) {
                return dd.xmin / std::pow(1.0 - p, 1.0 / dd.shape);
            } else if constexpr (std::is_same_v<T, UniformDist>) {
                return dd.lo + p * (dd.hi - dd.lo);
            } else {
                return dd.value;
            }
        },
        d);
}

double dist_support_lo(const Distribution& d) {
    return std::visit(
        [](const auto& dd) -> double {
            using T = std::decay_t<decltype(dd)>;
            if constexpr (std::is_same_v<T, LogNormalDist>) return 0.0;
            else if constexpr (std::is_same_v<T, ParetoDist>) return dd.xmin;
            else if constexpr (std::is_same_v<T, UniformDist>) return dd.lo;
            else return dd.value;
        },
        d);
}

double dist_upper_truncation(const Distribution& d) {
    if (std::holds_alternative<DegenerateDist>(d)) return std::get<DegenerateDist>(d).value;
    if (std::holds_alternative<UniformDist>(d)) return std::get<UniformDist>(d).hi;
    return dist_quantile(d, 1.0 - 1e-12);
}

double dist_lower_truncation(const Distribution& d) {
    double lo = dist_support_lo(d);
    if (lo > 0.0) return lo;
    return dist_quantile(d, 1e-14);
}

bool dist_is_degenerate(const Distribution& d) {
    return std::holds_alternative<DegenerateDist>(d);
}

std::string dist_describe(const Distribution& d) {
    std::ostringstream os;
    std::visit(
        [&os](const auto& dd) {
            using T = std::decay_t<decltype(dd)>;
            if constexpr (std::is_same_v<T, LogNormalDist>)
                os << "lognormal(mu=" << dd.mu << ", sigma=" << dd.sigma << ")";
            else if constexpr (std::is_same_v<T, ParetoDist>)
                os << "pareto(xmin=" << dd.xmin << ", shape=" << dd.shape << ")";
            else if constexpr (std::is_same_v<T, UniformDist>)
                os << "uniform(" << dd.lo << ", " << dd.hi << ")";
            else
                os << "degenerate(" << dd.value << ")";
        },
        d);
    return os.str();
}

}  // namespace superspill
