#include "core/quadrature.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace superspill {

namespace {

struct SimpsonState {
    const std::function<double(double)>& f;
    int depth_limit;
};

double simpson(double fa, double fm, double fb, double a, double b) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adapt(const SimpsonState& st, double a, double b, double fa, double fm, double fb,
             double whole, double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = st.f(lm), frm = st.f(rm);
    double left = simpson(fa, flm, fm, a, m);
    double right = simpson(fm, frm, fb, m, b);
    double delta = left + right - whole;
    if (depth >= st.depth_limit) {
        if (std::abs(delta) > 1e6 * tol)
            throw NumericError("quadrature failed to converge (possibly divergent integrand)");
        return left + right + delta / 15.0;
    }
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return adapt(st, a, m, fa, flm, fm, left, tol / 2.0, depth + 1) +
           adapt(st, m, b, fm, frm, fb, right, tol / 2.0, depth + 1);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
    if (!(b > a)) return 0.0;
    SimpsonState st{f, 48};
    // Seed the recursion on a few panels so sharp features near an endpoint
    // are not missed by the first Simpson estimate.
    const int kPanels = 8;
    double total = 0.0;
    double h = (b - a) / kPanels;
    for (int i = 0; i < kPanels; ++i) {
        double lo = a + i * h, hi = (i == kPanels - 1) ? b : a + (i + 1) * h;
        double flo = f(lo), fhi = f(hi), fm = f(0.5 * (lo + hi));
        double whole = simpson(flo, fm, fhi, lo, hi);
        total += adapt(st, lo, hi, flo, fm, fhi, whole, tol / kPanels, 0);
    }
    return total;
}

}  // namespace superspill
