#pragma once

#include <functional>

namespace superspill {

// Adaptive Simpson on [a, b] to absolute tolerance tol.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-10);

}  // namespace superspill
