#pragma once

// Independent numerical references used by the unit and acceptance tests.
// None of them call into the library.

#include <cmath>
#include <functional>

namespace oracle {

/// Composite Simpson rule on [a, b] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels = 20000) {
    if (panels % 2 != 0) ++panels;
    const double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int i = 1; i < panels; ++i) s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return s * h / 3.0;
}

/// Classical fourth-order Runge-Kutta for a scalar ODE y' = f(t, y).
inline double rk4(const std::function<double(double, double)>& f, double y0, double t0, double t1, int steps) {
    const double h = (t1 - t0) / steps;
    double y = y0;
    for (int i = 0; i < steps; ++i) {
        const double t = t0 + i * h;
        const double k1 = f(t, y);
        const double k2 = f(t + h / 2, y + h * k1 / 2);
        const double k3 = f(t + h / 2, y + h * k2 / 2);
        const double k4 = f(t + h, y + h * k3);
        y += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0;
    }
    return y;
}

/// Central first and second differences.
inline double d1(const std::function<double(double)>& f, double x, double h = 1e-5) {
    return (f(x + h) - f(x - h)) / (2 * h);
}
inline double d2(const std::function<double(double)>& f, double x, double h = 1e-4) {
    return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h);
}

}  // namespace oracle
