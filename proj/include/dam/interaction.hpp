#pragma once

#include <cmath>

namespace dam {

// Leaky rectified polynomial: f(x) = x^n for x > 0, -eps*x otherwise.
// Integer vertices use exponentiation by squaring; others fall back to std::pow.
class Interaction {
public:
    Interaction(double n, double eps_leak);

    double n() const { return n_; }
    double eps_leak() const { return eps_; }

    double value(double x) const { return x > 0.0 ? x * pow_n_minus_1(x) : -eps_ * x; }
    double deriv(double x) const { return x > 0.0 ? n_ * pow_n_minus_1(x) : -eps_; }

    void both(double x, double& f, double& df) const {
        if (x > 0.0) {
            const double p = pow_n_minus_1(x);
            df = n_ * p;
            f = p * x;
        } else {
            f = -eps_ * x;
            df = -eps_;
        }
    }

private:
    double pow_n_minus_1(double x) const {
        if (!integral_) return std::pow(x, n_ - 1.0);
        double r = 1.0, b = x;
        for (int k = exponent_; k > 0; k >>= 1) {
            if (k & 1) r *= b;
            b *= b;
        }
        return r;
    }

    double n_;
    double eps_;
    bool integral_;
    int exponent_;  // n - 1 when integral_
};

struct InteractionValue {
    double f;
    double df;
};

// Checked scalar form: rejects non-finite x and out-of-range parameters.
InteractionValue interaction_and_deriv(double x, double n, double eps_leak);

}  // namespace dam
