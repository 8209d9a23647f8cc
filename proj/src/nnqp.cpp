#include <algorithm>
#include <cmath>
#include <limits>

#include "dam/continual.hpp"
#include "dam/errors.hpp"

namespace dam {

// Projected gradient on the Jacobi-preconditioned problem. In the scaled
// variables w = sqrt(diag Q) v the Hessian has unit diagonal, so its largest
// eigenvalue is bounded by its trace (the number of live variables) and a
// step of 1/trace is always stable.
QpResult nnqp_solve(const Matrix& Q, std::span<const double> c, double tol, int max_iter) {
    const std::size_t k = c.size();
    if (Q.rows != k || Q.cols != k) throw ShapeError("nnqp_solve: Q must be k x k");
    QpResult out;
    out.v.assign(k, 0.0);
    if (k == 0) {
        out.converged = true;
        return out;
    }

    std::vector<double> sqrt_diag(k);
    std::size_t live = 0;
    double scale = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
        sqrt_diag[i] = std::sqrt(std::max(Q(i, i), 0.0));
        if (sqrt_diag[i] > 0.0) {
            ++live;
            scale = std::max(scale, std::abs(c[i]) / sqrt_diag[i]);
        }
    }
    if (live == 0) {
        out.converged = true;
        return out;
    }
    const double step = 1.0 / static_cast<double>(live);

    std::vector<double> grad(k), best = out.v;
    double best_res = std::numeric_limits<double>::infinity();
    auto residual = [&](const std::vector<double>& v) {
        for (std::size_t i = 0; i < k; ++i) {
            double g = c[i];
            for (std::size_t j = 0; j < k; ++j) g += Q(i, j) * v[j];
            grad[i] = g;
        }
        double r = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            if (sqrt_diag[i] == 0.0) continue;
            r = std::max(r, std::abs(std::min(sqrt_diag[i] * v[i], grad[i] / sqrt_diag[i])));
        }
        return r / scale;
    };

    for (out.iterations = 0; out.iterations <= max_iter; ++out.iterations) {
        const double r = residual(out.v);
        if (r < best_res) {
            best_res = r;
            best = out.v;
        }
        if (r <= tol) {
            out.converged = true;
            break;
        }
        if (out.iterations == max_iter) break;
        for (std::size_t i = 0; i < k; ++i) {
            if (sqrt_diag[i] == 0.0) continue;
            const double d = sqrt_diag[i] * sqrt_diag[i];
            out.v[i] = std::max(0.0, out.v[i] - step * grad[i] / d);
        }
    }
    if (!out.converged) out.v = best;
    out.residual = best_res;
    return out;
}

}  // namespace dam
