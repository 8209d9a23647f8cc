#include "dam/reference.hpp"

#include <cmath>

#include "dam/errors.hpp"

namespace dam::reference {

namespace {

double naive_dot(std::span<const double> a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
    return s;
}

std::vector<double> with_entry(const std::vector<double>& v, std::size_t i, double value) {
    std::vector<double> out = v;
    out[i] = value;
    return out;
}

}  // namespace

double neuron_field(const Pattern& xi, std::size_t i, const MemoryBank& bank, double beta,
                    const Interaction& f) {
    if (xi.size() != bank.width()) throw ShapeError("reference::neuron_field: width mismatch");
    const auto plus = with_entry(xi.values, i, 1.0);
    const auto minus = with_entry(xi.values, i, -1.0);
    double field = 0.0;
    for (std::size_t k = 0; k < bank.count(); ++k) {
        const auto zeta = bank.memories.row(k);
        field += f.value(beta * naive_dot(zeta, plus)) - f.value(beta * naive_dot(zeta, minus));
    }
    return field;
}

double batch_loss(std::span<const Item> batch, const MemoryBank& bank, const NetParams& params,
                  double beta, std::span<const std::size_t> loss_neurons) {
    const Interaction f = params.interaction();
    double loss = 0.0;
    for (const Item& item : batch)
        for (std::size_t l = 0; l < loss_neurons.size(); ++l) {
            const double y = std::tanh(reference::neuron_field(item.pattern, loss_neurons[l], bank, beta, f));
            loss += std::pow(item.target[l] - y, 2 * params.error_exp_m);
        }
    return loss;
}

LossGrad batch_loss_and_grad(std::span<const Item> batch, const MemoryBank& bank,
                             const NetParams& params, double beta,
                             std::span<const std::size_t> loss_neurons) {
    if (batch.empty()) throw ShapeError("reference::batch_loss_and_grad: empty batch");
    const Interaction f = params.interaction();
    const int m = params.error_exp_m;
    LossGrad out;
    out.grad = Matrix(bank.count(), bank.width());
    for (const Item& item : batch) {
        for (std::size_t l = 0; l < loss_neurons.size(); ++l) {
            const std::size_t i = loss_neurons[l];
            const auto plus = with_entry(item.pattern.values, i, 1.0);
            const auto minus = with_entry(item.pattern.values, i, -1.0);
            const double field = reference::neuron_field(item.pattern, i, bank, beta, f);
            const double y = std::tanh(field);
            const double e = item.target[l] - y;
            out.loss += std::pow(e, 2 * m);
            // dLoss/dfield = dLoss/dy * dy/dfield
            const double dloss_dy = -2.0 * m * std::pow(e, 2 * m - 1);
            const double c = dloss_dy * (1.0 - y * y);
            for (std::size_t k = 0; k < bank.count(); ++k) {
                const auto zeta = bank.memories.row(k);
                const double dp = f.deriv(beta * naive_dot(zeta, plus));
                const double dm = f.deriv(beta * naive_dot(zeta, minus));
                for (std::size_t j = 0; j < bank.width(); ++j)
                    out.grad(k, j) += c * beta * (dp * plus[j] - dm * minus[j]);
            }
        }
    }
    return out;
}

}  // namespace dam::reference
