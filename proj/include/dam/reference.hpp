#pragma once

#include <span>

#include "dam/network.hpp"

// Serial, literal evaluations of the network equations. They build the
// clamped states xi+i / xi-i explicitly and never reuse a shared dot product,
// which makes them slow but easy to audit. Tests and benchmarks compare the
// parallel kernels in network.hpp against these.
namespace dam::reference {

double neuron_field(const Pattern& xi, std::size_t i, const MemoryBank& bank, double beta,
                    const Interaction& f);

LossGrad batch_loss_and_grad(std::span<const Item> batch, const MemoryBank& bank,
                             const NetParams& params, double beta,
                             std::span<const std::size_t> loss_neurons);

// Loss only, for finite-difference checks.
double batch_loss(std::span<const Item> batch, const MemoryBank& bank, const NetParams& params,
                  double beta, std::span<const std::size_t> loss_neurons);

}  // namespace dam::reference
