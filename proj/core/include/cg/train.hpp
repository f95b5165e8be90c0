// Gradient-based training for Networks: SGD / Adam, three losses, frozen
// layers, early stopping, fully deterministic under a fixed seed.
#pragma once

#include <cstdint>
#include <vector>

#include "cg/dataset.hpp"
#include "cg/network.hpp"

namespace cg {

enum class Optimizer { sgd, adam };
enum class Loss { mse, binary_cross_entropy, cross_entropy };

std::string to_string(Optimizer o);
Optimizer optimizer_from_string(const std::string& s);
std::string to_string(Loss l);
Loss loss_from_string(const std::string& s);

struct TrainConfig {
    Optimizer optimizer = Optimizer::adam;
    double learning_rate = 1e-3;
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    Loss loss = Loss::mse;
    // Early stopping on validation loss; 0 disables. When enabled and the
    // dataset has val rows, the returned network is the best-val snapshot.
    std::size_t early_stop_patience = 0;
};

struct TrainResult {
    Network net;
    std::vector<double> loss_history;  // mean training loss per epoch
};

// Fits the network to data.targets on the rows tagged train (all rows when
// nothing is tagged train). Frozen layers never change. binary_cross_entropy
// reweights each column's positive class by its train-split negative/positive
// ratio. Throws InvalidConfig when no layer is trainable and
// TrainingDiverged when the loss leaves the finite range.
TrainResult train(const Network& net, const Dataset& data, const TrainConfig& cfg);

// Mean loss of predictions vs targets under the given loss (no reweighting).
double evaluate_loss(const Network& net, const Matrix& inputs, const Matrix& targets, Loss loss);

}  // namespace cg
