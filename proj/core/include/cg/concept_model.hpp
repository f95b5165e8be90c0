// Concept functions: linear CAV probes on activations, nonlinear concept
// models by frozen-prefix finetuning, and layer selection by accuracy
// saturation.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cg/dataset.hpp"
#include "cg/network.hpp"
#include "cg/train.hpp"

namespace cg {

struct CavProbe {
    std::vector<double> v;  // activation-space direction
    double bias = 0.0;
    LayerId layer{0};
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
};

// Batched activations at the given layer point for every input row.
Matrix activations_at_layer(const Network& net, const Matrix& inputs, LayerId at);

// Logistic-loss linear probe on activation rows, class-reweighted, evaluated
// on a seeded 80/20 holdout. Labels must contain both classes
// (DegenerateLabels otherwise) and at least two rows.
CavProbe fit_cav(const Matrix& activations, const std::vector<int>& labels, LayerId layer,
                 const TrainConfig& cfg);

// Probes stacked into a single linear head on top of f's prefix, giving a
// concept network whose gradient at probe.layer is the probe direction.
Network probes_as_network(const Network& f, const std::vector<CavProbe>& probes);

struct FinetuneResult {
    Network g;
    // Mean held-out accuracy for binary concepts; R^2 clamped to [0, 1] for
    // real-valued concepts.
    double val_concept_accuracy = 0.0;
};

// clone_with_new_head(f, m, unfreeze_from) trained on the dataset's concept
// columns: binary concepts use reweighted logistic loss, real-valued ones
// use mse. The frozen prefix stays bit-identical to f.
FinetuneResult finetune_concept_model(const Network& f, const Dataset& data,
                                      LayerId unfreeze_from, const TrainConfig& cfg);

struct LayerSelectionTrial {
    LayerId unfreeze_from;
    double val_concept_accuracy = 0.0;
};

struct LayerSelectionReport {
    std::vector<LayerSelectionTrial> trials;  // ordered from the last layer backwards
    LayerId chosen{0};
    double plateau_epsilon = 0.0;
};

// Finetunes with unfreeze_from walking from the last linear layer toward the
// input. Iteration stops once accuracy has improved at least once by
// plateau_eps and then stops improving; chosen is the latest (deepest)
// trial whose accuracy is within plateau_eps of the best seen.
LayerSelectionReport select_layer(const Network& f, const Dataset& data, double plateau_eps,
                                  const TrainConfig& cfg);

std::string to_json_string(const LayerSelectionReport& report);
void save_layer_selection_report(const LayerSelectionReport& report,
                                 const std::filesystem::path& path);

std::string to_json_string(const CavProbe& probe);
CavProbe cav_probe_from_json(const std::string& text);
void save_cav_probe(const CavProbe& probe, const std::filesystem::path& path);
CavProbe load_cav_probe(const std::filesystem::path& path);

}  // namespace cg
