// Feed-forward network: ordered layer list with frozen flags, exact
// reverse-mode Jacobians at any layer, and versioned JSON serialization.
//
// Gradient convention throughout: a Jacobian taken at layer l is a
// (dim_at_l x output_dim) matrix whose (i, j) entry is d out_j / d a_i.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cg/matrix.hpp"

namespace cg {

enum class Activation { Identity, Tanh, Relu, Sigmoid, Sin };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

double apply_activation(Activation a, double x);
double activation_derivative(Activation a, double x);  // derivative at input x

struct LinearLayer {
    Matrix weights;            // out_dim x in_dim
    std::vector<double> bias;  // out_dim

    bool operator==(const LinearLayer&) const = default;
};

struct Layer {
    std::variant<LinearLayer, Activation> op;
    bool frozen = false;

    bool is_linear() const { return std::holds_alternative<LinearLayer>(op); }
    const LinearLayer& linear() const { return std::get<LinearLayer>(op); }
    LinearLayer& linear() { return std::get<LinearLayer>(op); }
    Activation activation() const { return std::get<Activation>(op); }

    bool operator==(const Layer&) const = default;
};

// Index into the chain of activation points: 0 is the raw input, i is the
// output of layer i-1, layers().size() is the network output.
struct LayerId {
    std::size_t index = 0;
};

class Network {
public:
    Network() = default;

    // Validates that adjacent layer dimensions chain.
    Network(std::size_t input_dim, std::vector<Layer> layers);

    std::size_t input_dim() const { return input_dim_; }
    std::size_t output_dim() const;

    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    std::size_t num_layer_points() const { return layers_.size() + 1; }

    // Dimension of the activation vector at the given point.
    std::size_t dim_at(LayerId at) const;

    bool operator==(const Network&) const = default;

private:
    std::size_t input_dim_ = 0;
    std::vector<Layer> layers_;
};

// All activations from input (index 0) to output (index layers().size()).
std::vector<std::vector<double>> forward(const Network& net, std::span<const double> x);

// Final outputs only, for a batch of rows.
Matrix forward_batch(const Network& net, const Matrix& inputs);

// Exact Jacobian of the network outputs with respect to the activations at
// `at`, computed by reverse accumulation through the layers after `at`.
Matrix jacobian_at_layer(const Network& net, std::span<const double> x, LayerId at);

// Fully-connected builder: `hidden_layers` linear+activation blocks of the
// given width followed by a linear head. Weights are uniform in
// +-sqrt(6 / (fan_in + fan_out)), seeded.
Network make_mlp(std::size_t input_dim, std::size_t hidden_width, std::size_t hidden_layers,
                 std::size_t output_dim, Activation activation, std::uint64_t seed);

// Copy of `net` with the final linear head replaced by a freshly initialized
// one emitting new_output_dim values; layers before unfreeze_from are frozen,
// layers at or after it are trainable.
Network clone_with_new_head(const Network& net, std::size_t new_output_dim, LayerId unfreeze_from,
                            std::uint64_t seed);

// True when the two networks are identical (kind, dims, exact weights) for
// every layer before `below`.
bool prefixes_match(const Network& a, const Network& b, LayerId below);

// Versioned JSON round trip; doubles survive exactly.
std::string to_json_string(const Network& net);
Network network_from_json(const std::string& text);
void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

}  // namespace cg
