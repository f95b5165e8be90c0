#include "cg/network.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cg/errors.hpp"

namespace cg {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Sin: return "sin";
    }
    throw InvalidInput("unknown activation");
}

Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::Identity;
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "sin") return Activation::Sin;
    throw InvalidInput("unknown activation '" + s + "'");
}

double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::Identity: return x;
        case Activation::Tanh: return std::tanh(x);
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Activation::Sin: return std::sin(x);
    }
    throw InvalidInput("unknown activation");
}

double activation_derivative(Activation a, double x) {
    switch (a) {
        case Activation::Identity: return 1.0;
        case Activation::Tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::Sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 - s);
        }
        case Activation::Sin: return std::cos(x);
    }
    throw InvalidInput("unknown activation");
}

Network::Network(std::size_t input_dim, std::vector<Layer> layers)
    : input_dim_(input_dim), layers_(std::move(layers)) {
    std::size_t dim = input_dim_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Layer& l = layers_[i];
        if (l.is_linear()) {
            const LinearLayer& lin = l.linear();
            if (lin.weights.cols() != dim)
                throw InvalidInput("layer " + std::to_string(i) + " expects input dim " +
                                   std::to_string(lin.weights.cols()) + ", got " +
                                   std::to_string(dim));
            if (lin.bias.size() != lin.weights.rows())
                throw InvalidInput("layer " + std::to_string(i) + " bias length mismatch");
            if (!all_finite(lin.bias)) throw InvalidInput("non-finite bias");
            dim = lin.weights.rows();
        }
    }
}

std::size_t Network::output_dim() const {
    std::size_t dim = input_dim_;
    for (const Layer& l : layers_)
        if (l.is_linear()) dim = l.linear().weights.rows();
    return dim;
}

std::size_t Network::dim_at(LayerId at) const {
    if (at.index > layers_.size())
        throw InvalidInput("layer index " + std::to_string(at.index) + " out of range");
    std::size_t dim = input_dim_;
    for (std::size_t i = 0; i < at.index; ++i)
        if (layers_[i].is_linear()) dim = layers_[i].linear().weights.rows();
    return dim;
}

std::vector<std::vector<double>> forward(const Network& net, std::span<const double> x) {
    if (x.size() != net.input_dim())
        throw InvalidInput("forward: input length " + std::to_string(x.size()) +
                           " != input dim " + std::to_string(net.input_dim()));

    std::vector<std::vector<double>> acts;
    acts.reserve(net.num_layer_points());
    acts.emplace_back(x.begin(), x.end());
    for (const Layer& l : net.layers()) {
        const std::vector<double>& in = acts.back();
        if (l.is_linear()) {
            const LinearLayer& lin = l.linear();
            std::vector<double> out = matvec(lin.weights, in);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += lin.bias[i];
            acts.push_back(std::move(out));
        } else {
            std::vector<double> out(in.size());
            for (std::size_t i = 0; i < in.size(); ++i)
                out[i] = apply_activation(l.activation(), in[i]);
            acts.push_back(std::move(out));
        }
    }
    return acts;
}

Matrix forward_batch(const Network& net, const Matrix& inputs) {
    if (inputs.cols() != net.input_dim())
        throw InvalidInput("forward_batch: input dim mismatch");
    Matrix a = inputs;
    for (const Layer& l : net.layers()) {
        if (l.is_linear()) {
            const LinearLayer& lin = l.linear();
            const std::size_t n = a.rows(), in_dim = a.cols(), out_dim = lin.weights.rows();
            Matrix next(n, out_dim);
            for (std::size_t r = 0; r < n; ++r) {
                const double* ar = a.data().data() + r * in_dim;
                double* nr = next.data().data() + r * out_dim;
                for (std::size_t o = 0; o < out_dim; ++o) {
                    const double* w = lin.weights.data().data() + o * in_dim;
                    double acc = lin.bias[o];
                    for (std::size_t j = 0; j < in_dim; ++j) acc += w[j] * ar[j];
                    nr[o] = acc;
                }
            }
            a = std::move(next);
        } else {
            for (double& v : a.data()) v = apply_activation(l.activation(), v);
        }
    }
    return a;
}

Matrix jacobian_at_layer(const Network& net, std::span<const double> x, LayerId at) {
    if (at.index > net.layers().size())
        throw InvalidInput("jacobian_at_layer: layer index out of range");

    const auto acts = forward(net, x);
    const std::size_t k = net.output_dim();

    // g holds d out / d a_l, rows indexing outputs; sweep from the output
    // back to `at`, then transpose into the (dim x k) convention.
    Matrix g = Matrix::identity(k);
    for (std::size_t l = net.layers().size(); l-- > at.index;) {
        const Layer& layer = net.layers()[l];
        if (layer.is_linear()) {
            g = matmul(g, layer.linear().weights);
        } else {
            const std::vector<double>& in = acts[l];
            std::vector<double> deriv(in.size());
            for (std::size_t c = 0; c < in.size(); ++c)
                deriv[c] = activation_derivative(layer.activation(), in[c]);
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) g(r, c) *= deriv[c];
        }
    }
    return transpose(g);
}

namespace {

LinearLayer random_linear(std::size_t out_dim, std::size_t in_dim, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / double(in_dim + out_dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(out_dim, in_dim);
    for (double& v : w.data()) v = dist(rng);
    return LinearLayer{std::move(w), std::vector<double>(out_dim, 0.0)};
}

}  // namespace

Network make_mlp(std::size_t input_dim, std::size_t hidden_width, std::size_t hidden_layers,
                 std::size_t output_dim, Activation activation, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Layer> layers;
    std::size_t dim = input_dim;
    for (std::size_t i = 0; i < hidden_layers; ++i) {
        layers.push_back(Layer{random_linear(hidden_width, dim, rng), false});
        layers.push_back(Layer{activation, false});
        dim = hidden_width;
    }
    layers.push_back(Layer{random_linear(output_dim, dim, rng), false});
    return Network(input_dim, std::move(layers));
}

Network clone_with_new_head(const Network& net, std::size_t new_output_dim, LayerId unfreeze_from,
                            std::uint64_t seed) {
    if (unfreeze_from.index > net.layers().size())
        throw InvalidInput("clone_with_new_head: unfreeze_from out of range");
    if (net.layers().empty() || !net.layers().back().is_linear())
        throw InvalidInput("clone_with_new_head: network must end in a linear head");

    std::mt19937_64 rng(seed);
    std::vector<Layer> layers = net.layers();
    const std::size_t head = layers.size() - 1;
    const std::size_t head_in = layers[head].linear().weights.cols();
    layers[head].op = random_linear(new_output_dim, head_in, rng);
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].frozen = i < unfreeze_from.index;
    return Network(net.input_dim(), std::move(layers));
}

bool prefixes_match(const Network& a, const Network& b, LayerId below) {
    if (a.input_dim() != b.input_dim()) return false;
    if (below.index > a.layers().size() || below.index > b.layers().size()) return false;
    for (std::size_t i = 0; i < below.index; ++i)
        if (a.layers()[i].op != b.layers()[i].op) return false;
    return true;
}

std::string to_json_string(const Network& net) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["input_dim"] = net.input_dim();
    nlohmann::json layers = nlohmann::json::array();
    for (const Layer& l : net.layers()) {
        nlohmann::json jl;
        jl["frozen"] = l.frozen;
        if (l.is_linear()) {
            const LinearLayer& lin = l.linear();
            jl["kind"] = "linear";
            jl["out_dim"] = lin.weights.rows();
            jl["in_dim"] = lin.weights.cols();
            jl["weights"] = lin.weights.data();
            jl["bias"] = lin.bias;
        } else {
            jl["kind"] = "activation";
            jl["fn"] = to_string(l.activation());
        }
        layers.push_back(std::move(jl));
    }
    j["layers"] = std::move(layers);
    return j.dump(2);
}

Network network_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("network json parse error: ") + e.what());
    }
    try {
        if (j.at("format_version").get<int>() != 1)
            throw InvalidInput("unsupported network format version");
        std::vector<Layer> layers;
        for (const auto& jl : j.at("layers")) {
            Layer l;
            l.frozen = jl.at("frozen").get<bool>();
            const std::string kind = jl.at("kind").get<std::string>();
            if (kind == "linear") {
                const auto rows = jl.at("out_dim").get<std::size_t>();
                const auto cols = jl.at("in_dim").get<std::size_t>();
                auto data = jl.at("weights").get<std::vector<double>>();
                auto bias = jl.at("bias").get<std::vector<double>>();
                l.op = LinearLayer{Matrix(rows, cols, std::move(data)), std::move(bias)};
            } else if (kind == "activation") {
                l.op = activation_from_string(jl.at("fn").get<std::string>());
            } else {
                throw InvalidInput("unknown layer kind '" + kind + "'");
            }
            layers.push_back(std::move(l));
        }
        return Network(j.at("input_dim").get<std::size_t>(), std::move(layers));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed network json: ") + e.what());
    }
}

void save_network(const Network& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot open '" + path.string() + "' for writing");
    out << to_json_string(net) << "\n";
    if (!out) throw InvalidInput("failed writing '" + path.string() + "'");
}

Network load_network(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return network_from_json(ss.str());
}

}  // namespace cg
