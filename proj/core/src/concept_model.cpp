#include "cg/concept_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cg/errors.hpp"

namespace cg {

Matrix activations_at_layer(const Network& net, const Matrix& inputs, LayerId at) {
    if (at.index > net.layers().size())
        throw InvalidInput("activations_at_layer: layer index out of range");
    std::vector<Layer> prefix(net.layers().begin(), net.layers().begin() + at.index);
    const Network truncated(net.input_dim(), std::move(prefix));
    return forward_batch(truncated, inputs);
}

CavProbe fit_cav(const Matrix& activations, const std::vector<int>& labels, LayerId layer,
                 const TrainConfig& cfg) {
    const std::size_t n = activations.rows();
    if (n < 2) throw InvalidInput("fit_cav: need at least two rows");
    if (labels.size() != n) throw InvalidInput("fit_cav: label count mismatch");

    std::size_t positives = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw InvalidInput("fit_cav: labels must be 0 or 1");
        positives += std::size_t(l);
    }
    if (positives == 0 || positives == n)
        throw DegenerateLabels("fit_cav: both label classes must be present");

    // Seeded 80/20 holdout; identical across trials for a fixed seed.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_train = std::max<std::size_t>(1, (n * 4) / 5);

    Dataset probe_data;
    probe_data.inputs = activations;
    probe_data.concepts = Matrix(n, 0);
    probe_data.targets = Matrix(n, 1);
    probe_data.split.assign(n, Split::train);
    for (std::size_t i = 0; i < n; ++i) {
        probe_data.targets(order[i], 0) = double(labels[order[i]]);
        probe_data.split[order[i]] = i < n_train ? Split::train : Split::val;
    }

    Network probe_net = make_mlp(activations.cols(), 0, 0, 1, Activation::Identity, cfg.seed);
    TrainConfig probe_cfg = cfg;
    probe_cfg.loss = Loss::binary_cross_entropy;
    const TrainResult fit = train(probe_net, probe_data, probe_cfg);

    const LinearLayer& head = fit.net.layers().back().linear();
    CavProbe probe;
    probe.v = head.weights.data();
    probe.bias = head.bias[0];
    probe.layer = layer;

    auto accuracy_on = [&](Split s) {
        const auto idx = probe_data.indices_of(s);
        if (idx.empty()) return 0.0;
        std::size_t correct = 0;
        for (std::size_t r : idx) {
            double z = probe.bias;
            for (std::size_t j = 0; j < activations.cols(); ++j)
                z += probe.v[j] * activations(r, j);
            correct += std::size_t((z > 0.0) == (probe_data.targets(r, 0) > 0.5));
        }
        return double(correct) / double(idx.size());
    };
    probe.train_accuracy = accuracy_on(Split::train);
    probe.val_accuracy = accuracy_on(Split::val);
    return probe;
}

Network probes_as_network(const Network& f, const std::vector<CavProbe>& probes) {
    if (probes.empty()) throw InvalidInput("probes_as_network: no probes");
    const LayerId layer = probes.front().layer;
    for (const CavProbe& p : probes)
        if (p.layer.index != layer.index)
            throw InvalidInput("probes_as_network: probes span different layers");

    const std::size_t dim = f.dim_at(layer);
    Matrix w(probes.size(), dim);
    std::vector<double> bias(probes.size());
    for (std::size_t i = 0; i < probes.size(); ++i) {
        if (probes[i].v.size() != dim)
            throw InvalidInput("probes_as_network: probe dim does not match layer");
        for (std::size_t j = 0; j < dim; ++j) w(i, j) = probes[i].v[j];
        bias[i] = probes[i].bias;
    }

    std::vector<Layer> layers(f.layers().begin(), f.layers().begin() + layer.index);
    layers.push_back(Layer{LinearLayer{std::move(w), std::move(bias)}, false});
    return Network(f.input_dim(), std::move(layers));
}

namespace {

// Mean thresholded accuracy for binary concepts, clamped R^2 otherwise.
double concept_score(const Matrix& pred, const Matrix& truth, bool binary) {
    const std::size_t n = pred.rows(), m = pred.cols();
    if (n == 0) return 0.0;
    if (binary) {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < pred.size(); ++i)
            correct += std::size_t((pred.data()[i] > 0.0) == (truth.data()[i] > 0.5));
        return double(correct) / double(n * m);
    }
    double mean = 0.0;
    for (double v : truth.data()) mean += v;
    mean /= double(truth.size());
    double sse = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred.data()[i] - truth.data()[i];
        const double t = truth.data()[i] - mean;
        sse += e * e;
        sst += t * t;
    }
    if (sst == 0.0) return sse == 0.0 ? 1.0 : 0.0;
    return std::clamp(1.0 - sse / sst, 0.0, 1.0);
}

}  // namespace

FinetuneResult finetune_concept_model(const Network& f, const Dataset& data,
                                      LayerId unfreeze_from, const TrainConfig& cfg) {
    if (data.concept_dim() == 0)
        throw InvalidInput("finetune_concept_model: dataset has no concept columns");

    const bool binary = data.all_concepts_binary();

    Dataset concept_data;
    concept_data.inputs = data.inputs;
    concept_data.concepts = Matrix(data.size(), 0);
    concept_data.targets = data.concepts;
    concept_data.split = data.split;

    Network g0 = clone_with_new_head(f, data.concept_dim(), unfreeze_from, cfg.seed);
    TrainConfig tcfg = cfg;
    tcfg.loss = binary ? Loss::binary_cross_entropy : Loss::mse;
    TrainResult fit = train(g0, concept_data, tcfg);

    if (!prefixes_match(f, fit.net, unfreeze_from))
        throw InvalidInput("finetune_concept_model: frozen prefix changed during training");

    auto rows = concept_data.indices_of(Split::val);
    if (rows.empty()) rows = concept_data.indices_of(Split::train);
    if (rows.empty()) {
        rows.resize(concept_data.size());
        std::iota(rows.begin(), rows.end(), 0);
    }
    const Dataset holdout = concept_data.subset(rows);
    const Matrix pred = forward_batch(fit.net, holdout.inputs);

    FinetuneResult out;
    out.g = std::move(fit.net);
    out.val_concept_accuracy = concept_score(pred, holdout.targets, binary);
    return out;
}

LayerSelectionReport select_layer(const Network& f, const Dataset& data, double plateau_eps,
                                  const TrainConfig& cfg) {
    if (plateau_eps <= 0.0) throw InvalidInput("select_layer: plateau_eps must be positive");

    std::vector<std::size_t> linear_indices;
    for (std::size_t i = 0; i < f.layers().size(); ++i)
        if (f.layers()[i].is_linear()) linear_indices.push_back(i);
    if (linear_indices.empty()) throw InvalidInput("select_layer: network has no linear layers");

    LayerSelectionReport report;
    report.plateau_epsilon = plateau_eps;

    bool improvement_seen = false;
    for (std::size_t t = linear_indices.size(); t-- > 0;) {
        const LayerId unfreeze{linear_indices[t]};
        const FinetuneResult r = finetune_concept_model(f, data, unfreeze, cfg);
        report.trials.push_back({unfreeze, r.val_concept_accuracy});

        const std::size_t n = report.trials.size();
        if (n >= 2) {
            const double delta =
                report.trials[n - 1].val_concept_accuracy - report.trials[n - 2].val_concept_accuracy;
            if (delta >= plateau_eps) {
                improvement_seen = true;
            } else if (improvement_seen) {
                break;  // accuracy rose and has now saturated
            }
        }
    }

    double best = 0.0;
    for (const auto& t : report.trials) best = std::max(best, t.val_concept_accuracy);
    // Deepest (largest-index) trial inside the plateau; trials are ordered
    // from the last layer backwards, so the first hit wins.
    for (const auto& t : report.trials) {
        if (t.val_concept_accuracy >= best - plateau_eps) {
            report.chosen = t.unfreeze_from;
            break;
        }
    }
    return report;
}

std::string to_json_string(const LayerSelectionReport& report) {
    nlohmann::json j;
    j["plateau_epsilon"] = report.plateau_epsilon;
    j["chosen"] = report.chosen.index;
    nlohmann::json trials = nlohmann::json::array();
    for (const auto& t : report.trials)
        trials.push_back({{"unfreeze_from", t.unfreeze_from.index},
                          {"val_concept_accuracy", t.val_concept_accuracy}});
    j["trials"] = std::move(trials);
    return j.dump(2);
}

void save_layer_selection_report(const LayerSelectionReport& report,
                                 const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot open '" + path.string() + "' for writing");
    out << to_json_string(report) << "\n";
    if (!out) throw InvalidInput("failed writing '" + path.string() + "'");
}

std::string to_json_string(const CavProbe& probe) {
    nlohmann::json j;
    j["v"] = probe.v;
    j["bias"] = probe.bias;
    j["layer"] = probe.layer.index;
    j["train_accuracy"] = probe.train_accuracy;
    j["val_accuracy"] = probe.val_accuracy;
    return j.dump(2);
}

CavProbe cav_probe_from_json(const std::string& text) {
    try {
        const nlohmann::json j = nlohmann::json::parse(text);
        CavProbe probe;
        probe.v = j.at("v").get<std::vector<double>>();
        probe.bias = j.at("bias").get<double>();
        probe.layer = LayerId{j.at("layer").get<std::size_t>()};
        probe.train_accuracy = j.at("train_accuracy").get<double>();
        probe.val_accuracy = j.at("val_accuracy").get<double>();
        return probe;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed probe json: ") + e.what());
    }
}

void save_cav_probe(const CavProbe& probe, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot open '" + path.string() + "' for writing");
    out << to_json_string(probe) << "\n";
    if (!out) throw InvalidInput("failed writing '" + path.string() + "'");
}

CavProbe load_cav_probe(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return cav_probe_from_json(ss.str());
}

}  // namespace cg
