// Command-line entry point wiring data generation, training, attribution,
// layer selection, and evaluation into reproducible pipelines.
//
// Exit codes: 0 success, 2 input error, 3 degenerate-gradient count above
// threshold, 4 training divergence.
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cg/attribution.hpp"
#include "cg/concept_model.hpp"
#include "cg/dataset.hpp"
#include "cg/errors.hpp"
#include "cg/eval.hpp"
#include "cg/network.hpp"
#include "cg/svd.hpp"
#include "cg/synthetic.hpp"
#include "cg/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitInputError = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitDiverged = 4;

json g_file_config;  // loaded from --config before parsing flags

void load_file_config(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        std::string path;
        if (arg == "--config" && i + 1 < argc) {
            path = argv[i + 1];
        } else if (arg.rfind("--config=", 0) == 0) {
            path = arg.substr(9);
        } else {
            continue;
        }
        std::ifstream in(path);
        if (!in) throw cg::InvalidInput("cannot open config file '" + path + "'");
        try {
            in >> g_file_config;
        } catch (const json::exception& e) {
            throw cg::InvalidInput("config file parse error: " + std::string(e.what()));
        }
        return;
    }
}

template <typename T>
void from_config(const char* key, T& value) {
    if (g_file_config.contains(key)) value = g_file_config.at(key).get<T>();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw cg::InvalidInput("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw cg::InvalidInput("failed writing '" + path.string() + "'");
}

// Resolved-config snapshot next to the run's outputs; feeding it back via
// --config replays the run.
void write_snapshot(const fs::path& out_dir, const std::string& command, const json& resolved) {
    write_text(out_dir / (command + ".config.json"), resolved.dump(2) + "\n");
}

struct TrainFlags {
    std::string optimizer = "adam";
    double lr = 1e-3;
    std::size_t epochs = 100;
    std::size_t batch = 32;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    std::string loss = "mse";
    std::size_t patience = 0;
};

void add_train_options(CLI::App* cmd, TrainFlags& f) {
    from_config("optimizer", f.optimizer);
    from_config("lr", f.lr);
    from_config("epochs", f.epochs);
    from_config("batch", f.batch);
    from_config("weight-decay", f.weight_decay);
    from_config("seed", f.seed);
    from_config("loss", f.loss);
    from_config("patience", f.patience);
    cmd->add_option("--optimizer", f.optimizer, "sgd or adam");
    cmd->add_option("--lr", f.lr, "learning rate");
    cmd->add_option("--epochs", f.epochs, "training epochs");
    cmd->add_option("--batch", f.batch, "minibatch size");
    cmd->add_option("--weight-decay", f.weight_decay, "L2 penalty on weights");
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_option("--loss", f.loss, "mse, bce, or cross_entropy");
    cmd->add_option("--patience", f.patience, "early-stop patience in epochs (0 = off)");
}

cg::TrainConfig to_train_config(const TrainFlags& f) {
    cg::TrainConfig cfg;
    cfg.optimizer = cg::optimizer_from_string(f.optimizer);
    cfg.learning_rate = f.lr;
    cfg.epochs = f.epochs;
    cfg.batch_size = f.batch;
    cfg.weight_decay = f.weight_decay;
    cfg.seed = f.seed;
    cfg.loss = cg::loss_from_string(f.loss);
    cfg.early_stop_patience = f.patience;
    return cfg;
}

json train_flags_json(const TrainFlags& f) {
    return json{{"optimizer", f.optimizer}, {"lr", f.lr},
                {"epochs", f.epochs},       {"batch", f.batch},
                {"weight-decay", f.weight_decay}, {"seed", f.seed},
                {"loss", f.loss},           {"patience", f.patience}};
}

std::vector<std::size_t> rows_for_split(const cg::Dataset& data, const std::string& split) {
    if (split == "all") {
        std::vector<std::size_t> rows(data.size());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        return rows;
    }
    return data.indices_of(cg::split_from_string(split));
}

void write_meta(const fs::path& path, const json& meta) { write_text(path, meta.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// datagen

int cmd_datagen_sine(const cg::SineSpec& spec, const std::string& out) {
    const fs::path dir(out);
    fs::create_directories(dir);
    const cg::Dataset data = cg::gen_sine_dataset(spec);
    cg::write_csv(data, dir / "sine.csv");
    write_meta(dir / "sine_meta.json",
               json{{"kind", "sine"},
                    {"n", spec.n},
                    {"seed", spec.seed},
                    {"k0", spec.k0},
                    {"k1", spec.k1},
                    {"alpha0", spec.alpha0},
                    {"alpha1", spec.alpha1},
                    {"domain", {spec.domain_lo, spec.domain_hi}}});
    write_snapshot(dir, "datagen_sine",
                   json{{"n", spec.n},
                        {"seed", spec.seed},
                        {"k0", spec.k0},
                        {"k1", spec.k1},
                        {"alpha0", spec.alpha0},
                        {"alpha1", spec.alpha1},
                        {"lo", spec.domain_lo},
                        {"hi", spec.domain_hi},
                        {"out", out}});
    std::cout << "wrote " << (dir / "sine.csv").string() << " (" << data.size() << " rows)\n";
    return 0;
}

int cmd_datagen_multilabel(std::size_t n, std::size_t m, std::size_t d, std::uint64_t seed,
                           const std::string& out) {
    const fs::path dir(out);
    fs::create_directories(dir);
    const cg::Dataset data = cg::gen_multilabel_benchmark(n, m, d, seed);
    cg::write_csv(data, dir / "multilabel.csv");
    write_meta(dir / "multilabel_meta.json",
               json{{"kind", "multilabel"},
                    {"n", n},
                    {"m", m},
                    {"d", d},
                    {"classes", data.target_dim()},
                    {"seed", seed}});
    write_snapshot(dir, "datagen_multilabel",
                   json{{"n", n}, {"m", m}, {"d", d}, {"seed", seed}, {"out", out}});
    std::cout << "wrote " << (dir / "multilabel.csv").string() << " (" << data.size()
              << " rows)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// fixture

int cmd_fixture(const std::string& kind, const std::string& out) {
    const fs::path dir(out);
    fs::create_directories(dir);

    cg::Dataset points;
    if (kind == "scaling") {
        const cg::ScalingFixture fx = cg::build_scaling_fixture();
        cg::save_network(fx.f, dir / "f.json");
        cg::save_network(fx.concepts[0], dir / "g0.json");
        cg::save_network(fx.concepts[1], dir / "g1.json");

        // Concept model with both projections as one two-output head.
        std::vector<cg::Layer> layers(fx.f.layers().begin(), fx.f.layers().end() - 1);
        layers.push_back(cg::Layer{
            cg::LinearLayer{cg::Matrix{{1.0, 0.0}, {0.0, 1.0}}, std::vector<double>(2, 0.0)},
            false});
        cg::save_network(cg::Network(2, std::move(layers)), dir / "g.json");

        points.inputs = cg::Matrix(9, 2);
        points.concepts = cg::Matrix(9, 2);
        points.targets = cg::Matrix(9, 1);
        std::size_t r = 0;
        for (double x0 : {-1.0, 0.0, 1.0}) {
            for (double x1 : {-1.0, 0.0, 1.0}) {
                points.inputs(r, 0) = x0;
                points.inputs(r, 1) = x1;
                points.concepts(r, 0) = x0;
                points.concepts(r, 1) = x1;
                points.targets(r, 0) = 0.1 * x0 + x1;
                ++r;
            }
        }
        points.split.assign(9, cg::Split::test);
    } else if (kind == "joint") {
        const cg::JointFixture fx = cg::build_joint_fixture();
        cg::save_network(fx.f, dir / "f.json");
        cg::save_network(fx.g, dir / "g.json");

        points.inputs = cg::Matrix(9, 2);
        points.concepts = cg::Matrix(9, 2);
        points.targets = cg::Matrix(9, 1);
        std::size_t r = 0;
        for (double x0 : {-1.0, 0.0, 1.0}) {
            for (double x1 : {-1.0, 0.0, 1.0}) {
                points.inputs(r, 0) = x0;
                points.inputs(r, 1) = x1;
                points.concepts(r, 0) = x0;
                points.concepts(r, 1) = x0 + 0.1 * x1;
                points.targets(r, 0) = x0 + x1;
                ++r;
            }
        }
        points.split.assign(9, cg::Split::test);
    } else {
        throw cg::InvalidInput("unknown fixture kind '" + kind + "' (scaling or joint)");
    }
    points.concept_names = {"c0", "c1"};
    points.target_names = {"y"};
    cg::write_csv(points, dir / "fixture.csv");
    write_snapshot(dir, "fixture", json{{"kind", kind}, {"out", out}});
    std::cout << "wrote fixture '" << kind << "' to " << dir.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const std::string& data_path, const std::string& out, std::size_t hidden,
              std::size_t depth, const std::string& activation, const TrainFlags& flags) {
    const cg::Dataset data = cg::read_csv(data_path);
    const cg::Network init =
        cg::make_mlp(data.input_dim(), hidden, depth, data.target_dim(),
                     cg::activation_from_string(activation), flags.seed);
    const cg::TrainResult result = cg::train(init, data, to_train_config(flags));

    const fs::path out_path(out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    cg::save_network(result.net, out_path);

    std::string loss_csv = "epoch,loss\n";
    for (std::size_t e = 0; e < result.loss_history.size(); ++e)
        loss_csv += std::to_string(e) + "," + cg::format_double(result.loss_history[e]) + "\n";
    fs::path loss_path = out_path;
    loss_path.replace_extension(".loss.csv");
    write_text(loss_path, loss_csv);

    json snap = train_flags_json(flags);
    snap["data"] = data_path;
    snap["out"] = out;
    snap["hidden"] = hidden;
    snap["depth"] = depth;
    snap["activation"] = activation;
    write_snapshot(out_path.has_parent_path() ? out_path.parent_path() : fs::path("."), "train",
                   snap);
    std::cout << "trained " << out << "; final loss "
              << cg::format_double(result.loss_history.back()) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// finetune-concept

int cmd_finetune_concept(const std::string& model_path, const std::string& data_path,
                         std::size_t unfreeze_from, const std::string& out,
                         const TrainFlags& flags) {
    const cg::Network f = cg::load_network(model_path);
    const cg::Dataset data = cg::read_csv(data_path);
    const cg::FinetuneResult result =
        cg::finetune_concept_model(f, data, cg::LayerId{unfreeze_from}, to_train_config(flags));

    const fs::path out_path(out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    cg::save_network(result.g, out_path);

    json snap = train_flags_json(flags);
    snap["model"] = model_path;
    snap["data"] = data_path;
    snap["unfreeze-from"] = unfreeze_from;
    snap["out"] = out;
    snap["val_concept_accuracy"] = result.val_concept_accuracy;
    write_snapshot(out_path.has_parent_path() ? out_path.parent_path() : fs::path("."),
                   "finetune_concept", snap);
    std::cout << "finetuned concept model " << out << "; val concept accuracy "
              << result.val_concept_accuracy << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// select-layer

int cmd_select_layer(const std::string& model_path, const std::string& data_path, double eps,
                     const std::string& out, const TrainFlags& flags) {
    const cg::Network f = cg::load_network(model_path);
    const cg::Dataset data = cg::read_csv(data_path);
    const cg::LayerSelectionReport report =
        cg::select_layer(f, data, eps, to_train_config(flags));

    const fs::path out_path(out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    cg::save_layer_selection_report(report, out_path);

    json snap = train_flags_json(flags);
    snap["model"] = model_path;
    snap["data"] = data_path;
    snap["eps"] = eps;
    snap["out"] = out;
    write_snapshot(out_path.has_parent_path() ? out_path.parent_path() : fs::path("."),
                   "select_layer", snap);
    std::cout << "chose layer " << report.chosen.index << " over " << report.trials.size()
              << " trials\n";
    return 0;
}

// ---------------------------------------------------------------------------
// attribute

int cmd_attribute(const std::string& model_path, const std::string& concept_model_path,
                  const std::string& data_path, const std::string& method,
                  const std::string& norm, std::size_t layer, std::optional<std::size_t> target,
                  const std::string& split, const std::string& out_csv,
                  const std::string& out_json, std::size_t degenerate_threshold) {
    const cg::Network f = cg::load_network(model_path);
    const cg::Network g = cg::load_network(concept_model_path);
    const cg::Dataset data = cg::read_csv(data_path);

    cg::AttributionConfig cfg;
    cfg.method = cg::method_from_string(method);
    cfg.normalization = cg::normalization_from_string(norm);
    cfg.layer = cg::LayerId{layer};
    cfg.target_output = target;

    const auto rows = rows_for_split(data, split);
    if (rows.empty()) throw cg::InvalidInput("no rows in split '" + split + "'");
    const cg::BatchAttribution batch = cg::attribute_batch(f, g, data.inputs, rows, cfg);

    const fs::path csv_path(out_csv);
    if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
    cg::write_attributions_csv(batch.results, csv_path);
    if (!out_json.empty()) cg::write_attributions_json(batch.results, out_json);

    json snap{{"model", model_path},
              {"concept-model", concept_model_path},
              {"data", data_path},
              {"method", method},
              {"norm", norm},
              {"layer", layer},
              {"split", split},
              {"out", out_csv},
              {"degenerate-threshold", degenerate_threshold},
              {"degenerate_count", batch.degenerate_count}};
    if (target) snap["target-output"] = *target;
    write_snapshot(csv_path.has_parent_path() ? csv_path.parent_path() : fs::path("."),
                   "attribute", snap);

    std::cout << "attributed " << rows.size() << " instances (" << batch.degenerate_count
              << " degenerate)\n";
    if (batch.degenerate_count > degenerate_threshold) {
        std::cerr << "degenerate concept gradients on " << batch.degenerate_count
                  << " instances exceeds threshold " << degenerate_threshold << "\n";
        return kExitDegenerate;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// eval

std::vector<std::size_t> parse_k_list(const std::string& ks) {
    std::vector<std::size_t> out;
    std::string cur;
    for (char c : ks + ",") {
        if (c == ',') {
            if (!cur.empty()) out.push_back(std::stoul(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (out.empty()) throw cg::InvalidInput("empty k list");
    return out;
}

int cmd_eval_recall(const std::string& attributions_path, const std::string& data_path,
                    const std::string& ks, std::optional<std::size_t> target,
                    const std::string& out) {
    const auto results = cg::read_attributions_csv(attributions_path);
    const cg::Dataset data = cg::read_csv(data_path);
    const auto k_list = parse_k_list(ks);

    cg::RecallReport report;
    report.method = fs::path(attributions_path).stem().string();
    std::size_t used = 0;
    std::map<std::size_t, double> totals;
    for (const auto& r : results) {
        if (r.instance_id >= data.size())
            throw cg::InvalidInput("attribution instance id out of dataset range");
        std::set<std::size_t> positives;
        for (std::size_t c = 0; c < data.concept_dim(); ++c)
            if (data.concepts(r.instance_id, c) == 1.0) positives.insert(c);
        if (positives.empty()) continue;

        std::size_t column = 0;
        if (target) {
            column = *target;
        } else {
            for (std::size_t j = 1; j < data.target_dim(); ++j)
                if (data.targets(r.instance_id, j) > data.targets(r.instance_id, column))
                    column = j;
        }
        if (column >= r.relevance.cols())
            throw cg::InvalidInput("target output column out of range");
        const auto importances = r.relevance.col(column);
        for (std::size_t k : k_list) totals[k] += cg::recall_at_k(importances, positives, k);
        ++used;
    }
    if (used == 0) throw cg::InvalidInput("no instances with positive concepts");
    for (std::size_t k : k_list) report.per_k[k] = totals[k] / double(used);
    report.n_instances = used;

    const fs::path out_path(out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    write_text(out_path, cg::to_json_string(report) + "\n");
    fs::path csv_path = out_path;
    csv_path.replace_extension(".csv");
    cg::write_recall_csv({report}, csv_path);

    json snap{{"attributions", attributions_path}, {"data", data_path}, {"k", ks}, {"out", out}};
    if (target) snap["target-output"] = *target;
    write_snapshot(out_path.has_parent_path() ? out_path.parent_path() : fs::path("."),
                   "eval_recall", snap);
    for (const auto& [k, v] : report.per_k)
        std::cout << "recall@" << k << " = " << cg::format_double(v) << "\n";
    return 0;
}

int cmd_eval_mse(const std::string& attributions_path, const std::string& truth_str,
                 std::size_t column, const std::string& out) {
    const auto results = cg::read_attributions_csv(attributions_path);

    std::vector<double> truth;
    std::string cur;
    for (char c : truth_str + ",") {
        if (c == ',') {
            if (!cur.empty()) truth.push_back(std::stod(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (truth.empty()) throw cg::InvalidInput("empty truth vector");

    std::vector<std::vector<double>> predicted;
    predicted.reserve(results.size());
    for (const auto& r : results) {
        if (column >= r.relevance.cols()) throw cg::InvalidInput("column out of range");
        predicted.push_back(r.relevance.col(column));
    }

    cg::GradientMseReport report;
    report.per_method[fs::path(attributions_path).stem().string()] =
        cg::gradient_mse(predicted, truth);

    const fs::path out_path(out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    write_text(out_path, cg::to_json_string(report) + "\n");
    write_snapshot(out_path.has_parent_path() ? out_path.parent_path() : fs::path("."),
                   "eval_mse",
                   json{{"attributions", attributions_path},
                        {"truth", truth_str},
                        {"column", column},
                        {"out", out}});
    for (const auto& [label, mse] : report.per_method)
        std::cout << label << " mse = " << cg::format_double(mse) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// reproduce-synthetic

struct ReproduceParams {
    std::uint64_t seed = 7;
    std::string out = "reproduction";
    std::size_t n = 2500;
    std::size_t hidden = 64;
    std::size_t depth = 4;
    std::size_t epochs = 600;
    std::size_t batch = 128;
    double lr = 3e-3;
    std::size_t probe_epochs = 200;
};

int cmd_reproduce_synthetic(const ReproduceParams& p) {
    const fs::path dir(p.out);
    fs::create_directories(dir);

    cg::SineSpec spec;
    spec.n = p.n;
    spec.seed = p.seed;
    const cg::Dataset data = cg::gen_sine_dataset(spec);
    cg::write_csv(data, dir / "sine.csv");

    cg::TrainConfig tcfg;
    tcfg.optimizer = cg::Optimizer::adam;
    tcfg.learning_rate = p.lr;
    tcfg.epochs = p.epochs;
    tcfg.batch_size = p.batch;
    tcfg.seed = p.seed;
    tcfg.loss = cg::Loss::mse;
    tcfg.early_stop_patience = 0;

    // Target model f on y, concept models g0 and g1 on c0 and c1, all
    // 4-hidden-layer tanh networks trained from scratch.
    std::cout << "training f..." << std::endl;
    cg::Dataset fdata = data;
    const cg::Network f =
        cg::train(cg::make_mlp(2, p.hidden, p.depth, 1, cg::Activation::Tanh, p.seed), fdata,
                  tcfg)
            .net;
    cg::save_network(f, dir / "f.json");

    std::vector<cg::Network> g_models;
    for (std::size_t ci = 0; ci < 2; ++ci) {
        std::cout << "training g" << ci << "..." << std::endl;
        cg::Dataset cdata = data;
        cdata.targets = cg::Matrix(data.size(), 1);
        for (std::size_t i = 0; i < data.size(); ++i)
            cdata.targets(i, 0) = data.concepts(i, ci);
        cg::TrainConfig gcfg = tcfg;
        gcfg.seed = p.seed + 100 + ci;
        g_models.push_back(
            cg::train(cg::make_mlp(2, p.hidden, p.depth, 1, cg::Activation::Tanh, gcfg.seed),
                      cdata, gcfg)
                .net);
        cg::save_network(g_models[ci], dir / ("g" + std::to_string(ci) + ".json"));
    }

    // CAV probes for both concepts at the first three hidden activations;
    // the last hidden layer is excluded since the head is linear and the
    // sensitivity would degenerate to a constant there.
    std::vector<std::size_t> probe_layers;
    for (std::size_t i = 0; i + 1 < p.depth && i < 3; ++i) probe_layers.push_back(2 * (i + 1));
    if (probe_layers.empty()) probe_layers.push_back(2);
    std::vector<std::vector<cg::CavProbe>> probes(probe_layers.size());
    const auto train_rows = data.indices_of(cg::Split::train);
    cg::Dataset train_split = data.subset(train_rows);
    for (std::size_t li = 0; li < probe_layers.size(); ++li) {
        const cg::Matrix acts =
            cg::activations_at_layer(f, train_split.inputs, cg::LayerId{probe_layers[li]});
        for (std::size_t ci = 0; ci < 2; ++ci) {
            std::vector<int> labels(train_split.size());
            for (std::size_t i = 0; i < train_split.size(); ++i)
                labels[i] = train_split.concepts(i, ci) > 0.0 ? 1 : 0;
            cg::TrainConfig pcfg = tcfg;
            pcfg.epochs = p.probe_epochs;
            pcfg.seed = p.seed + 200 + li * 2 + ci;
            pcfg.weight_decay = 1e-4;
            probes[li].push_back(
                cg::fit_cav(acts, labels, cg::LayerId{probe_layers[li]}, pcfg));
            cg::save_cav_probe(probes[li][ci],
                               dir / ("cav_h" + std::to_string(li + 1) + "_c" +
                                      std::to_string(ci) + ".json"));
        }
    }

    // Relevance on the validation split: CG via the single-concept formula
    // at the input layer, CAV sensitivity at each probe layer.
    const auto val_rows = data.indices_of(cg::Split::val);
    std::vector<std::vector<double>> cg_pred;
    std::vector<std::vector<std::vector<double>>> cav_pred(probe_layers.size());
    for (std::size_t r : val_rows) {
        const auto x = data.inputs.row(r);
        const cg::Matrix grad_f0 = cg::jacobian_at_layer(f, x, cg::LayerId{0});
        std::vector<double> rel(2);
        for (std::size_t ci = 0; ci < 2; ++ci) {
            const cg::Matrix grad_g = cg::jacobian_at_layer(g_models[ci], x, cg::LayerId{0});
            rel[ci] = cg::cg_individual(grad_g.col(0), grad_f0, cg::Normalization::pinv)[0];
        }
        cg_pred.push_back(std::move(rel));

        for (std::size_t li = 0; li < probe_layers.size(); ++li) {
            const cg::Matrix grad_fl =
                cg::jacobian_at_layer(f, x, cg::LayerId{probe_layers[li]});
            std::vector<double> s(2);
            for (std::size_t ci = 0; ci < 2; ++ci)
                s[ci] = cg::cav_sensitivity(probes[li][ci].v, grad_fl)[0];
            cav_pred[li].push_back(std::move(s));
        }
    }

    const std::vector<double> truth{spec.alpha0, spec.alpha1};
    cg::GradientMseReport mse;
    mse.per_method["cg"] = cg::gradient_mse(cg_pred, truth);
    for (std::size_t li = 0; li < probe_layers.size(); ++li)
        mse.per_method["cav_h" + std::to_string(li + 1)] = cg::gradient_mse(cav_pred[li], truth);
    write_text(dir / "gradient_mse.json", cg::to_json_string(mse) + "\n");

    std::string mse_csv = "method,mse\n";
    std::string mse_table = "method     mse\n";
    for (const auto& [label, value] : mse.per_method) {
        mse_csv += label + "," + cg::format_double(value) + "\n";
        std::string row = label;
        row.resize(11, ' ');
        mse_table += row + cg::format_double(value) + "\n";
    }
    write_text(dir / "gradient_mse.csv", mse_csv);
    write_text(dir / "gradient_mse.txt", mse_table);

    // Concept prediction curves over the domain, one input varying and the
    // other fixed at zero; CAV prediction is the probe's linear read-out.
    for (std::size_t ci = 0; ci < 2; ++ci) {
        const double kci = ci == 0 ? spec.k0 : spec.k1;
        std::string csv = "x,truth,cg";
        for (std::size_t li = 0; li < probe_layers.size(); ++li)
            csv += ",cav_h" + std::to_string(li + 1);
        csv += "\n";
        const std::size_t grid = 201;
        for (std::size_t gi = 0; gi < grid; ++gi) {
            const double x = spec.domain_lo +
                             (spec.domain_hi - spec.domain_lo) * double(gi) / double(grid - 1);
            std::vector<double> input{0.0, 0.0};
            input[ci] = x;
            csv += cg::format_double(x) + "," + cg::format_double(std::sin(kci * x));
            csv += "," + cg::format_double(cg::forward(g_models[ci], input).back()[0]);
            for (std::size_t li = 0; li < probe_layers.size(); ++li) {
                const auto acts = cg::forward(f, input);
                const auto& a = acts[probe_layers[li]];
                double z = probes[li][ci].bias;
                for (std::size_t j = 0; j < a.size(); ++j) z += probes[li][ci].v[j] * a[j];
                csv += "," + cg::format_double(z);
            }
            csv += "\n";
        }
        write_text(dir / ("concept_curve_c" + std::to_string(ci) + ".csv"), csv);
    }

    write_snapshot(dir, "reproduce_synthetic",
                   json{{"seed", p.seed},
                        {"out", p.out},
                        {"n", p.n},
                        {"hidden", p.hidden},
                        {"depth", p.depth},
                        {"epochs", p.epochs},
                        {"batch", p.batch},
                        {"lr", p.lr},
                        {"probe-epochs", p.probe_epochs}});

    std::cout << mse_table;
    const double cg_mse = mse.per_method.at("cg");
    double best_cav = std::numeric_limits<double>::infinity();
    for (const auto& [label, value] : mse.per_method)
        if (label != "cg") best_cav = std::min(best_cav, value);
    std::cout << (cg_mse < best_cav ? "cg beats every cav probe\n"
                                    : "warning: cg did not beat the best cav probe\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"concept gradient attribution toolkit"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON file with parameter defaults");

    try {
        load_file_config(argc, argv);
    } catch (const cg::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    }

    // datagen
    auto* datagen = app.add_subcommand("datagen", "generate datasets");
    datagen->require_subcommand(1);

    cg::SineSpec sine_spec;
    std::string sine_out = "data";
    auto* dg_sine = datagen->add_subcommand("sine", "sine concept regression dataset");
    from_config("n", sine_spec.n);
    from_config("seed", sine_spec.seed);
    from_config("out", sine_out);
    dg_sine->add_option("--n", sine_spec.n, "sample count");
    dg_sine->add_option("--seed", sine_spec.seed, "random seed");
    dg_sine->add_option("--k0", sine_spec.k0, "concept 0 frequency");
    dg_sine->add_option("--k1", sine_spec.k1, "concept 1 frequency");
    dg_sine->add_option("--alpha0", sine_spec.alpha0, "concept 0 coefficient");
    dg_sine->add_option("--alpha1", sine_spec.alpha1, "concept 1 coefficient");
    dg_sine->add_option("--lo", sine_spec.domain_lo, "domain lower bound");
    dg_sine->add_option("--hi", sine_spec.domain_hi, "domain upper bound");
    dg_sine->add_option("--out", sine_out, "output directory");

    std::size_t ml_n = 5000, ml_m = 16, ml_d = 32;
    std::uint64_t ml_seed = 0;
    std::string ml_out = "data";
    auto* dg_ml = datagen->add_subcommand("multilabel", "multilabel concept benchmark");
    from_config("m", ml_m);
    from_config("d", ml_d);
    dg_ml->add_option("--n", ml_n, "sample count");
    dg_ml->add_option("--m", ml_m, "concept count");
    dg_ml->add_option("--d", ml_d, "input dimension");
    dg_ml->add_option("--seed", ml_seed, "random seed");
    dg_ml->add_option("--out", ml_out, "output directory");

    // fixture
    std::string fixture_kind = "scaling", fixture_out = "fixture";
    auto* fixture = app.add_subcommand("fixture", "write worked-example networks and points");
    fixture->add_option("--kind", fixture_kind, "scaling or joint");
    fixture->add_option("--out", fixture_out, "output directory");

    // train
    std::string train_data, train_out = "f.json", train_activation = "tanh";
    std::size_t train_hidden = 64, train_depth = 4;
    TrainFlags train_flags;
    auto* train_cmd = app.add_subcommand("train", "train a model on the dataset targets");
    from_config("data", train_data);
    from_config("out", train_out);
    from_config("hidden", train_hidden);
    from_config("depth", train_depth);
    from_config("activation", train_activation);
    train_cmd->add_option("--data", train_data, "dataset csv")->required();
    train_cmd->add_option("--out", train_out, "output model json");
    train_cmd->add_option("--hidden", train_hidden, "hidden width");
    train_cmd->add_option("--depth", train_depth, "hidden layer count");
    train_cmd->add_option("--activation", train_activation, "hidden activation");
    add_train_options(train_cmd, train_flags);

    // finetune-concept
    std::string ft_model, ft_data, ft_out = "g.json";
    std::size_t ft_unfreeze = 0;
    TrainFlags ft_flags;
    auto* ft_cmd =
        app.add_subcommand("finetune-concept", "finetune a concept model from a target model");
    ft_cmd->add_option("--model", ft_model, "target model json")->required();
    ft_cmd->add_option("--data", ft_data, "dataset csv")->required();
    ft_cmd->add_option("--unfreeze-from", ft_unfreeze, "first trainable layer index");
    ft_cmd->add_option("--out", ft_out, "output model json");
    add_train_options(ft_cmd, ft_flags);

    // select-layer
    std::string sl_model, sl_data, sl_out = "layer_selection.json";
    double sl_eps = 0.005;
    TrainFlags sl_flags;
    auto* sl_cmd = app.add_subcommand("select-layer", "layer selection by accuracy saturation");
    sl_cmd->add_option("--model", sl_model, "target model json")->required();
    sl_cmd->add_option("--data", sl_data, "dataset csv")->required();
    sl_cmd->add_option("--eps", sl_eps, "plateau epsilon");
    sl_cmd->add_option("--out", sl_out, "output report json");
    add_train_options(sl_cmd, sl_flags);

    // attribute
    std::string at_model, at_g, at_data, at_method = "cg_individual", at_norm = "pinv";
    std::string at_split = "all", at_out = "attributions.csv", at_json;
    std::size_t at_layer = 0, at_threshold = 0;
    std::int64_t at_target = -1;
    auto* at_cmd = app.add_subcommand("attribute", "per-instance concept relevance");
    from_config("method", at_method);
    from_config("norm", at_norm);
    from_config("layer", at_layer);
    from_config("split", at_split);
    at_cmd->add_option("--model", at_model, "target model json")->required();
    at_cmd->add_option("--concept-model", at_g, "concept model json")->required();
    at_cmd->add_option("--data", at_data, "dataset csv")->required();
    at_cmd->add_option("--method", at_method, "cg_individual, cg_joint, or cav");
    at_cmd->add_option("--norm", at_norm, "pinv, normed, cosine, or raw");
    at_cmd->add_option("--layer", at_layer, "attribution layer index");
    at_cmd->add_option("--target-output", at_target, "output column (-1 = per-instance default)");
    at_cmd->add_option("--split", at_split, "train, val, test, or all");
    at_cmd->add_option("--out", at_out, "output csv");
    at_cmd->add_option("--json", at_json, "optional output json");
    at_cmd->add_option("--degenerate-threshold", at_threshold,
                       "max tolerated degenerate instances");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "metrics over attribution results");
    eval_cmd->require_subcommand(1);

    std::string er_attr, er_data, er_k = "30,40,50", er_out = "recall.json";
    std::int64_t er_target = -1;
    auto* er_cmd = eval_cmd->add_subcommand("recall", "recall@k against positive concepts");
    er_cmd->add_option("--attributions", er_attr, "attribution csv")->required();
    er_cmd->add_option("--data", er_data, "dataset csv")->required();
    er_cmd->add_option("--k", er_k, "comma-separated k values");
    er_cmd->add_option("--target-output", er_target, "output column (-1 = true class)");
    er_cmd->add_option("--out", er_out, "output json");

    std::string em_attr, em_truth, em_out = "mse.json";
    std::size_t em_column = 0;
    auto* em_cmd = eval_cmd->add_subcommand("mse", "gradient mse against a truth vector");
    em_cmd->add_option("--attributions", em_attr, "attribution csv")->required();
    em_cmd->add_option("--truth", em_truth, "comma-separated truth relevance")->required();
    em_cmd->add_option("--column", em_column, "relevance column to compare");
    em_cmd->add_option("--out", em_out, "output json");

    // reproduce-synthetic
    ReproduceParams rp;
    auto* rs_cmd = app.add_subcommand("reproduce-synthetic",
                                      "end-to-end sine experiment with mse comparison");
    from_config("n", rp.n);
    from_config("epochs", rp.epochs);
    rs_cmd->add_option("--seed", rp.seed, "random seed");
    rs_cmd->add_option("--out", rp.out, "output directory");
    rs_cmd->add_option("--n", rp.n, "dataset size");
    rs_cmd->add_option("--hidden", rp.hidden, "hidden width");
    rs_cmd->add_option("--depth", rp.depth, "hidden layer count");
    rs_cmd->add_option("--epochs", rp.epochs, "training epochs");
    rs_cmd->add_option("--batch", rp.batch, "minibatch size");
    rs_cmd->add_option("--lr", rp.lr, "learning rate");
    rs_cmd->add_option("--probe-epochs", rp.probe_epochs, "cav probe training epochs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInputError;
    }

    try {
        if (dg_sine->parsed()) return cmd_datagen_sine(sine_spec, sine_out);
        if (dg_ml->parsed()) return cmd_datagen_multilabel(ml_n, ml_m, ml_d, ml_seed, ml_out);
        if (fixture->parsed()) return cmd_fixture(fixture_kind, fixture_out);
        if (train_cmd->parsed())
            return cmd_train(train_data, train_out, train_hidden, train_depth, train_activation,
                             train_flags);
        if (ft_cmd->parsed())
            return cmd_finetune_concept(ft_model, ft_data, ft_unfreeze, ft_out, ft_flags);
        if (sl_cmd->parsed()) return cmd_select_layer(sl_model, sl_data, sl_eps, sl_out, sl_flags);
        if (at_cmd->parsed())
            return cmd_attribute(at_model, at_g, at_data, at_method, at_norm, at_layer,
                                 at_target >= 0 ? std::optional<std::size_t>(at_target)
                                                : std::nullopt,
                                 at_split, at_out, at_json, at_threshold);
        if (er_cmd->parsed())
            return cmd_eval_recall(er_attr, er_data, er_k,
                                   er_target >= 0 ? std::optional<std::size_t>(er_target)
                                                  : std::nullopt,
                                   er_out);
        if (em_cmd->parsed()) return cmd_eval_mse(em_attr, em_truth, em_column, em_out);
        if (rs_cmd->parsed()) return cmd_reproduce_synthetic(rp);
    } catch (const cg::TrainingDiverged& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const cg::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    }
    return 0;
}
