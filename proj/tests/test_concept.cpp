#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cg/concept_model.hpp"
#include "cg/errors.hpp"
#include "cg/synthetic.hpp"
#include "cg/train.hpp"
#include "helpers.hpp"

using namespace cg;

namespace {

TrainConfig probe_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.optimizer = Optimizer::adam;
    cfg.learning_rate = 0.05;
    cfg.epochs = 120;
    cfg.batch_size = 32;
    cfg.weight_decay = 1e-4;
    cfg.seed = seed;
    return cfg;
}

// Two tight clusters separated along e1.
void make_clusters(Matrix& acts, std::vector<int>& labels, std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, 0.2);
    acts = Matrix(n, 2);
    labels.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = int(i % 2);
        acts(i, 0) = (label ? 1.0 : -1.0) + noise(rng);
        acts(i, 1) = noise(rng);
        labels[i] = label;
    }
}

// Four XOR clusters at the corners of [-1, 1]^2; positive iff signs agree.
void make_xor(Matrix& acts, std::vector<int>& labels, std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, 0.3);
    acts = Matrix(n, 2);
    labels.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double sx = (i & 1) ? 1.0 : -1.0;
        const double sy = (i & 2) ? 1.0 : -1.0;
        acts(i, 0) = sx + noise(rng);
        acts(i, 1) = sy + noise(rng);
        labels[i] = sx * sy > 0.0 ? 1 : 0;
    }
}

// Best linear separator over a dense sweep of directions and every
// threshold; independent of the probe-fitting path.
double best_linear_accuracy(const Matrix& acts, const std::vector<int>& labels) {
    const std::size_t n = acts.rows();
    double best = 0.0;
    for (int step = 0; step < 720; ++step) {
        const double theta = M_PI * double(step) / 720.0;
        std::vector<std::pair<double, int>> projected(n);
        for (std::size_t i = 0; i < n; ++i)
            projected[i] = {std::cos(theta) * acts(i, 0) + std::sin(theta) * acts(i, 1),
                            labels[i]};
        std::sort(projected.begin(), projected.end());
        // Prefix sums give the accuracy of every threshold in one pass.
        std::size_t positives = 0;
        for (const auto& [proj, label] : projected) positives += std::size_t(label);
        std::size_t pos_below = 0;
        for (std::size_t cut = 0; cut <= n; ++cut) {
            const std::size_t above_pos = positives - pos_below;
            const std::size_t below_neg = cut - pos_below;
            const double acc_up = double(above_pos + below_neg) / double(n);
            best = std::max({best, acc_up, 1.0 - acc_up});
            if (cut < n) pos_below += std::size_t(projected[cut].second);
        }
    }
    return best;
}

}  // namespace

TEST_CASE("fit_cav separates linear clusters perfectly") {
    std::mt19937_64 rng(81);
    Matrix acts;
    std::vector<int> labels;
    make_clusters(acts, labels, 200, rng);
    const CavProbe probe = fit_cav(acts, labels, LayerId{0}, probe_config(1));
    CHECK(probe.val_accuracy == 1.0);
    CHECK(probe.v[0] > 0.0);  // points toward the positive cluster
    CHECK(norm(probe.v) > 0.0);
}

TEST_CASE("fit_cav cannot separate the XOR layout") {
    std::mt19937_64 rng(82);
    Matrix acts;
    std::vector<int> labels;
    make_xor(acts, labels, 400, rng);

    // Oracle: no linear separator beats chance by much on this layout.
    CHECK(best_linear_accuracy(acts, labels) < 0.78);

    TrainConfig cfg = probe_config(5);
    cfg.epochs = 150;
    cfg.batch_size = 64;
    cfg.weight_decay = 1e-3;
    const CavProbe probe = fit_cav(acts, labels, LayerId{0}, cfg);
    CHECK(probe.val_accuracy > 0.4);
    CHECK(probe.val_accuracy < 0.6);
}

TEST_CASE("fit_cav rejects single-class labels") {
    Matrix acts(4, 2);
    CHECK_THROWS_AS(fit_cav(acts, {1, 1, 1, 1}, LayerId{0}, probe_config(3)), DegenerateLabels);
    CHECK_THROWS_AS(fit_cav(acts, {0, 0, 0, 0}, LayerId{0}, probe_config(3)), DegenerateLabels);
    CHECK_THROWS_AS(fit_cav(Matrix(1, 2), {1}, LayerId{0}, probe_config(3)), InvalidInput);
    CHECK_THROWS_AS(fit_cav(acts, {1, 0}, LayerId{0}, probe_config(3)), InvalidInput);
}

TEST_CASE("fit_cav recovers a known generating direction") {
    std::mt19937_64 rng(83);
    std::uniform_real_distribution<double> dist(-1, 1);
    const std::vector<double> w{0.6, -0.8};
    Matrix acts(400, 2);
    std::vector<int> labels(400);
    for (std::size_t i = 0; i < 400; ++i) {
        double a0, a1, margin;
        do {
            a0 = dist(rng);
            a1 = dist(rng);
            margin = w[0] * a0 + w[1] * a1;
        } while (std::abs(margin) < 0.1);
        acts(i, 0) = a0;
        acts(i, 1) = a1;
        labels[i] = margin > 0 ? 1 : 0;
    }
    TrainConfig cfg = probe_config(4);
    cfg.epochs = 300;
    const CavProbe probe = fit_cav(acts, labels, LayerId{0}, cfg);
    const double cosine = dot(probe.v, w) / (norm(probe.v) * norm(w));
    CHECK(cosine > 0.95);
}

TEST_CASE("probes_as_network exposes probe directions as gradients") {
    const Network f = make_mlp(3, 6, 2, 2, Activation::Tanh, 90);
    CavProbe p0, p1;
    p0.v = {1.0, 0.0, 0.0, 0.5, 0.0, 0.0};
    p0.layer = LayerId{2};
    p1.v = {0.0, -1.0, 0.0, 0.0, 0.25, 0.0};
    p1.layer = LayerId{2};
    const Network g = probes_as_network(f, {p0, p1});
    CHECK(g.output_dim() == 2);
    CHECK(prefixes_match(f, g, LayerId{2}));
    const Matrix grad = jacobian_at_layer(g, std::vector<double>{0.1, 0.2, 0.3}, LayerId{2});
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(grad(i, 0) == p0.v[i]);
        CHECK(grad(i, 1) == p1.v[i]);
    }
}

namespace {

// Binary concept linearly readable from the input; target is an independent
// scalar regression so f has no reason to destroy it.
Dataset linear_concept_dataset(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1, 1);
    Dataset d;
    d.inputs = Matrix(n, 2);
    d.concepts = Matrix(n, 1);
    d.targets = Matrix(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        double x0;
        do {
            x0 = dist(rng);
        } while (std::abs(x0) < 0.1);
        const double x1 = dist(rng);
        d.inputs(i, 0) = x0;
        d.inputs(i, 1) = x1;
        d.concepts(i, 0) = x0 > 0 ? 1.0 : 0.0;
        d.targets(i, 0) = 0.5 * x0 + 0.3 * x1;
    }
    d.split.assign(n, Split::train);
    for (std::size_t i = 0; i < n; i += 5) d.split[i] = Split::val;
    return d;
}

TrainConfig finetune_config(std::uint64_t seed, std::size_t epochs = 150) {
    TrainConfig cfg;
    cfg.optimizer = Optimizer::adam;
    cfg.learning_rate = 0.01;
    cfg.epochs = epochs;
    cfg.batch_size = 64;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("head-only finetuning matches a cav probe on linearly-encoded concepts") {
    const Dataset data = linear_concept_dataset(600, 91);
    Network f = make_mlp(2, 8, 2, 1, Activation::Tanh, 92);
    f = train(f, data, finetune_config(93, 80)).net;

    const LayerId head{f.layers().size() - 1};
    const FinetuneResult ft = finetune_concept_model(f, data, head, finetune_config(94));

    // Probe at the head's input layer on the same training rows.
    const auto train_rows = data.indices_of(Split::train);
    const Dataset train_split = data.subset(train_rows);
    const Matrix acts = activations_at_layer(f, train_split.inputs, head);
    std::vector<int> labels(train_split.size());
    for (std::size_t i = 0; i < train_split.size(); ++i)
        labels[i] = train_split.concepts(i, 0) > 0.5 ? 1 : 0;
    TrainConfig pcfg = probe_config(95);
    pcfg.epochs = 300;
    const CavProbe probe = fit_cav(acts, labels, head, pcfg);

    CHECK(std::abs(ft.val_concept_accuracy - probe.val_accuracy) < 0.05);
}

TEST_CASE("concepts equal to targets are learnable by the head alone") {
    // Binary target; concept column is the same bit.
    std::mt19937_64 rng(96);
    std::uniform_real_distribution<double> dist(-1, 1);
    Dataset d;
    const std::size_t n = 600;
    d.inputs = Matrix(n, 2);
    d.concepts = Matrix(n, 1);
    d.targets = Matrix(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        double margin;
        do {
            d.inputs(i, 0) = dist(rng);
            d.inputs(i, 1) = dist(rng);
            margin = d.inputs(i, 0) + 0.5 * d.inputs(i, 1);
        } while (std::abs(margin) < 0.1);
        d.concepts(i, 0) = margin > 0 ? 1.0 : 0.0;
        d.targets(i, 0) = d.concepts(i, 0);
    }
    d.split.assign(n, Split::train);
    for (std::size_t i = 0; i < n; i += 5) d.split[i] = Split::val;

    TrainConfig fcfg = finetune_config(97, 120);
    fcfg.loss = Loss::binary_cross_entropy;
    Network f = train(make_mlp(2, 8, 2, 1, Activation::Tanh, 98), d, fcfg).net;

    // f's own validation accuracy.
    const auto val_rows = d.indices_of(Split::val);
    const Dataset val = d.subset(val_rows);
    const Matrix pred = forward_batch(f, val.inputs);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < val.size(); ++i)
        correct += std::size_t((pred(i, 0) > 0.0) == (val.targets(i, 0) > 0.5));
    const double f_accuracy = double(correct) / double(val.size());

    const FinetuneResult ft =
        finetune_concept_model(f, d, LayerId{f.layers().size() - 1}, finetune_config(99));
    CHECK(ft.val_concept_accuracy >= f_accuracy - 0.02);
}

TEST_CASE("fully unfrozen finetuning fits the sine concept to small mse") {
    SineSpec spec;
    spec.n = 1500;
    spec.seed = 100;
    const Dataset data = gen_sine_dataset(spec);
    const Network f = make_mlp(2, 64, 4, 1, Activation::Tanh, 101);

    TrainConfig cfg = finetune_config(102, 150);
    cfg.learning_rate = 3e-3;
    cfg.batch_size = 128;
    const FinetuneResult ft = finetune_concept_model(f, data, LayerId{0}, cfg);

    const auto val_rows = data.indices_of(Split::val);
    const Dataset val = data.subset(val_rows);
    const Matrix pred = forward_batch(ft.g, val.inputs);
    double mse0 = 0.0;
    for (std::size_t i = 0; i < val.size(); ++i) {
        const double e = pred(i, 0) - val.concepts(i, 0);
        mse0 += e * e;
    }
    mse0 /= double(val.size());
    CHECK(mse0 < 1e-3);
    CHECK(ft.val_concept_accuracy > 0.99);  // R^2 for real-valued concepts
}

TEST_CASE("finetuning keeps the frozen prefix bit-identical") {
    const Dataset data = linear_concept_dataset(400, 103);
    const Network f = make_mlp(2, 6, 2, 1, Activation::Tanh, 104);
    const LayerId cut{2};
    const FinetuneResult ft = finetune_concept_model(f, data, cut, finetune_config(105, 60));

    for (std::size_t i = 0; i < cut.index; ++i) CHECK(ft.g.layers()[i].op == f.layers()[i].op);

    std::mt19937_64 rng(106);
    std::uniform_real_distribution<double> dist(-2, 2);
    for (int t = 0; t < 100; ++t) {
        const std::vector<double> x{dist(rng), dist(rng)};
        const auto fa = forward(f, x);
        const auto ga = forward(ft.g, x);
        for (std::size_t l = 0; l <= cut.index; ++l) CHECK(fa[l] == ga[l]);
    }
}

namespace {

// f whose layer-2 projection keeps only x0 + x1 while the concept is
// sign(x0 - x1); concept information dies at linear layer index 2.
Network bottleneck_network() {
    auto linear = [](Matrix w) {
        std::vector<double> b(w.rows(), 0.0);
        return Layer{LinearLayer{std::move(w), std::move(b)}, false};
    };
    return Network(2, {linear(Matrix::identity(2)),      // 0
                       Layer{Activation::Tanh, false},   // 1
                       linear(Matrix{{1.0, 1.0}}),       // 2  <- destroys x0 - x1
                       Layer{Activation::Tanh, false},   // 3
                       linear(Matrix{{0.5}, {-0.5}, {1.0}, {0.3}}),  // 4
                       Layer{Activation::Tanh, false},   // 5
                       linear(Matrix{{0.4, 0.2, -0.3, 0.1}})});      // 6
}

Dataset difference_concept_dataset(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1, 1);
    Dataset d;
    d.inputs = Matrix(n, 2);
    d.concepts = Matrix(n, 1);
    d.targets = Matrix(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        double diff;
        do {
            d.inputs(i, 0) = dist(rng);
            d.inputs(i, 1) = dist(rng);
            diff = d.inputs(i, 0) - d.inputs(i, 1);
        } while (std::abs(diff) < 0.15);
        d.concepts(i, 0) = diff > 0 ? 1.0 : 0.0;
        d.targets(i, 0) = d.inputs(i, 0) + d.inputs(i, 1);
    }
    d.split.assign(n, Split::train);
    for (std::size_t i = 0; i < n; i += 5) d.split[i] = Split::val;
    return d;
}

}  // namespace

TEST_CASE("select_layer finds the information bottleneck") {
    const Network f = bottleneck_network();
    const Dataset data = difference_concept_dataset(800, 107);

    TrainConfig cfg = finetune_config(108, 200);
    cfg.learning_rate = 0.02;
    cfg.weight_decay = 1e-3;  // keeps the no-information trials pinned at chance
    const LayerSelectionReport report = select_layer(f, data, 0.02, cfg);

    // Independent oracle: probe accuracy at each activation point confirms
    // where concept information dies.
    const auto train_rows = data.indices_of(Split::train);
    const Dataset train_split = data.subset(train_rows);
    std::vector<int> labels(train_split.size());
    for (std::size_t i = 0; i < train_split.size(); ++i)
        labels[i] = train_split.concepts(i, 0) > 0.5 ? 1 : 0;
    TrainConfig pcfg = probe_config(109);
    pcfg.epochs = 250;
    const double acc_before =
        fit_cav(activations_at_layer(f, train_split.inputs, LayerId{2}), labels, LayerId{2}, pcfg)
            .val_accuracy;
    const double acc_after =
        fit_cav(activations_at_layer(f, train_split.inputs, LayerId{3}), labels, LayerId{3}, pcfg)
            .val_accuracy;
    CHECK(acc_before > 0.9);  // information still present entering layer 2
    CHECK(acc_after < 0.65);  // gone after the 1-d projection

    CHECK(report.chosen.index <= 2);

    // Accuracy is non-decreasing toward the input within tolerance.
    for (std::size_t t = 1; t < report.trials.size(); ++t)
        CHECK(report.trials[t].val_concept_accuracy >=
              report.trials[t - 1].val_concept_accuracy - 0.02);

    // The chosen trial actually predicts the concept.
    for (const auto& t : report.trials)
        if (t.unfreeze_from.index == report.chosen.index)
            CHECK(t.val_concept_accuracy > 0.9);
}

TEST_CASE("select_layer keeps the last layer when every layer decodes the concept") {
    auto linear = [](Matrix w) {
        std::vector<double> b(w.rows(), 0.0);
        return Layer{LinearLayer{std::move(w), std::move(b)}, false};
    };
    // Sign-preserving layers: the concept stays linearly decodable everywhere.
    const Network f(2, {linear(Matrix::identity(2)), Layer{Activation::Tanh, false},
                        linear(Matrix::identity(2)), Layer{Activation::Tanh, false},
                        linear(Matrix{{1.0, -1.0}})});

    const Dataset data = linear_concept_dataset(600, 110);
    const LayerSelectionReport report = select_layer(f, data, 0.02, finetune_config(111, 150));
    CHECK(report.chosen.index == 4);  // the last linear layer
    CHECK(report.trials.front().unfreeze_from.index == 4);
}

TEST_CASE("select_layer on a single-hidden-layer network has at most two trials") {
    const Network f = make_mlp(2, 4, 1, 1, Activation::Tanh, 112);
    const Dataset data = linear_concept_dataset(300, 113);
    const LayerSelectionReport report = select_layer(f, data, 0.02, finetune_config(114, 60));
    CHECK(report.trials.size() <= 2);
    bool found = false;
    for (const auto& t : report.trials)
        if (t.unfreeze_from.index == report.chosen.index) found = true;
    CHECK(found);
}

TEST_CASE("layer selection report serializes to json") {
    LayerSelectionReport report;
    report.plateau_epsilon = 0.005;
    report.chosen = LayerId{2};
    report.trials = {{LayerId{4}, 0.5}, {LayerId{2}, 0.9}};
    const std::string text = to_json_string(report);
    CHECK(text.find("\"chosen\": 2") != std::string::npos);
    CHECK(text.find("\"unfreeze_from\": 4") != std::string::npos);
}

TEST_CASE("cav probe json round trip") {
    CavProbe p;
    p.v = {0.25, -1.5, 1.0 / 3.0};
    p.bias = 0.125;
    p.layer = LayerId{3};
    p.train_accuracy = 0.75;
    p.val_accuracy = 0.5;
    const CavProbe q = cav_probe_from_json(to_json_string(p));
    CHECK(q.v == p.v);
    CHECK(q.bias == p.bias);
    CHECK(q.layer.index == 3);
    CHECK_THROWS_AS(cav_probe_from_json("[]"), InvalidInput);
}
