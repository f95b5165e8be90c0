#include "cg/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "cg/errors.hpp"

namespace cg {

std::string to_string(Optimizer o) {
    return o == Optimizer::sgd ? "sgd" : "adam";
}

Optimizer optimizer_from_string(const std::string& s) {
    if (s == "sgd") return Optimizer::sgd;
    if (s == "adam") return Optimizer::adam;
    throw InvalidInput("unknown optimizer '" + s + "'");
}

std::string to_string(Loss l) {
    switch (l) {
        case Loss::mse: return "mse";
        case Loss::binary_cross_entropy: return "bce";
        case Loss::cross_entropy: return "cross_entropy";
    }
    throw InvalidInput("unknown loss");
}

Loss loss_from_string(const std::string& s) {
    if (s == "mse") return Loss::mse;
    if (s == "bce" || s == "binary_cross_entropy") return Loss::binary_cross_entropy;
    if (s == "cross_entropy" || s == "ce") return Loss::cross_entropy;
    throw InvalidInput("unknown loss '" + s + "'");
}

namespace {

double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Loss value and gradient w.r.t. the network outputs, both averaged over
// batch rows and output columns (cross entropy averages over rows only).
double loss_and_grad(Loss loss, const Matrix& pred, const Matrix& target,
                     const std::vector<double>& pos_weight, Matrix& grad) {
    const std::size_t n = pred.rows(), k = pred.cols();
    grad = Matrix(n, k);
    double total = 0.0;
    switch (loss) {
        case Loss::mse: {
            const double inv = 1.0 / double(n * k);
            for (std::size_t i = 0; i < pred.size(); ++i) {
                const double e = pred.data()[i] - target.data()[i];
                total += e * e;
                grad.data()[i] = 2.0 * e * inv;
            }
            return total * inv;
        }
        case Loss::binary_cross_entropy: {
            const double inv = 1.0 / double(n * k);
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t j = 0; j < k; ++j) {
                    const double z = pred(r, j);
                    const double t = target(r, j);
                    const double w = pos_weight.empty() ? 1.0 : pos_weight[j];
                    total += w * t * softplus(-z) + (1.0 - t) * softplus(z);
                    grad(r, j) = (-w * t * sigmoid(-z) + (1.0 - t) * sigmoid(z)) * inv;
                }
            }
            return total * inv;
        }
        case Loss::cross_entropy: {
            const double inv = 1.0 / double(n);
            for (std::size_t r = 0; r < n; ++r) {
                double zmax = pred(r, 0);
                for (std::size_t j = 1; j < k; ++j) zmax = std::max(zmax, pred(r, j));
                double zsum = 0.0;
                for (std::size_t j = 0; j < k; ++j) zsum += std::exp(pred(r, j) - zmax);
                const double log_zsum = std::log(zsum) + zmax;
                for (std::size_t j = 0; j < k; ++j) {
                    const double t = target(r, j);
                    const double p = std::exp(pred(r, j) - log_zsum);
                    total += -t * (pred(r, j) - log_zsum);
                    grad(r, j) = (p - t) * inv;
                }
            }
            return total * inv;
        }
    }
    throw InvalidInput("unknown loss");
}

// Batched forward keeping every activation point for the backward sweep.
std::vector<Matrix> forward_cached(const Network& net, const Matrix& x) {
    std::vector<Matrix> acts;
    acts.reserve(net.num_layer_points());
    acts.push_back(x);
    for (const Layer& l : net.layers()) {
        const Matrix& a = acts.back();
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
            acts.push_back(std::move(next));
        } else {
            Matrix next = a;
            for (double& v : next.data()) v = apply_activation(l.activation(), v);
            acts.push_back(std::move(next));
        }
    }
    return acts;
}

struct ParamGrads {
    Matrix weights;
    std::vector<double> bias;
};

struct AdamState {
    Matrix mw, vw;
    std::vector<double> mb, vb;
};

Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx, std::size_t begin,
                   std::size_t end) {
    Matrix out(end - begin, src.cols());
    for (std::size_t r = begin; r < end; ++r)
        for (std::size_t j = 0; j < src.cols(); ++j) out(r - begin, j) = src(idx[r], j);
    return out;
}

}  // namespace

double evaluate_loss(const Network& net, const Matrix& inputs, const Matrix& targets, Loss loss) {
    Matrix pred = forward_batch(net, inputs);
    Matrix unused;
    return loss_and_grad(loss, pred, targets, {}, unused);
}

TrainResult train(const Network& net, const Dataset& data, const TrainConfig& cfg) {
    if (cfg.learning_rate < 0.0) throw InvalidConfig("learning rate must be nonnegative");
    if (cfg.epochs < 1) throw InvalidConfig("epochs must be at least 1");
    if (cfg.batch_size < 1) throw InvalidConfig("batch size must be at least 1");
    if (data.inputs.cols() != net.input_dim()) throw InvalidInput("train: input dim mismatch");
    if (data.targets.cols() != net.output_dim()) throw InvalidInput("train: target dim mismatch");

    std::size_t min_trainable = net.layers().size();
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        if (net.layers()[i].is_linear() && !net.layers()[i].frozen) {
            min_trainable = i;
            break;
        }
    }
    if (min_trainable == net.layers().size()) throw InvalidConfig("no trainable layer");

    std::vector<std::size_t> train_idx = data.indices_of(Split::train);
    if (train_idx.empty()) {
        train_idx.resize(data.size());
        std::iota(train_idx.begin(), train_idx.end(), 0);
    }
    const std::vector<std::size_t> val_idx = data.indices_of(Split::val);
    const bool early_stop = cfg.early_stop_patience > 0 && !val_idx.empty();

    // Per-column positive-class reweighting from the training rows.
    std::vector<double> pos_weight;
    if (cfg.loss == Loss::binary_cross_entropy) {
        pos_weight.assign(data.targets.cols(), 1.0);
        for (std::size_t j = 0; j < data.targets.cols(); ++j) {
            double pos = 0.0;
            for (std::size_t r : train_idx) pos += data.targets(r, j);
            const double neg = double(train_idx.size()) - pos;
            if (pos > 0.0 && neg > 0.0) pos_weight[j] = std::clamp(neg / pos, 1e-3, 1e3);
        }
    }

    Matrix val_x, val_t;
    if (early_stop) {
        val_x = gather_rows(data.inputs, val_idx, 0, val_idx.size());
        val_t = gather_rows(data.targets, val_idx, 0, val_idx.size());
    }

    TrainResult result{net, {}};
    Network& model = result.net;
    const std::size_t n_layers = model.layers().size();

    std::vector<AdamState> adam(n_layers);
    if (cfg.optimizer == Optimizer::adam) {
        for (std::size_t i = min_trainable; i < n_layers; ++i) {
            if (!model.layers()[i].is_linear() || model.layers()[i].frozen) continue;
            const LinearLayer& lin = model.layers()[i].linear();
            adam[i].mw = Matrix(lin.weights.rows(), lin.weights.cols());
            adam[i].vw = Matrix(lin.weights.rows(), lin.weights.cols());
            adam[i].mb.assign(lin.bias.size(), 0.0);
            adam[i].vb.assign(lin.bias.size(), 0.0);
        }
    }
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::uint64_t step = 0;

    std::mt19937_64 rng(cfg.seed);
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<Layer> best_layers;
    std::size_t epochs_since_best = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), rng);

        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, train_idx.size());
            Matrix bx = gather_rows(data.inputs, train_idx, start, end);
            Matrix bt = gather_rows(data.targets, train_idx, start, end);

            const std::vector<Matrix> acts = forward_cached(model, bx);
            Matrix delta;
            epoch_loss += loss_and_grad(cfg.loss, acts.back(), bt, pos_weight, delta);
            ++n_batches;

            // Reverse sweep; stops below the lowest trainable layer.
            for (std::size_t l = n_layers; l-- > min_trainable;) {
                Layer& layer = model.layers()[l];
                if (!layer.is_linear()) {
                    const Matrix& in = acts[l];
                    for (std::size_t i = 0; i < delta.size(); ++i)
                        delta.data()[i] *=
                            activation_derivative(layer.activation(), in.data()[i]);
                    continue;
                }
                LinearLayer& lin = layer.linear();
                const Matrix& in = acts[l];
                const std::size_t bs = delta.rows(), out_dim = delta.cols(), in_dim = in.cols();

                ParamGrads g;
                g.weights = Matrix(out_dim, in_dim);
                g.bias.assign(out_dim, 0.0);
                for (std::size_t r = 0; r < bs; ++r) {
                    const double* dr = delta.data().data() + r * out_dim;
                    const double* ir = in.data().data() + r * in_dim;
                    for (std::size_t o = 0; o < out_dim; ++o) {
                        const double dro = dr[o];
                        if (dro == 0.0) continue;
                        double* gw = g.weights.data().data() + o * in_dim;
                        for (std::size_t j = 0; j < in_dim; ++j) gw[j] += dro * ir[j];
                        g.bias[o] += dro;
                    }
                }

                if (l > min_trainable) {
                    Matrix prev(bs, in_dim);
                    for (std::size_t r = 0; r < bs; ++r) {
                        const double* dr = delta.data().data() + r * out_dim;
                        double* pr = prev.data().data() + r * in_dim;
                        for (std::size_t o = 0; o < out_dim; ++o) {
                            const double dro = dr[o];
                            if (dro == 0.0) continue;
                            const double* w = lin.weights.data().data() + o * in_dim;
                            for (std::size_t j = 0; j < in_dim; ++j) pr[j] += dro * w[j];
                        }
                    }
                    delta = std::move(prev);
                }

                if (layer.frozen) continue;

                if (cfg.weight_decay != 0.0)
                    for (std::size_t i = 0; i < g.weights.size(); ++i)
                        g.weights.data()[i] += cfg.weight_decay * lin.weights.data()[i];

                if (cfg.optimizer == Optimizer::sgd) {
                    for (std::size_t i = 0; i < lin.weights.size(); ++i)
                        lin.weights.data()[i] -= cfg.learning_rate * g.weights.data()[i];
                    for (std::size_t i = 0; i < lin.bias.size(); ++i)
                        lin.bias[i] -= cfg.learning_rate * g.bias[i];
                } else {
                    AdamState& st = adam[l];
                    const std::uint64_t t = step + 1;
                    const double bc1 = 1.0 - std::pow(beta1, double(t));
                    const double bc2 = 1.0 - std::pow(beta2, double(t));
                    for (std::size_t i = 0; i < lin.weights.size(); ++i) {
                        const double gi = g.weights.data()[i];
                        double& m = st.mw.data()[i];
                        double& v = st.vw.data()[i];
                        m = beta1 * m + (1.0 - beta1) * gi;
                        v = beta2 * v + (1.0 - beta2) * gi * gi;
                        lin.weights.data()[i] -=
                            cfg.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + adam_eps);
                    }
                    for (std::size_t i = 0; i < lin.bias.size(); ++i) {
                        const double gi = g.bias[i];
                        double& m = st.mb[i];
                        double& v = st.vb[i];
                        m = beta1 * m + (1.0 - beta1) * gi;
                        v = beta2 * v + (1.0 - beta2) * gi * gi;
                        lin.bias[i] -=
                            cfg.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + adam_eps);
                    }
                }
            }
            ++step;
        }

        epoch_loss /= double(std::max<std::size_t>(n_batches, 1));
        if (!std::isfinite(epoch_loss))
            throw TrainingDiverged("training loss became non-finite at epoch " +
                                   std::to_string(epoch));
        result.loss_history.push_back(epoch_loss);

        if (early_stop) {
            Matrix unused;
            Matrix val_pred = forward_batch(model, val_x);
            const double val_loss = loss_and_grad(cfg.loss, val_pred, val_t, pos_weight, unused);
            if (!std::isfinite(val_loss))
                throw TrainingDiverged("validation loss became non-finite");
            if (val_loss < best_val) {
                best_val = val_loss;
                best_layers = model.layers();
                epochs_since_best = 0;
            } else if (++epochs_since_best >= cfg.early_stop_patience) {
                break;
            }
        }
    }

    if (early_stop && !best_layers.empty()) model.layers() = std::move(best_layers);
    return result;
}

}  // namespace cg
