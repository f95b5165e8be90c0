// Generators for every dataset and fixture used at desk scale: the sine
// regression experiment, the diagonal-scaling counterexample, the
// joint-vs-individual example, and a multilabel concept benchmark.
#pragma once

#include <cstdint>

#include "cg/dataset.hpp"
#include "cg/network.hpp"

namespace cg {

struct SineSpec {
    double k0 = 0.5388;
    double k1 = 0.9198;
    double alpha0 = 0.3633;
    double alpha1 = 0.2271;
    double domain_lo = -1.65;
    double domain_hi = 1.65;
    std::size_t n = 2500;
    std::uint64_t seed = 0;
};

// Uniform samples of (x0, x1) with c0 = sin(k0 x0), c1 = sin(k1 x1) and
// y = alpha0 c0 + alpha1 c1 computed exactly; every fifth row is tagged val.
Dataset gen_sine_dataset(const SineSpec& spec);

// The same functions expressed exactly as sin-activation networks, so their
// Jacobians equal the closed-form derivatives.
struct SineNetworks {
    Network g0;      // x -> sin(k0 x0)
    Network g1;      // x -> sin(k1 x1)
    Network f_true;  // x -> alpha0 sin(k0 x0) + alpha1 sin(k1 x1)
};
SineNetworks analytic_sine_networks(const SineSpec& spec);

// Three-layer linear network y = 0.1 z0 + z1 with z = diag(100, 1) h and
// h = diag(0.01, 1) x, plus coordinate-projection concept networks
// c0 = x0 and c1 = x1 expressed on top of the shared prefix.
struct ScalingFixture {
    Network f;
    std::vector<Network> concepts;  // g0, g1; prefixes identical to f
};
ScalingFixture build_scaling_fixture();

// y = x0 + x1 with concepts c0 = x0 and c1 = x0 + 0.1 x1 as exact linear
// networks; cg_joint yields (-9, 10) while the individual scores stay near 1.
struct JointFixture {
    Network f;
    Network g;  // two outputs
};
JointFixture build_joint_fixture();

// Multilabel benchmark with known ground truth. Each concept is a nonlinear
// threshold rule on its own block of input dimensions (a sign product for
// blocks of two or more dims, |x| - 1/2 for single-dim blocks), so no linear
// probe can separate it. Each class owns a fixed defining concept subset of
// size floor(m/2); an instance of the class has a random subset of it
// positive, with the positive count in [ceil(m/4), floor(m/2)]. Targets are
// the smooth per-class scores sum_{i in subset} softplus(beta s_i) / beta,
// whose argmax is the instance's class: the class is determined by the
// concepts, and the score slope at each concept (sigmoid(beta s_i)) is high
// exactly for the instance's positive concepts, so faithful gradients
// retrieve them while any fixed per-class ranking cannot.
// Rows are split 80/10/10 train/val/test.
Dataset gen_multilabel_benchmark(std::size_t n, std::size_t m, std::size_t d, std::uint64_t seed);

// Deterministic derived quantities of the benchmark, exposed so stored rows
// can be re-derived from stored inputs.
struct MultilabelDesign {
    std::size_t m = 0;
    std::size_t d = 0;
    double beta = 4.0;
    double tau = 0.0;
    std::vector<std::vector<std::size_t>> class_subsets;
};
MultilabelDesign multilabel_design(std::size_t m, std::size_t d, std::uint64_t seed);

// Smooth per-concept score s_i; the stored label is 1[s_i > 0].
double multilabel_concept_score(std::size_t i, std::size_t m, std::size_t d,
                                std::span<const double> x);
bool multilabel_concept_rule(std::size_t i, std::size_t m, std::size_t d,
                             std::span<const double> x);

// The stored target row for an input under the given design.
std::vector<double> multilabel_class_scores(const MultilabelDesign& design,
                                            std::span<const double> x);

}  // namespace cg
