#include "cg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "cg/errors.hpp"

namespace cg {

Dataset gen_sine_dataset(const SineSpec& spec) {
    if (spec.n < 1) throw InvalidInput("gen_sine_dataset: n must be at least 1");
    if (!(spec.domain_lo < spec.domain_hi)) throw InvalidInput("gen_sine_dataset: empty domain");

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> dist(spec.domain_lo, spec.domain_hi);

    Dataset out;
    out.inputs = Matrix(spec.n, 2);
    out.concepts = Matrix(spec.n, 2);
    out.targets = Matrix(spec.n, 1);
    out.concept_names = {"c0", "c1"};
    out.target_names = {"y"};
    out.split.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const double x0 = dist(rng);
        const double x1 = dist(rng);
        const double c0 = std::sin(spec.k0 * x0);
        const double c1 = std::sin(spec.k1 * x1);
        out.inputs(i, 0) = x0;
        out.inputs(i, 1) = x1;
        out.concepts(i, 0) = c0;
        out.concepts(i, 1) = c1;
        out.targets(i, 0) = spec.alpha0 * c0 + spec.alpha1 * c1;
        out.split.push_back(i % 5 == 4 ? Split::val : Split::train);
    }
    return out;
}

SineNetworks analytic_sine_networks(const SineSpec& spec) {
    auto linear = [](Matrix w) {
        std::vector<double> bias(w.rows(), 0.0);
        return Layer{LinearLayer{std::move(w), std::move(bias)}, false};
    };

    SineNetworks out;
    out.g0 = Network(2, {linear(Matrix{{spec.k0, 0.0}}), Layer{Activation::Sin, false}});
    out.g1 = Network(2, {linear(Matrix{{0.0, spec.k1}}), Layer{Activation::Sin, false}});
    out.f_true = Network(2, {linear(Matrix{{spec.k0, 0.0}, {0.0, spec.k1}}),
                             Layer{Activation::Sin, false},
                             linear(Matrix{{spec.alpha0, spec.alpha1}})});
    return out;
}

ScalingFixture build_scaling_fixture() {
    auto linear = [](Matrix w) {
        std::vector<double> bias(w.rows(), 0.0);
        return Layer{LinearLayer{std::move(w), std::move(bias)}, false};
    };

    const Layer first = linear(Matrix{{0.01, 0.0}, {0.0, 1.0}});
    const Layer second = linear(Matrix{{100.0, 0.0}, {0.0, 1.0}});

    ScalingFixture out;
    out.f = Network(2, {first, second, linear(Matrix{{0.1, 1.0}})});
    out.concepts.push_back(Network(2, {first, second, linear(Matrix{{1.0, 0.0}})}));
    out.concepts.push_back(Network(2, {first, second, linear(Matrix{{0.0, 1.0}})}));
    return out;
}

JointFixture build_joint_fixture() {
    auto linear = [](Matrix w) {
        std::vector<double> bias(w.rows(), 0.0);
        return Layer{LinearLayer{std::move(w), std::move(bias)}, false};
    };

    JointFixture out;
    out.f = Network(2, {linear(Matrix{{1.0, 1.0}})});
    out.g = Network(2, {linear(Matrix{{1.0, 0.0}, {1.0, 0.1}})});
    return out;
}

namespace {

struct ConceptBlock {
    std::size_t begin, end;  // owned input dims [begin, end)
    bool product_rule;       // sign product on the first two dims, else |x| - 1/2
};

ConceptBlock concept_block(std::size_t i, std::size_t m, std::size_t d) {
    ConceptBlock blk;
    blk.begin = i * d / m;
    blk.end = (i + 1) * d / m;
    blk.product_rule = blk.end - blk.begin >= 2;
    return blk;
}

double rule_score(const ConceptBlock& blk, const double* x) {
    if (blk.product_rule) return x[blk.begin] * x[blk.begin + 1];
    return std::abs(x[blk.begin]) - 0.5;
}

double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

// Concept scores stay inside +-[kScoreLo, kScoreHi]: away from the label
// boundary so labels are stable, and spanning the softplus ramp so the
// class-score slopes are identifiable from the data.
constexpr double kScoreLo = 0.05;
constexpr double kScoreHi = 0.9;

// Fixed per-class concept subsets of size floor(m/2), every concept covered.
std::vector<std::vector<std::size_t>> make_class_subsets(std::size_t m, std::size_t n_classes,
                                                         std::mt19937_64& rng) {
    const std::size_t size = std::max<std::size_t>(2, m / 2);
    const int max_tries = 20000;
    for (int attempt = 0; attempt < max_tries; ++attempt) {
        std::vector<std::vector<std::size_t>> subsets;
        std::vector<bool> covered(m, false);
        bool ok = true;
        for (std::size_t k = 0; k < n_classes && ok; ++k) {
            std::vector<std::size_t> pool(m);
            std::iota(pool.begin(), pool.end(), 0);
            std::shuffle(pool.begin(), pool.end(), rng);
            std::vector<std::size_t> cand(pool.begin(), pool.begin() + size);
            std::sort(cand.begin(), cand.end());
            for (const auto& prev : subsets)
                if (cand == prev) ok = false;
            if (ok) {
                for (std::size_t c : cand) covered[c] = true;
                subsets.push_back(std::move(cand));
            }
        }
        if (ok)
            for (bool c : covered) ok = ok && c;
        if (ok) return subsets;
    }
    throw InvalidInput("gen_multilabel_benchmark: could not construct class subsets");
}

}  // namespace

MultilabelDesign multilabel_design(std::size_t m, std::size_t d, std::uint64_t seed) {
    if (m < 4) throw InvalidInput("multilabel benchmark needs at least 4 concepts");
    if (d < m) throw InvalidInput("multilabel benchmark needs at least one dim per concept");
    MultilabelDesign design;
    design.m = m;
    design.d = d;
    const std::size_t n_classes = std::max<std::size_t>(2, std::min<std::size_t>(6, m / 2 - 1));
    // Dedicated stream so the design is reproducible independently of rows.
    std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ull);
    design.class_subsets = make_class_subsets(m, n_classes, rng);
    return design;
}

double multilabel_concept_score(std::size_t i, std::size_t m, std::size_t d,
                                std::span<const double> x) {
    if (i >= m || x.size() != d) throw InvalidInput("multilabel_concept_score: bad arguments");
    return rule_score(concept_block(i, m, d), x.data());
}

bool multilabel_concept_rule(std::size_t i, std::size_t m, std::size_t d,
                             std::span<const double> x) {
    return multilabel_concept_score(i, m, d, x) > 0.0;
}

std::vector<double> multilabel_class_scores(const MultilabelDesign& design,
                                            std::span<const double> x) {
    std::vector<double> scores(design.class_subsets.size(), 0.0);
    for (std::size_t k = 0; k < scores.size(); ++k)
        for (std::size_t i : design.class_subsets[k])
            scores[k] +=
                softplus(design.beta * (multilabel_concept_score(i, design.m, design.d, x) -
                                        design.tau)) /
                design.beta;
    return scores;
}

Dataset gen_multilabel_benchmark(std::size_t n, std::size_t m, std::size_t d,
                                 std::uint64_t seed) {
    const MultilabelDesign design = multilabel_design(m, d, seed);
    const std::size_t n_classes = design.class_subsets.size();

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    std::vector<ConceptBlock> blocks(m);
    for (std::size_t i = 0; i < m; ++i) blocks[i] = concept_block(i, m, d);

    // Positive counts span [ceil(m/4), 3m/8]: within the documented
    // [m/4, m/2] bound, and below the subset size so the positive set varies
    // inside its class subset.
    const std::size_t lo = (m + 3) / 4;
    const std::size_t hi = std::max(lo, (3 * m) / 8);

    Dataset out;
    out.inputs = Matrix(n, d);
    out.concepts = Matrix(n, m);
    out.targets = Matrix(n, n_classes);
    for (std::size_t j = 0; j < m; ++j) out.concept_names.push_back("c" + std::to_string(j));
    for (std::size_t j = 0; j < n_classes; ++j)
        out.target_names.push_back("class" + std::to_string(j));
    out.split.reserve(n);

    std::uniform_int_distribution<std::size_t> class_dist(0, n_classes - 1);
    std::uniform_int_distribution<std::size_t> count_dist(lo, hi);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t cls = class_dist(rng);
        const auto& subset = design.class_subsets[cls];
        double* x = out.inputs.data().data() + i * d;

        for (int attempt = 0;; ++attempt) {
            if (attempt > 200)
                throw InvalidInput("gen_multilabel_benchmark: instance sampling stalled");

            // Positive concepts: a random subset of the class's defining set.
            std::vector<std::size_t> pool = subset;
            std::shuffle(pool.begin(), pool.end(), rng);
            const std::size_t u = std::min(count_dist(rng), pool.size());
            std::set<std::size_t> positives(pool.begin(), pool.begin() + u);

            for (std::size_t c = 0; c < m; ++c) {
                const ConceptBlock& blk = blocks[c];
                const bool want = positives.count(c) > 0;
                // Rejection-sample the block into the score window.
                while (true) {
                    for (std::size_t j = blk.begin; j < blk.end; ++j) x[j] = unit(rng);
                    const double score = rule_score(blk, x);
                    const double mag = std::abs(score);
                    if (mag < kScoreLo || mag > kScoreHi) continue;
                    if ((score > 0.0) == want) break;
                }
                out.concepts(i, c) = want ? 1.0 : 0.0;
            }

            // The argmax class must be the sampled one with a clear margin.
            const auto scores = multilabel_class_scores(design, std::span(x, d));
            double best_other = -1.0;
            for (std::size_t k = 0; k < scores.size(); ++k)
                if (k != cls) best_other = std::max(best_other, scores[k]);
            if (scores[cls] > best_other + 0.1) {
                for (std::size_t k = 0; k < scores.size(); ++k) out.targets(i, k) = scores[k];
                break;
            }
        }

        const std::size_t phase = i % 10;
        out.split.push_back(phase == 8 ? Split::val : phase == 9 ? Split::test : Split::train);
    }
    return out;
}

}  // namespace cg
