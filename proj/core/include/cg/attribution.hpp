// Concept Gradient and CAV estimators: per-instance relevance matrices,
// normalization variants, batch drivers, and global aggregation.
//
// Relevance matrices are m x k: entry (i, j) is the attributed effect of
// concept i on output j.
#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cg/matrix.hpp"
#include "cg/network.hpp"

namespace cg {

enum class Method { cg_joint, cg_individual, cav };
enum class Normalization { pinv, normed, cosine, raw };

std::string to_string(Method m);
Method method_from_string(const std::string& s);
std::string to_string(Normalization n);
Normalization normalization_from_string(const std::string& s);

struct AttributionConfig {
    Method method = Method::cg_individual;
    // Applies to cg_individual and cav only; cg_joint ignores it (the
    // pseudo-inverse fixes the scaling).
    Normalization normalization = Normalization::pinv;
    LayerId layer{0};
    // Output column used downstream for ranking; empty means the instance's
    // true class when available, else the argmax output.
    std::optional<std::size_t> target_output;
};

struct AttributionResult {
    Matrix relevance;  // m x k
    std::size_t instance_id = 0;
    AttributionConfig config;
};

enum class AggregationMode { mean, mean_abs, positive_fraction };

std::string to_string(AggregationMode m);
AggregationMode aggregation_mode_from_string(const std::string& s);

struct GlobalRelevance {
    Matrix values;  // m x k
    AggregationMode mode = AggregationMode::mean;
};

// pinv(grad_g) * grad_f. grad_g is d x m, grad_f is d x k. A zero grad_g
// column contributes zero relevance through the pseudo-inverse convention.
Matrix cg_joint(const Matrix& grad_g, const Matrix& grad_f);

// Single-concept score grad_g_i^T grad_f scaled per the normalization:
//   pinv   divides by ||grad_g_i||^2
//   normed divides by ||grad_g_i||
//   cosine divides by ||grad_g_i|| * ||grad_f_j|| per output column
//   raw    leaves the inner product alone
// Throws DegenerateConceptGradient when ||grad_g_i|| == 0 under any
// normalization other than raw.
std::vector<double> cg_individual(std::span<const double> grad_g_i, const Matrix& grad_f,
                                  Normalization normalization);

// Conceptual sensitivity grad_f^T (v_c / ||v_c||). Throws
// DegenerateConceptVector on a zero vector.
std::vector<double> cav_sensitivity(std::span<const double> v_c, const Matrix& grad_f);

// Computes grad_f and grad_g at the shared activation cfg.layer and
// dispatches on cfg.method. Requires f and g to agree exactly on every layer
// before cfg.layer; throws IncompatibleModels otherwise.
AttributionResult attribute_instance(const Network& f, const Network& g,
                                     std::span<const double> x, const AttributionConfig& cfg);

struct BatchAttribution {
    std::vector<AttributionResult> results;
    // Instances whose concept gradient degenerated; their relevance is zero.
    std::size_t degenerate_count = 0;
};

// attribute_instance over the given rows of `inputs`, parallel across
// instances (the CG_THREADS environment variable caps the worker count).
// Degenerate instances are recorded, zeroed, and counted rather than thrown.
BatchAttribution attribute_batch(const Network& f, const Network& g, const Matrix& inputs,
                                 const std::vector<std::size_t>& rows,
                                 const AttributionConfig& cfg);

GlobalRelevance aggregate(const std::vector<AttributionResult>& results, AggregationMode mode);

// CSV columns: instance_id,concept_id,output_id,relevance.
void write_attributions_csv(const std::vector<AttributionResult>& results,
                            const std::filesystem::path& path);
std::vector<AttributionResult> read_attributions_csv(const std::filesystem::path& path);
void write_attributions_json(const std::vector<AttributionResult>& results,
                             const std::filesystem::path& path);

}  // namespace cg
