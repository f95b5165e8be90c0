// Metrics: recall@k for multilabel concept retrieval, gradient MSE against a
// known truth vector, and side-by-side method comparison tables.
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cg/attribution.hpp"
#include "cg/dataset.hpp"
#include "cg/network.hpp"

namespace cg {

struct RecallReport {
    std::map<std::size_t, double> per_k;  // k -> mean recall over instances
    std::size_t n_instances = 0;
    std::string method;
};

struct GradientMseReport {
    std::map<std::string, double> per_method;
};

// |top-k by importance intersected with positive_set| / |positive_set|.
// Ties break by ascending concept index, so the ranking is stable.
double recall_at_k(std::span<const double> importances, const std::set<std::size_t>& positive_set,
                   std::size_t k);

// Concept indices ordered by descending importance, index-ascending on ties.
std::vector<std::size_t> rank_concepts(std::span<const double> importances);

// Mean over instances and concepts of the squared error against a constant
// truth vector.
double gradient_mse(const std::vector<std::vector<double>>& predicted,
                    std::span<const double> truth);

// Column of the relevance matrix used for ranking: the explicit
// target_output when set, else the instance's true class (argmax target row),
// else the argmax output of f at the instance.
std::vector<double> ranking_importances(const AttributionResult& result, const Dataset& data,
                                        const Network& f);

struct MethodSpec {
    std::string label;
    Network g;  // concept model or probes_as_network(...)
    AttributionConfig config;
};

struct ComparisonResult {
    std::vector<RecallReport> recalls;  // one per method, same order
    GradientMseReport mse;              // filled when truth_relevance is given
    std::string table;                  // aligned text for terminal display
};

// Runs attribute_batch per method over the rows tagged eval_split (all rows
// when the tag is absent), computes recall@k against the dataset's binary
// concept labels, and the gradient MSE when a truth vector is supplied.
ComparisonResult compare_methods(const Dataset& data, const Network& f,
                                 const std::vector<MethodSpec>& methods,
                                 const std::vector<std::size_t>& ks,
                                 const std::optional<std::vector<double>>& truth_relevance,
                                 Split eval_split);

std::string to_json_string(const RecallReport& report);
std::string to_json_string(const GradientMseReport& report);
void write_recall_csv(const std::vector<RecallReport>& reports,
                      const std::filesystem::path& path);

}  // namespace cg
