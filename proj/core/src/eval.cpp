#include "cg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "cg/errors.hpp"

namespace cg {

std::vector<std::size_t> rank_concepts(std::span<const double> importances) {
    std::vector<std::size_t> order(importances.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return importances[a] > importances[b];
    });
    return order;
}

double recall_at_k(std::span<const double> importances, const std::set<std::size_t>& positive_set,
                   std::size_t k) {
    if (positive_set.empty()) throw InvalidInput("recall_at_k: empty positive set");
    if (k > importances.size()) throw InvalidInput("recall_at_k: k exceeds concept count");
    for (std::size_t p : positive_set)
        if (p >= importances.size()) throw InvalidInput("recall_at_k: positive id out of range");

    const std::vector<std::size_t> order = rank_concepts(importances);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += positive_set.count(order[i]);
    return double(hits) / double(positive_set.size());
}

double gradient_mse(const std::vector<std::vector<double>>& predicted,
                    std::span<const double> truth) {
    if (predicted.empty()) return 0.0;
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& p : predicted) {
        if (p.size() != truth.size()) throw InvalidInput("gradient_mse: shape mismatch");
        for (std::size_t j = 0; j < truth.size(); ++j) {
            const double e = p[j] - truth[j];
            total += e * e;
            ++count;
        }
    }
    return total / double(count);
}

std::vector<double> ranking_importances(const AttributionResult& result, const Dataset& data,
                                        const Network& f) {
    const std::size_t k = result.relevance.cols();
    std::size_t column = 0;
    if (result.config.target_output) {
        column = *result.config.target_output;
    } else if (data.target_dim() == k && data.target_dim() > 0) {
        // True class: argmax of the instance's target row.
        const std::size_t row = result.instance_id;
        if (row >= data.size()) throw InvalidInput("ranking_importances: instance out of range");
        double best = data.targets(row, 0);
        for (std::size_t j = 1; j < k; ++j)
            if (data.targets(row, j) > best) {
                best = data.targets(row, j);
                column = j;
            }
    } else {
        const std::size_t row = result.instance_id;
        if (row >= data.size()) throw InvalidInput("ranking_importances: instance out of range");
        const auto acts = forward(f, data.inputs.row(row));
        const auto& out = acts.back();
        column = std::size_t(std::max_element(out.begin(), out.end()) - out.begin());
    }
    if (column >= k) throw InvalidInput("ranking_importances: output column out of range");
    return result.relevance.col(column);
}

ComparisonResult compare_methods(const Dataset& data, const Network& f,
                                 const std::vector<MethodSpec>& methods,
                                 const std::vector<std::size_t>& ks,
                                 const std::optional<std::vector<double>>& truth_relevance,
                                 Split eval_split) {
    if (methods.empty()) throw InvalidInput("compare_methods: no methods");
    std::vector<std::size_t> rows = data.indices_of(eval_split);
    if (rows.empty()) {
        rows.resize(data.size());
        std::iota(rows.begin(), rows.end(), 0);
    }

    // Positive concept sets come from the binary concept labels.
    std::vector<std::set<std::size_t>> positives(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < data.concept_dim(); ++c)
            if (data.concepts(rows[r], c) == 1.0) positives[r].insert(c);

    ComparisonResult out;
    for (const MethodSpec& spec : methods) {
        const BatchAttribution batch = attribute_batch(f, spec.g, data.inputs, rows, spec.config);

        RecallReport report;
        report.method = spec.label;
        std::vector<std::vector<double>> importance_rows;
        importance_rows.reserve(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r)
            importance_rows.push_back(ranking_importances(batch.results[r], data, f));

        for (std::size_t k : ks) {
            double total = 0.0;
            std::size_t used = 0;
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (positives[r].empty()) continue;
                total += recall_at_k(importance_rows[r], positives[r], k);
                ++used;
            }
            report.per_k[k] = used ? total / double(used) : 0.0;
            report.n_instances = used;
        }
        out.recalls.push_back(std::move(report));

        if (truth_relevance) out.mse.per_method[spec.label] = gradient_mse(importance_rows, *truth_relevance);
    }

    // Aligned text table.
    std::ostringstream table;
    table << std::left;
    std::size_t label_width = 6;
    for (const auto& r : out.recalls) label_width = std::max(label_width, r.method.size());
    table << std::setw(int(label_width + 2)) << "method";
    for (std::size_t k : ks) table << std::setw(12) << ("recall@" + std::to_string(k));
    if (truth_relevance) table << std::setw(12) << "grad_mse";
    table << "\n";
    for (const auto& r : out.recalls) {
        table << std::setw(int(label_width + 2)) << r.method;
        for (std::size_t k : ks) {
            std::ostringstream cell;
            cell.setf(std::ios::fixed);
            cell.precision(4);
            cell << r.per_k.at(k);
            table << std::setw(12) << cell.str();
        }
        if (truth_relevance) {
            std::ostringstream cell;
            cell.setf(std::ios::scientific);
            cell.precision(3);
            cell << out.mse.per_method.at(r.method);
            table << std::setw(12) << cell.str();
        }
        table << "\n";
    }
    out.table = table.str();
    return out;
}

std::string to_json_string(const RecallReport& report) {
    nlohmann::json j;
    j["method"] = report.method;
    j["n_instances"] = report.n_instances;
    nlohmann::json per_k = nlohmann::json::object();
    for (const auto& [k, v] : report.per_k) per_k[std::to_string(k)] = v;
    j["per_k"] = std::move(per_k);
    return j.dump(2);
}

std::string to_json_string(const GradientMseReport& report) {
    nlohmann::json j;
    for (const auto& [method, mse] : report.per_method) j[method] = mse;
    return j.dump(2);
}

void write_recall_csv(const std::vector<RecallReport>& reports,
                      const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot open '" + path.string() + "' for writing");
    out << "method,k,recall\n";
    for (const auto& r : reports)
        for (const auto& [k, v] : r.per_k)
            out << r.method << "," << k << "," << format_double(v) << "\n";
    if (!out) throw InvalidInput("failed writing '" + path.string() + "'");
}

}  // namespace cg
