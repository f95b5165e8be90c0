#include "cg/attribution.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "cg/dataset.hpp"
#include "cg/errors.hpp"
#include "cg/svd.hpp"

namespace cg {

std::string to_string(Method m) {
    switch (m) {
        case Method::cg_joint: return "cg_joint";
        case Method::cg_individual: return "cg_individual";
        case Method::cav: return "cav";
    }
    throw InvalidInput("unknown method");
}

Method method_from_string(const std::string& s) {
    if (s == "cg_joint") return Method::cg_joint;
    if (s == "cg_individual") return Method::cg_individual;
    if (s == "cav") return Method::cav;
    throw InvalidInput("unknown attribution method '" + s + "'");
}

std::string to_string(Normalization n) {
    switch (n) {
        case Normalization::pinv: return "pinv";
        case Normalization::normed: return "normed";
        case Normalization::cosine: return "cosine";
        case Normalization::raw: return "raw";
    }
    throw InvalidInput("unknown normalization");
}

Normalization normalization_from_string(const std::string& s) {
    if (s == "pinv") return Normalization::pinv;
    if (s == "normed") return Normalization::normed;
    if (s == "cosine") return Normalization::cosine;
    if (s == "raw") return Normalization::raw;
    throw InvalidInput("unknown normalization '" + s + "'");
}

std::string to_string(AggregationMode m) {
    switch (m) {
        case AggregationMode::mean: return "mean";
        case AggregationMode::mean_abs: return "mean_abs";
        case AggregationMode::positive_fraction: return "positive_fraction";
    }
    throw InvalidInput("unknown aggregation mode");
}

AggregationMode aggregation_mode_from_string(const std::string& s) {
    if (s == "mean") return AggregationMode::mean;
    if (s == "mean_abs") return AggregationMode::mean_abs;
    if (s == "positive_fraction") return AggregationMode::positive_fraction;
    throw InvalidInput("unknown aggregation mode '" + s + "'");
}

Matrix cg_joint(const Matrix& grad_g, const Matrix& grad_f) {
    if (grad_g.rows() != grad_f.rows())
        throw InvalidInput("cg_joint: grad_g and grad_f must share the activation dimension");
    return matmul(pinv(grad_g), grad_f);
}

std::vector<double> cg_individual(std::span<const double> grad_g_i, const Matrix& grad_f,
                                  Normalization normalization) {
    if (grad_g_i.size() != grad_f.rows())
        throw InvalidInput("cg_individual: gradient length mismatch");

    const double n2 = norm_squared(grad_g_i);
    if (n2 == 0.0 && normalization != Normalization::raw)
        throw DegenerateConceptGradient("concept gradient is zero at this instance");

    std::vector<double> s = vecmat(grad_g_i, grad_f);
    switch (normalization) {
        case Normalization::pinv:
            for (double& v : s) v /= n2;
            break;
        case Normalization::normed: {
            const double n1 = std::sqrt(n2);
            for (double& v : s) v /= n1;
            break;
        }
        case Normalization::cosine: {
            const double n1 = std::sqrt(n2);
            for (std::size_t j = 0; j < s.size(); ++j) {
                const double fj = norm(grad_f.col(j));
                s[j] = fj > 0.0 ? s[j] / (n1 * fj) : 0.0;
            }
            break;
        }
        case Normalization::raw:
            break;
    }
    return s;
}

std::vector<double> cav_sensitivity(std::span<const double> v_c, const Matrix& grad_f) {
    if (v_c.size() != grad_f.rows())
        throw InvalidInput("cav_sensitivity: vector length mismatch");
    const double n1 = norm(v_c);
    if (n1 == 0.0) throw DegenerateConceptVector("concept activation vector is zero");
    std::vector<double> s = vecmat(v_c, grad_f);
    for (double& v : s) v /= n1;
    return s;
}

AttributionResult attribute_instance(const Network& f, const Network& g,
                                     std::span<const double> x, const AttributionConfig& cfg) {
    if (!prefixes_match(f, g, cfg.layer))
        throw IncompatibleModels(
            "target and concept model differ below layer " + std::to_string(cfg.layer.index) +
            "; their gradients live in different representations");

    const Matrix grad_f = jacobian_at_layer(f, x, cfg.layer);  // d_l x k
    const Matrix grad_g = jacobian_at_layer(g, x, cfg.layer);  // d_l x m
    const std::size_t m = grad_g.cols(), k = grad_f.cols();

    AttributionResult out;
    out.config = cfg;
    if (cfg.method == Method::cg_joint) {
        out.relevance = cg_joint(grad_g, grad_f);
        return out;
    }

    out.relevance = Matrix(m, k);
    for (std::size_t i = 0; i < m; ++i) {
        const std::vector<double> gi = grad_g.col(i);
        const std::vector<double> row = cfg.method == Method::cav
                                            ? cav_sensitivity(gi, grad_f)
                                            : cg_individual(gi, grad_f, cfg.normalization);
        for (std::size_t j = 0; j < k; ++j) out.relevance(i, j) = row[j];
    }
    return out;
}

namespace {

std::size_t worker_count(std::size_t jobs) {
    std::size_t n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("CG_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) n = std::min<std::size_t>(n, std::size_t(v));
    }
    return std::max<std::size_t>(1, std::min(n, jobs));
}

}  // namespace

BatchAttribution attribute_batch(const Network& f, const Network& g, const Matrix& inputs,
                                 const std::vector<std::size_t>& rows,
                                 const AttributionConfig& cfg) {
    BatchAttribution out;
    out.results.resize(rows.size());

    const std::size_t m = g.output_dim(), k = f.output_dim();
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> degenerate{0};
    std::atomic<bool> failed{false};
    std::string error_message;
    std::mutex error_mutex;

    auto work = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= rows.size() || failed.load()) break;
            const std::size_t row = rows[i];
            try {
                auto x = inputs.row(row);
                out.results[i] = attribute_instance(f, g, x, cfg);
                out.results[i].instance_id = row;
            } catch (const DegenerateConceptGradient&) {
                out.results[i] = AttributionResult{Matrix(m, k), row, cfg};
                degenerate.fetch_add(1);
            } catch (const DegenerateConceptVector&) {
                out.results[i] = AttributionResult{Matrix(m, k), row, cfg};
                degenerate.fetch_add(1);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                error_message = e.what();
                failed.store(true);
                break;
            }
        }
    };

    const std::size_t n_workers = worker_count(rows.size());
    if (n_workers <= 1) {
        work();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(n_workers);
        for (std::size_t t = 0; t < n_workers; ++t) threads.emplace_back(work);
        for (auto& t : threads) t.join();
    }
    if (failed.load()) throw InvalidInput("attribute_batch: " + error_message);

    out.degenerate_count = degenerate.load();
    return out;
}

GlobalRelevance aggregate(const std::vector<AttributionResult>& results, AggregationMode mode) {
    if (results.empty()) throw InvalidInput("aggregate: empty result list");
    const std::size_t m = results.front().relevance.rows();
    const std::size_t k = results.front().relevance.cols();
    for (const auto& r : results)
        if (r.relevance.rows() != m || r.relevance.cols() != k)
            throw InvalidInput("aggregate: inconsistent relevance shapes");

    GlobalRelevance out{Matrix(m, k), mode};
    const double inv_n = 1.0 / double(results.size());
    for (const auto& r : results) {
        for (std::size_t i = 0; i < m * k; ++i) {
            const double v = r.relevance.data()[i];
            switch (mode) {
                case AggregationMode::mean: out.values.data()[i] += v * inv_n; break;
                case AggregationMode::mean_abs: out.values.data()[i] += std::abs(v) * inv_n; break;
                case AggregationMode::positive_fraction:
                    out.values.data()[i] += (v > 0.0 ? 1.0 : 0.0) * inv_n;
                    break;
            }
        }
    }
    return out;
}

void write_attributions_csv(const std::vector<AttributionResult>& results,
                            const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot open '" + path.string() + "' for writing");
    out << "instance_id,concept_id,output_id,relevance\n";
    for (const auto& r : results)
        for (std::size_t i = 0; i < r.relevance.rows(); ++i)
            for (std::size_t j = 0; j < r.relevance.cols(); ++j)
                out << r.instance_id << "," << i << "," << j << ","
                    << format_double(r.relevance(i, j)) << "\n";
    if (!out) throw InvalidInput("failed writing '" + path.string() + "'");
}

std::vector<AttributionResult> read_attributions_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) ||
        (line != "instance_id,concept_id,output_id,relevance" &&
         line != "instance_id,concept_id,output_id,relevance\r"))
        throw InvalidInput("malformed attribution csv header");

    struct Cell {
        std::size_t concept_id, output_id;
        double value;
    };
    std::map<std::size_t, std::vector<Cell>> by_instance;
    std::size_t max_concept = 0, max_output = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t ids[3] = {0, 0, 0};
        double value = 0.0;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (int field = 0; field < 3; ++field) {
            auto [np, ec] = std::from_chars(p, end, ids[field]);
            if (ec != std::errc{} || np == end || *np != ',')
                throw InvalidInput("malformed attribution csv row '" + line + "'");
            p = np + 1;
        }
        auto [np, ec] = std::from_chars(p, end, value);
        if (ec != std::errc{}) throw InvalidInput("malformed attribution csv row '" + line + "'");
        by_instance[ids[0]].push_back(Cell{ids[1], ids[2], value});
        max_concept = std::max(max_concept, ids[1]);
        max_output = std::max(max_output, ids[2]);
    }

    std::vector<AttributionResult> results;
    results.reserve(by_instance.size());
    for (auto& [id, cells] : by_instance) {
        AttributionResult r;
        r.instance_id = id;
        r.relevance = Matrix(max_concept + 1, max_output + 1);
        for (const Cell& c : cells) r.relevance(c.concept_id, c.output_id) = c.value;
        results.push_back(std::move(r));
    }
    return results;
}

void write_attributions_json(const std::vector<AttributionResult>& results,
                             const std::filesystem::path& path) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : results) {
        nlohmann::json jr;
        jr["instance_id"] = r.instance_id;
        jr["method"] = to_string(r.config.method);
        jr["normalization"] = to_string(r.config.normalization);
        jr["layer"] = r.config.layer.index;
        if (r.config.target_output) jr["target_output"] = *r.config.target_output;
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < r.relevance.rows(); ++i)
            rows.push_back(std::vector<double>(r.relevance.row(i).begin(),
                                               r.relevance.row(i).end()));
        jr["relevance"] = std::move(rows);
        j.push_back(std::move(jr));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot open '" + path.string() + "' for writing");
    out << j.dump(2) << "\n";
    if (!out) throw InvalidInput("failed writing '" + path.string() + "'");
}

}  // namespace cg
