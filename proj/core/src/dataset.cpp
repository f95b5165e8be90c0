#include "cg/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cg/errors.hpp"

namespace cg {

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    throw InvalidInput("unknown split tag");
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw InvalidInput("unknown split tag '" + s + "'");
}

std::vector<std::size_t> Dataset::indices_of(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == s) out.push_back(i);
    return out;
}

bool Dataset::concept_column_is_binary(std::size_t j) const {
    for (std::size_t i = 0; i < concepts.rows(); ++i) {
        const double v = concepts(i, j);
        if (v != 0.0 && v != 1.0) return false;
    }
    return true;
}

bool Dataset::all_concepts_binary() const {
    for (std::size_t j = 0; j < concepts.cols(); ++j)
        if (!concept_column_is_binary(j)) return false;
    return true;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.concept_names = concept_names;
    out.target_names = target_names;
    out.inputs = Matrix(rows.size(), inputs.cols());
    out.concepts = Matrix(rows.size(), concepts.cols());
    out.targets = Matrix(rows.size(), targets.cols());
    out.split.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t src = rows[r];
        if (src >= size()) throw InvalidInput("subset: row index out of range");
        for (std::size_t j = 0; j < inputs.cols(); ++j) out.inputs(r, j) = inputs(src, j);
        for (std::size_t j = 0; j < concepts.cols(); ++j) out.concepts(r, j) = concepts(src, j);
        for (std::size_t j = 0; j < targets.cols(); ++j) out.targets(r, j) = targets(src, j);
        out.split.push_back(split[src]);
    }
    return out;
}

void Dataset::validate() const {
    const std::size_t n = inputs.rows();
    if (concepts.rows() != n || targets.rows() != n || split.size() != n)
        throw InvalidInput("dataset row counts disagree");
    if (!concept_names.empty() && concept_names.size() != concepts.cols())
        throw InvalidInput("concept name count mismatch");
    if (!target_names.empty() && target_names.size() != targets.cols())
        throw InvalidInput("target name count mismatch");
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw InvalidInput("failed to format double");
    return std::string(buf, ptr);
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
    data.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot open '" + path.string() + "' for writing");

    const std::size_t d = data.input_dim(), m = data.concept_dim(), k = data.target_dim();
    for (std::size_t j = 0; j < d; ++j) out << "x" << j << ",";
    for (std::size_t j = 0; j < m; ++j) out << "c" << j << ",";
    for (std::size_t j = 0; j < k; ++j) out << "y" << j << ",";
    out << "split\n";

    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) out << format_double(data.inputs(i, j)) << ",";
        for (std::size_t j = 0; j < m; ++j) out << format_double(data.concepts(i, j)) << ",";
        for (std::size_t j = 0; j < k; ++j) out << format_double(data.targets(i, j)) << ",";
        out << to_string(data.split[i]) << "\n";
    }
    if (!out) throw InvalidInput("failed writing '" + path.string() + "'");
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw InvalidInput("bad numeric field '" + s + "'");
    return v;
}

}  // namespace

Dataset read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("empty dataset file");
    const auto header = split_line(line);

    std::size_t d = 0, m = 0, k = 0;
    for (const auto& h : header) {
        if (h.starts_with("x")) ++d;
        else if (h.starts_with("c")) ++m;
        else if (h.starts_with("y")) ++k;
        else if (h != "split") throw InvalidInput("unexpected csv column '" + h + "'");
    }
    if (header.size() != d + m + k + 1 || header.back() != "split")
        throw InvalidInput("malformed dataset header");

    std::vector<double> xs, cs, ys;
    std::vector<Split> tags;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_line(line);
        if (f.size() != header.size())
            throw InvalidInput("row " + std::to_string(n) + " has " + std::to_string(f.size()) +
                               " fields, expected " + std::to_string(header.size()));
        std::size_t p = 0;
        for (std::size_t j = 0; j < d; ++j) xs.push_back(parse_double(f[p++]));
        for (std::size_t j = 0; j < m; ++j) cs.push_back(parse_double(f[p++]));
        for (std::size_t j = 0; j < k; ++j) ys.push_back(parse_double(f[p++]));
        tags.push_back(split_from_string(f[p]));
        ++n;
    }

    Dataset out;
    out.inputs = Matrix(n, d, std::move(xs));
    out.concepts = Matrix(n, m, std::move(cs));
    out.targets = Matrix(n, k, std::move(ys));
    out.split = std::move(tags);
    for (std::size_t j = 0; j < m; ++j) out.concept_names.push_back("c" + std::to_string(j));
    for (std::size_t j = 0; j < k; ++j) out.target_names.push_back("y" + std::to_string(j));
    out.validate();
    return out;
}

}  // namespace cg
