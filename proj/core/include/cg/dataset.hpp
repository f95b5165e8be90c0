// Aligned input / concept / target tables with split tags and CSV I/O.
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "cg/matrix.hpp"

namespace cg {

enum class Split { train, val, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct Dataset {
    Matrix inputs;    // n x d
    Matrix concepts;  // n x m, real-valued or {0,1}
    Matrix targets;   // n x k
    std::vector<std::string> concept_names;
    std::vector<std::string> target_names;
    std::vector<Split> split;

    std::size_t size() const { return inputs.rows(); }
    std::size_t input_dim() const { return inputs.cols(); }
    std::size_t concept_dim() const { return concepts.cols(); }
    std::size_t target_dim() const { return targets.cols(); }

    std::vector<std::size_t> indices_of(Split s) const;

    // True when every value in concept column j is exactly 0 or 1.
    bool concept_column_is_binary(std::size_t j) const;
    bool all_concepts_binary() const;

    // Row-subset copy preserving names and tags.
    Dataset subset(const std::vector<std::size_t>& rows) const;

    // Throws InvalidInput when row counts disagree or tags are missing.
    void validate() const;
};

// CSV layout: header "x0..x{d-1},c0..c{m-1},y0..y{k-1},split", one data row
// per instance, doubles printed in shortest round-trip form.
void write_csv(const Dataset& data, const std::filesystem::path& path);
Dataset read_csv(const std::filesystem::path& path);

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace cg
