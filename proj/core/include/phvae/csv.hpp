#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "phvae/autodiff.hpp"

namespace phvae::csv {

// Shortest-safe round-trippable decimal: 17 significant digits.
std::string format_double(double v);

// Parses a full-string decimal; throws FormatError otherwise.
double parse_double(const std::string& s);

std::vector<std::string> split(const std::string& line, char sep = ',');

// One row per sample, one column per dimension, no header.
void write_matrix(const std::filesystem::path& path, const ad::Tensor& m);
ad::Tensor read_matrix(const std::filesystem::path& path);

} // namespace phvae::csv
