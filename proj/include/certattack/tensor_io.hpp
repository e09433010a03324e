#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "certattack/linalg.hpp"

namespace certattack {

/// Rows of a tensor text file: header `d n`, then n rows of d decimal values with
/// an optional trailing integer label column.
struct TensorFile {
  Matrix rows;
  std::vector<std::optional<int>> labels;
};

TensorFile parse_tensor(const std::string& text);
TensorFile read_tensor_file(const std::filesystem::path& path);
std::string format_tensor(const Matrix& rows, const std::vector<int>* labels = nullptr);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

/// Writes `content` to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace certattack
