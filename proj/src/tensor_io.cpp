#include "certattack/tensor_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "certattack/errors.hpp"

namespace certattack {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

TensorFile parse_tensor(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  long long d = -1, n = -1;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream head(line);
    if (head >> d) {
      if (!(head >> n)) throw FormatError("tensor file line " + std::to_string(line_no) + ": header needs 'd n'");
      break;
    }
  }
  if (d <= 0 || n < 0) throw FormatError("tensor file: missing or invalid 'd n' header");
  TensorFile out;
  out.rows = Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
  std::size_t row = 0;
  while (row < static_cast<std::size_t>(n) && std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<double> values;
    double v;
    while (fields >> v) values.push_back(v);
    if (!fields.eof()) throw FormatError("tensor file line " + std::to_string(line_no) + ": non-numeric value");
    if (values.empty()) continue;
    if (values.size() != static_cast<std::size_t>(d) && values.size() != static_cast<std::size_t>(d) + 1)
      throw FormatError("tensor file line " + std::to_string(line_no) + ": expected " + std::to_string(d) +
                        " values (plus optional label)");
    for (std::size_t j = 0; j < static_cast<std::size_t>(d); ++j) out.rows(row, j) = values[j];
    if (values.size() == static_cast<std::size_t>(d) + 1) {
      const double label = values.back();
      if (label < 0 || label != std::floor(label))
        throw FormatError("tensor file line " + std::to_string(line_no) + ": label must be a non-negative integer");
      out.labels.emplace_back(static_cast<int>(label));
    } else {
      out.labels.emplace_back(std::nullopt);
    }
    ++row;
  }
  if (row != static_cast<std::size_t>(n))
    throw FormatError("tensor file: expected " + std::to_string(n) + " rows, found " + std::to_string(row));
  return out;
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open tensor file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_tensor(buf.str());
}

std::string format_tensor(const Matrix& rows, const std::vector<int>* labels) {
  if (labels && labels->size() != rows.rows()) throw ShapeError("format_tensor: label count mismatch");
  std::string out = std::to_string(rows.cols()) + " " + std::to_string(rows.rows()) + "\n";
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    for (std::size_t j = 0; j < rows.cols(); ++j) {
      if (j) out += ' ';
      out += format_double(rows(i, j));
    }
    if (labels) out += " " + std::to_string((*labels)[i]);
    out += '\n';
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace certattack
