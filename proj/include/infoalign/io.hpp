#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace infoalign::io {

// Round-trip formatting (%.17g) so equal doubles always print equal bytes.
std::string format_double(double v);

// Writes to `<path>.tmp` and renames over `path`. Throws IoError.
void atomic_write(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

// Minimal CSV builder; fields are written verbatim, so callers keep them
// free of commas and newlines.
class CsvBuilder {
 public:
  explicit CsvBuilder(std::vector<std::string> header);

  void comment(std::string_view line);
  void row(const std::vector<std::string>& fields);
  std::size_t rows() const { return rows_; }
  const std::string& str() const { return out_; }

 private:
  std::size_t columns_;
  std::size_t rows_ = 0;
  std::string comments_;
  std::string out_;
};

struct CsvTable {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws IoError when absent
};

CsvTable parse_csv(std::string_view text);

}  // namespace infoalign::io
