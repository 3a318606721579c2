#pragma once

// Static SVG 1.1 line charts from CSV tables.

#include <string>
#include <vector>

#include "infoalign/io.hpp"

namespace infoalign::cli {

struct ChartSpec {
  std::string title;
  std::string x_column;
  std::vector<std::string> y_columns;  // one polyline each
  std::string x_label;
  std::string y_label;
  bool log_x = false;  // base-10 axes; values must be positive
  bool log_y = false;
  int width = 640;
  int height = 400;
};

// Deterministic layout and fixed-precision coordinates, so equal inputs give
// equal bytes. Throws IoError when a named column is missing or a cell is not
// a finite number (positive on a log axis). No data rows gives axes and an
// "empty" annotation.
std::string render_svg(const io::CsvTable& table, const ChartSpec& spec);

}  // namespace infoalign::cli
