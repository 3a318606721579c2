#pragma once

// Runs one configured suite, writes its outputs and a manifest.

#include <cstdint>
#include <string>
#include <vector>

#include "cli/config.hpp"
#include "cli/svg.hpp"
#include "infoalign/io.hpp"

namespace infoalign::cli {

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunManifest {
  std::string subcommand;
  std::string version;
  std::uint64_t config_hash = 0;
  std::string config;  // canonical effective parameters, hashed into config_hash
  std::vector<std::string> files;  // relative to the output directory
  double duration_seconds = 0.0;
};

struct RunResult {
  RunManifest manifest;
  std::vector<Check> checks;
  std::vector<std::string> summary_header;
  std::vector<std::vector<std::string>> summary_rows;

  bool passed() const;
};

const char* artifact_version();

// Validates the configuration and returns the canonical effective parameters
// that run() hashes. Throws ConfigError.
std::string resolve_config(const ExperimentConfig& config);

// Throws ConfigError for an invalid configuration (before any output is
// written) and IoError when outputs cannot be written. Check failures are
// reported in the result, not thrown.
RunResult run(const ExperimentConfig& config);

std::string manifest_text(const RunManifest& manifest);
std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows);
// Summary table, check list and verdict.
std::string format_report(const RunResult& result);

struct NamedChart {
  std::string file;
  ChartSpec spec;
};

// Charts for the CSV schemas the suites write, detected from the header.
// Empty for an unknown schema.
std::vector<NamedChart> charts_for(const io::CsvTable& table, const std::string& stem);

}  // namespace infoalign::cli
