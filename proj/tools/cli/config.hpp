#pragma once

// Experiment configuration: flat `key = value` text with one [section] per
// subcommand, plus command-line overrides.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace infoalign::cli {

enum class Subcommand { kToy, kGauss, kStarvation, kGradcheck, kReport };

std::string subcommand_name(Subcommand s);
Subcommand parse_subcommand(const std::string& name);  // throws ConfigError

using Section = std::map<std::string, std::string>;

// Sections are limited to the subcommand names; keys before any header land
// in the unnamed global section. '#' and ';' start a comment line.
struct IniDocument {
  std::map<std::string, Section> sections;

  const Section* find(const std::string& name) const;
};

// Throws ConfigError naming `origin` and the line for malformed input,
// unknown sections and duplicate keys.
IniDocument parse_ini(std::string_view text, const std::string& origin = "config");
IniDocument load_ini(const std::filesystem::path& path);

struct ExperimentConfig {
  Subcommand subcommand = Subcommand::kToy;
  std::filesystem::path config_path;  // empty: built-in defaults
  std::filesystem::path out_dir = "out";
  std::optional<std::uint64_t> seed;  // overrides the section's seed
  std::size_t jobs = 1;
  IniDocument params;
};

// Typed access to one section. Every read records the effective value, so
// canonical() describes the run fully and finish() can reject leftovers.
class SectionReader {
 public:
  SectionReader(const ExperimentConfig& config, std::string section);

  double number(const std::string& key, double fallback);
  std::uint64_t integer(const std::string& key, std::uint64_t fallback);
  bool flag(const std::string& key, bool fallback);
  std::string text(const std::string& key, const std::string& fallback);
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback);
  std::vector<std::string> words(const std::string& key, const std::vector<std::string>& fallback);
  // Section seed, replaced by the command-line seed when one is given.
  std::uint64_t seed();

  // Throws ConfigError naming the first key that was never read.
  void finish() const;

  // "section.key=value" lines in key order.
  std::string canonical() const;

 private:
  const std::string* raw(const std::string& key);
  void record(const std::string& key, std::string value);

  std::string section_;
  Section values_;
  std::optional<std::uint64_t> seed_override_;
  std::set<std::string> read_;
  std::map<std::string, std::string> effective_;
};

}  // namespace infoalign::cli
