#include "cli/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <sstream>

#include "infoalign/errors.hpp"
#include "infoalign/io.hpp"

namespace infoalign::cli {
namespace {

constexpr std::array<std::pair<Subcommand, std::string_view>, 5> kSubcommands{{
    {Subcommand::kToy, "toy"},
    {Subcommand::kGauss, "gauss"},
    {Subcommand::kStarvation, "starvation"},
    {Subcommand::kGradcheck, "gradcheck"},
    {Subcommand::kReport, "report"},
}};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

}  // namespace

std::string subcommand_name(Subcommand s) {
  for (const auto& [k, name] : kSubcommands) {
    if (k == s) return std::string(name);
  }
  return "unknown";
}

Subcommand parse_subcommand(const std::string& name) {
  for (const auto& [k, n] : kSubcommands) {
    if (n == name) return k;
  }
  throw ConfigError("unknown subcommand '" + name + "'");
}

const Section* IniDocument::find(const std::string& name) const {
  const auto it = sections.find(name);
  return it == sections.end() ? nullptr : &it->second;
}

IniDocument parse_ini(std::string_view text, const std::string& origin) {
  IniDocument doc;
  std::string current;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  auto fail = [&](const std::string& what) {
    throw ConfigError(origin + ":" + std::to_string(number) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') fail("unterminated section header");
      current = trim(std::string_view(t).substr(1, t.size() - 2));
      try {
        parse_subcommand(current);
      } catch (const ConfigError&) {
        fail("unknown section [" + current + "]");
      }
      doc.sections[current];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) fail("empty key");
    if (!doc.sections[current].emplace(key, value).second) fail("duplicate key '" + key + "'");
  }
  return doc;
}

IniDocument load_ini(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_ini(text, path.string());
}

SectionReader::SectionReader(const ExperimentConfig& config, std::string section)
    : section_(std::move(section)), seed_override_(config.seed) {
  if (const Section* s = config.params.find(section_)) values_ = *s;
  if (const Section* g = config.params.find("")) {
    for (const auto& [k, v] : *g) {
      if (k != "seed") throw ConfigError("unknown key '" + k + "' outside any section");
      values_.emplace(k, v);
    }
  }
}

const std::string* SectionReader::raw(const std::string& key) {
  read_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

void SectionReader::record(const std::string& key, std::string value) {
  effective_[key] = std::move(value);
}

double SectionReader::number(const std::string& key, double fallback) {
  double v = fallback;
  if (const std::string* s = raw(key)) {
    const char* end = s->data() + s->size();
    const auto [ptr, ec] = std::from_chars(s->data(), end, v);
    if (ec != std::errc() || ptr != end) {
      throw ConfigError("[" + section_ + "] " + key + ": expected a number, got '" + *s + "'");
    }
  }
  record(key, io::format_double(v));
  return v;
}

std::uint64_t SectionReader::integer(const std::string& key, std::uint64_t fallback) {
  std::uint64_t v = fallback;
  if (const std::string* s = raw(key)) {
    const char* end = s->data() + s->size();
    const auto [ptr, ec] = std::from_chars(s->data(), end, v);
    if (ec != std::errc() || ptr != end) {
      throw ConfigError("[" + section_ + "] " + key + ": expected a nonnegative integer, got '" +
                        *s + "'");
    }
  }
  record(key, std::to_string(v));
  return v;
}

bool SectionReader::flag(const std::string& key, bool fallback) {
  bool v = fallback;
  if (const std::string* s = raw(key)) {
    if (*s == "true" || *s == "1" || *s == "yes") {
      v = true;
    } else if (*s == "false" || *s == "0" || *s == "no") {
      v = false;
    } else {
      throw ConfigError("[" + section_ + "] " + key + ": expected true or false, got '" + *s + "'");
    }
  }
  record(key, v ? "true" : "false");
  return v;
}

std::string SectionReader::text(const std::string& key, const std::string& fallback) {
  const std::string* s = raw(key);
  std::string v = s ? *s : fallback;
  record(key, v);
  return v;
}

std::vector<double> SectionReader::numbers(const std::string& key,
                                           const std::vector<double>& fallback) {
  std::vector<double> out = fallback;
  if (const std::string* s = raw(key)) {
    out.clear();
    for (const std::string& item : split_list(*s)) {
      double v = 0.0;
      const char* end = item.data() + item.size();
      const auto [ptr, ec] = std::from_chars(item.data(), end, v);
      if (ec != std::errc() || ptr != end) {
        throw ConfigError("[" + section_ + "] " + key + ": '" + item + "' is not a number");
      }
      out.push_back(v);
    }
    if (out.empty()) throw ConfigError("[" + section_ + "] " + key + ": empty list");
  }
  std::vector<std::string> text;
  for (double v : out) text.push_back(io::format_double(v));
  record(key, join(text));
  return out;
}

std::vector<std::string> SectionReader::words(const std::string& key,
                                              const std::vector<std::string>& fallback) {
  std::vector<std::string> out = fallback;
  if (const std::string* s = raw(key)) {
    out = split_list(*s);
    if (out.empty()) throw ConfigError("[" + section_ + "] " + key + ": empty list");
  }
  record(key, join(out));
  return out;
}

std::uint64_t SectionReader::seed() {
  const std::uint64_t from_file = integer("seed", 0);
  if (!seed_override_) return from_file;
  record("seed", std::to_string(*seed_override_));
  return *seed_override_;
}

void SectionReader::finish() const {
  for (const auto& [key, value] : values_) {
    if (!read_.count(key)) throw ConfigError("unknown key '" + key + "' in [" + section_ + "]");
  }
}

std::string SectionReader::canonical() const {
  std::string out;
  for (const auto& [key, value] : effective_) out += section_ + "." + key + "=" + value + "\n";
  return out;
}

}  // namespace infoalign::cli
