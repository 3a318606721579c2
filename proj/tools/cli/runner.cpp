#include "cli/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>

#include "infoalign/diff/finite_difference.hpp"
#include "infoalign/diff/mlp.hpp"
#include "infoalign/errors.hpp"
#include "infoalign/estimators.hpp"
#include "infoalign/gauss_bench.hpp"
#include "infoalign/losses.hpp"
#include "infoalign/parallel.hpp"
#include "infoalign/policy.hpp"
#include "infoalign/rng.hpp"
#include "infoalign/starvation.hpp"
#include "infoalign/toy_sim.hpp"

#ifndef INFOALIGN_VERSION
#define INFOALIGN_VERSION "unknown"
#endif

namespace infoalign::cli {
namespace {

namespace fs = std::filesystem;
using diff::Matrix;
using diff::Tape;
using diff::Var;

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string pass_word(bool ok) { return ok ? "PASS" : "FAIL"; }

bool has_columns(const io::CsvTable& t, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    if (std::find(t.header.begin(), t.header.end(), n) == t.header.end()) return false;
  }
  return true;
}

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, std::string_view contents) {
    io::atomic_write(dir_ / name, contents);
    files_.push_back(name);
  }

  void write_charts(const std::string& csv_text, const std::string& stem) {
    const io::CsvTable table = io::parse_csv(csv_text);
    for (const NamedChart& c : charts_for(table, stem)) write(c.file, render_svg(table, c.spec));
  }

  const fs::path& dir() const { return dir_; }
  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

std::vector<std::uint64_t> seed_range(SectionReader& r, std::uint64_t default_replicates) {
  const std::uint64_t base = r.seed();
  const std::uint64_t n = r.integer("replicates", default_replicates);
  if (n == 0) throw ConfigError("replicates must be positive");
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < n; ++i) seeds.push_back(base + i);
  return seeds;
}

std::size_t as_size(std::uint64_t v) { return static_cast<std::size_t>(v); }

diff::Method parse_optimizer(const std::string& name) {
  if (name == "plain") return diff::Method::kPlain;
  if (name == "adam") return diff::Method::kAdam;
  throw ConfigError("unknown optimizer '" + name + "' (plain, adam)");
}

estimators::Normalization parse_normalization(const std::string& name) {
  for (auto n : {estimators::Normalization::kPerPrompt, estimators::Normalization::kPooled}) {
    if (estimators::normalization_name(n) == name) return n;
  }
  throw ConfigError("unknown normalization '" + name + "'");
}

template <typename T, typename Parse>
std::vector<T> parse_all(const std::vector<std::string>& names, Parse parse) {
  std::vector<T> out;
  for (const std::string& n : names) {
    try {
      out.push_back(parse(n));
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
  }
  return out;
}

// ---- toy ------------------------------------------------------------------

struct ToyPlan {
  std::vector<losses::LossMethod> methods;
  std::vector<int> scenarios;
  std::vector<std::uint64_t> seeds;
  toy::ScenarioConfig base;
  bool svg = true;
};

ToyPlan read_toy(SectionReader& r) {
  ToyPlan p;
  const toy::ScenarioConfig d;
  p.methods = parse_all<losses::LossMethod>(r.words("methods", {"dpo", "mio"}), losses::parse_method);
  for (double s : r.numbers("scenarios", {1, 2, 3, 4})) {
    if (s != std::floor(s) || s < 1 || s > 4) throw ConfigError("scenarios must be in 1..4");
    p.scenarios.push_back(static_cast<int>(s));
  }
  p.seeds = seed_range(r, 1);
  p.base.steps = as_size(r.integer("steps", d.steps));
  p.base.batch = as_size(r.integer("batch", d.batch));
  p.base.loss.beta = r.number("beta", d.loss.beta);
  p.base.small_mass = r.number("small_mass", d.small_mass);
  p.base.parameterization = policy::parse_parameterization(
      r.text("parameterization", policy::parameterization_name(d.parameterization)));
  p.base.hidden = as_size(r.integer("hidden", d.hidden));
  p.base.optimizer.method = parse_optimizer(r.text("optimizer", "plain"));
  p.base.optimizer.step_size = r.number("step_size", d.optimizer.step_size);
  p.base.negative_pool =
      toy::parse_negative_pool(r.text("negative_pool", toy::negative_pool_name(d.negative_pool)));
  p.svg = r.flag("svg", true);
  p.base.validate();
  return p;
}

void run_toy(const ToyPlan& p, std::size_t jobs, Outputs& out, RunResult& result) {
  struct Cell {
    losses::LossMethod method;
    int scenario;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (auto m : p.methods) {
    for (int s : p.scenarios) {
      for (auto seed : p.seeds) cells.push_back({m, s, seed});
    }
  }
  std::vector<toy::TrajectoryLog> logs(cells.size());
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    toy::ScenarioConfig c = p.base;
    c.loss.method = cells[i].method;
    c.scenario = cells[i].scenario;
    c.seed = cells[i].seed;
    logs[i] = toy::run_training(c);
  });

  double worst_norm = 0.0;
  std::size_t rejected_fell = 0;
  std::size_t mio_cells = 0;
  std::size_t mio_retained = 0;
  result.summary_header = {"method", "scenario", "seed", "chosen_initial", "chosen_final",
                           "rejected_initial", "rejected_final"};
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const toy::TrajectoryLog& log = logs[i];
    const std::string stem = "toy_" + log.method + "_scenario" + std::to_string(log.scenario) +
                             "_seed" + std::to_string(log.seed);
    const std::string csv = toy::trajectory_csv(log);
    out.write(stem + ".csv", csv);
    if (p.svg) out.write_charts(csv, stem);

    const toy::CategoryMeans fin = log.final_means();
    worst_norm = std::max(worst_norm, log.max_normalization_error);
    if (fin.rejected < log.initial.rejected) ++rejected_fell;
    if (cells[i].method == losses::LossMethod::kMio) {
      ++mio_cells;
      if (fin.chosen >= 0.95 * log.initial.chosen) ++mio_retained;
    }
    result.summary_rows.push_back({log.method, std::to_string(log.scenario), std::to_string(log.seed),
                                   fmt("%.6g", log.initial.chosen), fmt("%.6g", fin.chosen),
                                   fmt("%.6g", log.initial.rejected), fmt("%.6g", fin.rejected)});
  }
  result.checks.push_back({"normalization", worst_norm < 1e-9,
                           "max row-sum error " + fmt("%.3g", worst_norm)});
  result.checks.push_back({"rejected_mean_falls", rejected_fell == cells.size(),
                           std::to_string(rejected_fell) + "/" + std::to_string(cells.size()) +
                               " runs"});
  if (mio_cells > 0) {
    result.checks.push_back({"mio_chosen_retained", mio_retained == mio_cells,
                             std::to_string(mio_retained) + "/" + std::to_string(mio_cells) +
                                 " runs keep >= 0.95 of the initial chosen mean"});
  }
}

// ---- gauss ----------------------------------------------------------------

struct GaussPlan {
  std::vector<double> rhos;
  std::vector<gauss::EstimatorKind> kinds;
  std::vector<std::uint64_t> seeds;
  gauss::GaussianTask base;
  double tolerance = 0.15;
  double quorum = 0.8;
  bool traces = false;
  bool svg = true;
};

GaussPlan read_gauss(SectionReader& r) {
  GaussPlan p;
  const gauss::GaussianTask d;
  p.rhos = r.numbers("rhos", {0.0, 0.3, 0.5, 0.7});
  for (double rho : p.rhos) {
    if (!(std::abs(rho) < 1.0)) throw ConfigError("rhos must lie in (-1, 1)");
  }
  p.kinds = parse_all<gauss::EstimatorKind>(r.words("estimators", {"mine", "jsd"}),
                                            gauss::parse_estimator);
  p.seeds = seed_range(r, 5);
  p.base.steps = as_size(r.integer("steps", d.steps));
  p.base.batch = as_size(r.integer("batch", d.batch));
  p.base.negatives = as_size(r.integer("negatives", d.negatives));
  p.base.step_size = r.number("step_size", d.step_size);
  p.base.window = as_size(r.integer("window", d.window));
  p.base.hidden = as_size(r.integer("hidden", d.hidden));
  p.tolerance = r.number("tolerance", p.tolerance);
  p.quorum = r.number("variance_quorum", p.quorum);
  p.traces = r.flag("traces", false);
  p.svg = r.flag("svg", true);
  p.base.validate();
  return p;
}

std::string rho_tag(double rho) { return fmt("%g", rho); }

void run_gauss(const GaussPlan& p, std::size_t jobs, Outputs& out, RunResult& result) {
  const auto rows = gauss::variance_sweep(p.rhos, p.kinds, p.seeds, p.base, jobs);
  out.write("gauss_sweep.csv", gauss::sweep_csv(rows));
  if (p.traces) {
    for (const auto& r : rows) {
      const std::string stem = "gauss_trace_" + gauss::estimator_name(r.kind) + "_rho" +
                               rho_tag(r.rho) + "_seed" + std::to_string(r.seed);
      const std::string csv = gauss::trace_csv(r);
      out.write(stem + ".csv", csv);
      if (p.svg) out.write_charts(csv, stem);
    }
  }

  // (rho index, kind) -> per-seed reports in seed order.
  std::map<std::pair<std::size_t, gauss::EstimatorKind>, std::vector<const gauss::VarianceReport*>> by;
  for (const auto& r : rows) {
    const auto it = std::find(p.rhos.begin(), p.rhos.end(), r.rho);
    by[{static_cast<std::size_t>(it - p.rhos.begin()), r.kind}].push_back(&r);
  }
  auto mean_of = [](const std::vector<const gauss::VarianceReport*>& v, auto field) {
    double s = 0.0;
    for (const auto* r : v) s += field(*r);
    return s / static_cast<double>(v.size());
  };

  std::vector<std::string> header{"rho", "analytic_mi"};
  for (auto k : p.kinds) header.push_back(gauss::estimator_name(k) + "_estimate");
  for (auto k : p.kinds) header.push_back(gauss::estimator_name(k) + "_variance");
  io::CsvBuilder summary(header);
  result.summary_header = header;

  const bool has_mine = std::count(p.kinds.begin(), p.kinds.end(), gauss::EstimatorKind::kMine) > 0;
  const bool has_jsd = std::count(p.kinds.begin(), p.kinds.end(), gauss::EstimatorKind::kJsd) > 0;
  bool accurate = true;
  std::string accuracy_detail;
  bool variance_ok = true;
  std::string variance_detail;
  bool variance_checked = false;
  for (std::size_t i = 0; i < p.rhos.size(); ++i) {
    const double mi = gauss::analytic_mi(p.rhos[i]);
    std::vector<std::string> fields{io::format_double(p.rhos[i]), io::format_double(mi)};
    std::vector<std::string> shown{rho_tag(p.rhos[i]), fmt("%.4f", mi)};
    for (auto k : p.kinds) {
      const double e = mean_of(by[{i, k}], [](const auto& r) { return r.final_estimate; });
      fields.push_back(io::format_double(e));
      shown.push_back(fmt("%.4f", e));
      if (k == gauss::EstimatorKind::kMine) {
        const double err = std::abs(e - mi);
        accurate = accurate && err <= p.tolerance;
        accuracy_detail += (accuracy_detail.empty() ? "" : ", ") + std::string("rho=") +
                           rho_tag(p.rhos[i]) + " err " + fmt("%.3f", err);
      }
    }
    for (auto k : p.kinds) {
      const double v = mean_of(by[{i, k}], [](const auto& r) { return r.gradient_variance; });
      fields.push_back(io::format_double(v));
      shown.push_back(fmt("%.4g", v));
    }
    summary.row(fields);
    result.summary_rows.push_back(shown);

    if (has_mine && has_jsd && p.rhos[i] >= 0.5) {
      variance_checked = true;
      const auto& m = by[{i, gauss::EstimatorKind::kMine}];
      const auto& j = by[{i, gauss::EstimatorKind::kJsd}];
      std::size_t wins = 0;
      for (std::size_t s = 0; s < m.size(); ++s) {
        if (j[s]->gradient_variance < m[s]->gradient_variance) ++wins;
      }
      const bool ok = static_cast<double>(wins) >= p.quorum * static_cast<double>(m.size()) - 1e-12;
      variance_ok = variance_ok && ok;
      variance_detail += (variance_detail.empty() ? "" : ", ") + std::string("rho=") +
                         rho_tag(p.rhos[i]) + " " + std::to_string(wins) + "/" +
                         std::to_string(m.size());
    }
  }
  out.write("gauss_summary.csv", summary.str());
  if (p.svg) out.write_charts(summary.str(), "gauss_summary");

  if (has_mine) {
    result.checks.push_back({"mine_accuracy", accurate,
                             accuracy_detail + " (tolerance " + fmt("%g", p.tolerance) + ")"});
  }
  if (variance_checked) {
    result.checks.push_back({"jsd_lower_variance", variance_ok,
                             variance_detail + " seeds with JSD below MINE"});
  }
}

// ---- starvation -----------------------------------------------------------

struct StarvationPlan {
  starvation::StarvationProbe probe;
  std::size_t prompts = 4;
  std::size_t responses = 10;
  std::vector<double> pi_stars;
  std::vector<std::uint64_t> seeds;
  double slope_min = 0.9;
  bool svg = true;
};

StarvationPlan read_starvation(SectionReader& r) {
  StarvationPlan p;
  p.probe.kind = starvation::parse_critic_kind(r.text("critic", "lipschitz"));
  p.probe.lipschitz = r.number("lipschitz", 1.0);
  p.probe.x_star = as_size(r.integer("x_star", 0));
  p.probe.y_star = as_size(r.integer("y_star", 0));
  p.probe.support_condition = r.flag("support_condition", true);
  p.probe.normalization = parse_normalization(r.text("normalization", "per_prompt"));
  p.prompts = as_size(r.integer("prompts", p.prompts));
  p.responses = as_size(r.integer("responses", p.responses));
  p.pi_stars = r.numbers("pi_stars", {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6});
  p.seeds = seed_range(r, 1);
  p.slope_min = r.number("slope_min", p.slope_min);
  p.svg = r.flag("svg", true);
  if (p.probe.x_star >= p.prompts || p.probe.y_star >= p.responses) {
    throw ConfigError("x_star / y_star outside the prompts x responses grid");
  }
  if (p.responses < 2) throw ConfigError("responses must be at least 2");
  if (!(p.probe.lipschitz > 0.0)) throw ConfigError("lipschitz must be positive");
  for (double v : p.pi_stars) {
    if (!(v > 0.0 && v < 0.5)) throw ConfigError("pi_stars must lie in (0, 0.5)");
  }
  return p;
}

void run_starvation(const StarvationPlan& p, std::size_t jobs, Outputs& out, RunResult& result) {
  using starvation::CriticKind;
  const bool sweep = p.probe.kind == CriticKind::kLipschitz && p.probe.support_condition;
  const std::size_t n = p.seeds.size();
  std::vector<starvation::DirectionalDerivative> derivs(n);
  std::vector<double> inner(n);
  std::vector<std::vector<starvation::SweepRow>> sweeps(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const auto inst = starvation::random_instance(p.probe, p.prompts, p.responses, p.seeds[i]);
    derivs[i] = starvation::dv_directional_derivative(p.probe, inst);
    inner[i] = starvation::inner_product_form(p.probe, inst);
    if (sweep) sweeps[i] = starvation::starvation_sweep(p.probe, inst, p.pi_stars, p.seeds[i]);
  });

  const std::string kind = starvation::critic_kind_name(p.probe.kind);
  io::CsvBuilder csv({"seed", "critic_kind", "autodiff", "decomposition", "inner_product", "objective"});
  double worst_gap = 0.0;
  double worst_abs = 0.0;
  result.summary_header = {"seed", "critic_kind", "d_objective_du", "slope"};
  for (std::size_t i = 0; i < n; ++i) {
    csv.row({std::to_string(p.seeds[i]), kind, io::format_double(derivs[i].autodiff),
             io::format_double(derivs[i].decomposition), io::format_double(inner[i]),
             io::format_double(derivs[i].objective)});
    worst_gap = std::max(worst_gap, std::abs(derivs[i].autodiff - derivs[i].decomposition));
    worst_abs = std::max(worst_abs, std::abs(derivs[i].autodiff));
    result.summary_rows.push_back({std::to_string(p.seeds[i]), kind, fmt("%.3e", derivs[i].autodiff),
                                   sweep ? fmt("%.4f", starvation::log_log_slope(sweeps[i])) : "-"});
  }
  out.write("starvation_derivatives.csv", csv.str());
  result.checks.push_back({"autodiff_matches_decomposition", worst_gap <= 1e-10,
                           "max gap " + fmt("%.3g", worst_gap)});
  if (p.probe.kind == CriticKind::kThetaIndependent) {
    result.checks.push_back({"derivative_vanishes", worst_abs <= 1e-12, "max |dI/du| " + fmt("%.3g", worst_abs)});
  } else if (p.probe.kind == CriticKind::kLogRatio && p.probe.support_condition) {
    result.checks.push_back({"derivative_vanishes", worst_abs <= 1e-10, "max |dI/du| " + fmt("%.3g", worst_abs)});
  }

  if (sweep) {
    std::vector<starvation::SweepRow> all;
    std::size_t violations = 0;
    std::size_t shallow = 0;
    double min_slope = 1e300;
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& row : sweeps[i]) {
        if (row.measured > row.bound + 1e-10) ++violations;
        all.push_back(row);
      }
      const double slope = starvation::log_log_slope(sweeps[i]);
      min_slope = std::min(min_slope, slope);
      if (slope < p.slope_min) ++shallow;
      if (p.svg) {
        out.write_charts(starvation::sweep_csv(sweeps[i]),
                         "starvation_sweep_seed" + std::to_string(p.seeds[i]));
      }
    }
    out.write("starvation_sweep.csv", starvation::sweep_csv(all));
    result.checks.push_back({"bound_holds", violations == 0,
                             std::to_string(violations) + " of " + std::to_string(all.size()) +
                                 " rows exceed 2 L pi*"});
    result.checks.push_back({"log_log_slope", shallow == 0,
                             "min slope " + fmt("%.4f", min_slope) + " (minimum " +
                                 fmt("%g", p.slope_min) + ")"});
  }
}

// ---- gradcheck ------------------------------------------------------------

struct GradcheckPlan {
  std::uint64_t seed = 0;
  std::size_t points = 1000;
  std::size_t instances = 20;
  double tolerance = 1e-5;
};

GradcheckPlan read_gradcheck(SectionReader& r) {
  GradcheckPlan p;
  p.seed = r.seed();
  p.points = as_size(r.integer("points", p.points));
  p.instances = as_size(r.integer("instances", p.instances));
  p.tolerance = r.number("tolerance", p.tolerance);
  if (p.points == 0 || p.instances == 0) throw ConfigError("points and instances must be positive");
  return p;
}

using GraphBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

double tape_gradient_error(const GraphBuilder& build, const std::vector<Matrix>& params) {
  Tape tape;
  std::vector<Var> vars;
  for (const Matrix& m : params) vars.push_back(tape.parameter(m));
  tape.backward(build(tape, vars));
  std::vector<double> analytic;
  std::vector<double> point;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const Matrix& g = tape.grad(vars[i]);
    analytic.insert(analytic.end(), g.values().begin(), g.values().end());
    point.insert(point.end(), params[i].values().begin(), params[i].values().end());
  }
  auto f = [&](std::span<const double> at) {
    Tape t;
    std::vector<Var> v;
    std::size_t offset = 0;
    for (const Matrix& m : params) {
      Matrix copy(m.rows(), m.cols());
      for (std::size_t k = 0; k < copy.size(); ++k) copy[k] = at[offset + k];
      offset += copy.size();
      v.push_back(t.parameter(std::move(copy)));
    }
    return build(t, v).item();
  };
  const auto coarse = diff::finite_difference_gradient(f, point, 1e-3);
  const auto fine = diff::finite_difference_gradient(f, point, 5e-4);
  double worst = 0.0;
  for (std::size_t i = 0; i < fine.size(); ++i) {
    const double fd = (4.0 * fine[i] - coarse[i]) / 3.0;
    worst = std::max(worst, diff::relative_error(analytic[i], fd, 1e-4));
  }
  return worst;
}

Matrix uniform_matrix(std::size_t r, std::size_t c, Rng& rng, double lo, double hi) {
  Matrix m(r, c);
  for (double& v : m.values()) v = lo + (hi - lo) * uniform01(rng);
  return m;
}

policy::ConditionalTable random_table(std::size_t prompts, std::size_t responses, Rng& rng) {
  Matrix m = uniform_matrix(prompts, responses, rng, 0.05, 1.0);
  for (std::size_t x = 0; x < prompts; ++x) {
    double s = 0.0;
    for (double v : m.row(x)) s += v;
    for (double& v : m.row(x)) v /= s;
  }
  return policy::ConditionalTable(std::move(m), 1e-10);
}

double log_uniform(Rng& rng, double lo) { return std::exp(std::log(lo) * uniform01(rng)); }

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  double max_error = 0.0;
};

SuiteResult probability_suite(losses::LossMethod method, const GradcheckPlan& p) {
  SuiteResult s{losses::method_name(method) + "_probability_grads", p.points, 0.0};
  Rng rng = make_stream(p.seed, "gradcheck." + s.name);
  for (std::size_t i = 0; i < p.points; ++i) {
    const double pw = log_uniform(rng, 0.01);
    const double pl = log_uniform(rng, 0.01);
    const double rw = log_uniform(rng, 0.01);
    const double rl = log_uniform(rng, 0.01);
    const double beta = log_uniform(rng, 0.01);
    auto loss = [&](double a, double b) {
      const auto r = losses::LogRatios::from_probs(a, b, rw, rl, beta);
      return method == losses::LossMethod::kDpo ? losses::dpo_loss(r, beta) : losses::mio_loss(r, beta);
    };
    // Central differences in log coordinates, Richardson-combined.
    auto f = [&](std::span<const double> v) { return loss(std::exp(v[0]), std::exp(v[1])); };
    const std::vector<double> at{std::log(pw), std::log(pl)};
    const auto coarse = diff::finite_difference_gradient(f, at, 1e-3);
    const auto fine = diff::finite_difference_gradient(f, at, 5e-4);
    const double fd_w = (4.0 * fine[0] - coarse[0]) / 3.0 / pw;
    const double fd_l = (4.0 * fine[1] - coarse[1]) / 3.0 / pl;
    const losses::ProbabilityGrads g = method == losses::LossMethod::kDpo
                                           ? losses::dpo_analytic_grads(pw, pl, rw, rl, beta)
                                           : losses::mio_analytic_grads(pw, pl, rw, rl, beta);
    s.max_error = std::max({s.max_error, diff::relative_error(g.d_plus, fd_w, 1e-6),
                            diff::relative_error(g.d_minus, fd_l, 1e-6)});
  }
  return s;
}

SuiteResult preference_tape_suite(losses::LossMethod method, const GradcheckPlan& p) {
  SuiteResult s{losses::method_name(method) + "_batch_loss_tape", p.instances, 0.0};
  Rng rng = make_stream(p.seed, "gradcheck." + s.name);
  for (std::size_t i = 0; i < p.instances; ++i) {
    const std::size_t k = 1 + uniform_index(rng, 6);
    losses::LossConfig config{method, log_uniform(rng, 0.05) * 4.0};
    std::vector<double> ref_w(k);
    std::vector<double> ref_l(k);
    for (std::size_t j = 0; j < k; ++j) {
      ref_w[j] = std::log(log_uniform(rng, 0.01));
      ref_l[j] = std::log(log_uniform(rng, 0.01));
    }
    const Matrix lw = uniform_matrix(k, 1, rng, -4.0, -0.05);
    const Matrix ll = uniform_matrix(k, 1, rng, -4.0, -0.05);
    s.max_error = std::max(s.max_error, tape_gradient_error(
        [&](Tape&, const std::vector<Var>& v) {
          return losses::preference_loss_on(config, v[0], v[1], ref_w, ref_l);
        },
        {lw, ll}));
  }
  return s;
}

SuiteResult dv_tape_suite(estimators::Normalization norm, const GradcheckPlan& p) {
  SuiteResult s{"dv_bound_tape_" + estimators::normalization_name(norm), p.instances, 0.0};
  Rng rng = make_stream(p.seed, "gradcheck." + s.name);
  for (std::size_t i = 0; i < p.instances; ++i) {
    const std::size_t prompts = 1 + uniform_index(rng, 4);
    const std::size_t responses = 2 + uniform_index(rng, 6);
    std::vector<double> weights(prompts, 1.0 / static_cast<double>(prompts));
    const auto spec = estimators::mixed_spec(weights, random_table(prompts, responses, rng),
                                             random_table(prompts, responses, rng));
    const Matrix scores = uniform_matrix(spec.support().size(), 1, rng, -3.0, 3.0);
    s.max_error = std::max(s.max_error, tape_gradient_error(
        [&](Tape&, const std::vector<Var>& v) { return estimators::dv_bound_on(spec, v[0], norm); },
        {scores}));
  }
  return s;
}

SuiteResult mlp_policy_suite(const GradcheckPlan& p) {
  SuiteResult s{"mlp_policy_log_probs", p.instances, 0.0};
  Rng rng = make_stream(p.seed, "gradcheck." + s.name);
  for (std::size_t i = 0; i < p.instances; ++i) {
    const std::size_t prompts = 2 + uniform_index(rng, 3);
    const std::size_t responses = 3 + uniform_index(rng, 5);
    diff::Mlp net(prompts, 8, responses, rng);
    const Matrix weights = uniform_matrix(prompts, responses, rng, -1.0, 1.0);
    s.max_error = std::max(s.max_error, tape_gradient_error(
        [&](Tape& t, const std::vector<Var>& v) {
          const Var logits = diff::Mlp::forward(v, t.constant(Matrix::identity(prompts)));
          return diff::sum(diff::log_softmax_rows(logits) * t.constant(weights));
        },
        net.parameters()));
  }
  return s;
}

void run_gradcheck(const GradcheckPlan& p, Outputs& out, RunResult& result) {
  std::vector<SuiteResult> suites{
      probability_suite(losses::LossMethod::kDpo, p),
      probability_suite(losses::LossMethod::kMio, p),
      preference_tape_suite(losses::LossMethod::kDpo, p),
      preference_tape_suite(losses::LossMethod::kMio, p),
      dv_tape_suite(estimators::Normalization::kPerPrompt, p),
      dv_tape_suite(estimators::Normalization::kPooled, p),
      mlp_policy_suite(p),
  };
  io::CsvBuilder csv({"suite", "cases", "max_relative_error", "tolerance", "pass"});
  csv.comment("seed=" + std::to_string(p.seed));
  result.summary_header = {"suite", "cases", "max_relative_error", "result"};
  double worst = 0.0;
  std::string worst_suite;
  for (const SuiteResult& s : suites) {
    const bool ok = s.max_error < p.tolerance;
    csv.row({s.name, std::to_string(s.cases), io::format_double(s.max_error),
             io::format_double(p.tolerance), ok ? "true" : "false"});
    result.summary_rows.push_back({s.name, std::to_string(s.cases), fmt("%.3e", s.max_error), pass_word(ok)});
    if (s.max_error >= worst) {
      worst = s.max_error;
      worst_suite = s.name;
    }
  }
  out.write("gradcheck.csv", csv.str());
  result.checks.push_back({"max_relative_error", worst < p.tolerance,
                           fmt("%.3e", worst) + " in " + worst_suite + " (tolerance " +
                               fmt("%g", p.tolerance) + ")"});
}

// ---- report ---------------------------------------------------------------

void run_report(const fs::path& input, Outputs& out, RunResult& result) {
  if (!fs::is_directory(input)) throw ConfigError("report input '" + input.string() + "' is not a directory");
  std::vector<fs::path> csvs;
  for (const auto& entry : fs::directory_iterator(input)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") csvs.push_back(entry.path());
  }
  std::sort(csvs.begin(), csvs.end());
  result.summary_header = {"input", "charts"};
  std::size_t rendered = 0;
  for (const fs::path& path : csvs) {
    const io::CsvTable table = io::parse_csv(io::read_file(path));
    const auto charts = charts_for(table, path.stem().string());
    for (const NamedChart& c : charts) out.write(c.file, render_svg(table, c.spec));
    rendered += charts.size();
    result.summary_rows.push_back({path.filename().string(),
                                   charts.empty() ? "skipped (unknown schema)" : std::to_string(charts.size())});
  }
  result.checks.push_back({"charts_rendered", rendered > 0,
                           std::to_string(rendered) + " charts from " + std::to_string(csvs.size()) +
                               " CSV files"});
}

}  // namespace

bool RunResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

const char* artifact_version() { return INFOALIGN_VERSION; }

std::vector<NamedChart> charts_for(const io::CsvTable& table, const std::string& stem) {
  std::vector<NamedChart> out;
  if (has_columns(table, {"step", "chosen_mean", "rejected_mean", "unseen_mean"})) {
    out.push_back({stem + ".svg",
                   {stem, "step", {"chosen_mean", "rejected_mean", "unseen_mean"}, "step",
                    "mean probability", false, true}});
  } else if (has_columns(table, {"pi_star", "measured", "bound"})) {
    out.push_back({stem + ".svg",
                   {stem, "pi_star", {"measured", "bound"}, "pi*", "|dI/du|", true, true}});
  } else if (has_columns(table, {"rho", "analytic_mi"})) {
    std::vector<std::string> estimates{"analytic_mi"};
    std::vector<std::string> variances;
    for (const std::string& h : table.header) {
      if (h.size() > 9 && h.compare(h.size() - 9, 9, "_estimate") == 0) estimates.push_back(h);
      if (h.size() > 9 && h.compare(h.size() - 9, 9, "_variance") == 0) variances.push_back(h);
    }
    out.push_back({stem + ".svg", {stem, "rho", estimates, "rho", "nats"}});
    if (!variances.empty()) {
      out.push_back({stem + "_variance.svg",
                     {stem + " gradient variance", "rho", variances, "rho", "variance", false, true}});
    }
  } else if (has_columns(table, {"step", "estimate"})) {
    out.push_back({stem + ".svg", {stem, "step", {"estimate"}, "step", "estimate"}});
  }
  return out;
}

namespace {

struct Plans {
  ToyPlan toy;
  GaussPlan gauss;
  StarvationPlan starvation;
  GradcheckPlan gradcheck;
  fs::path report_input;
  std::string canonical;
};

Plans make_plans(const ExperimentConfig& config) {
  const std::string name = subcommand_name(config.subcommand);
  if (config.jobs == 0) throw ConfigError("jobs must be positive");
  SectionReader reader(config, name);
  Plans p;
  try {
    switch (config.subcommand) {
      case Subcommand::kToy: p.toy = read_toy(reader); break;
      case Subcommand::kGauss: p.gauss = read_gauss(reader); break;
      case Subcommand::kStarvation: p.starvation = read_starvation(reader); break;
      case Subcommand::kGradcheck: p.gradcheck = read_gradcheck(reader); break;
      case Subcommand::kReport: p.report_input = reader.text("input", config.out_dir.string()); break;
    }
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  reader.finish();
  p.canonical = "subcommand=" + name + "\n" + reader.canonical();
  return p;
}

}  // namespace

std::string resolve_config(const ExperimentConfig& config) { return make_plans(config).canonical; }

RunResult run(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const std::string name = subcommand_name(config.subcommand);
  const Plans plans = make_plans(config);

  RunResult result;
  result.manifest.subcommand = name;
  result.manifest.version = artifact_version();
  result.manifest.config = plans.canonical;
  result.manifest.config_hash = fnv1a64(result.manifest.config);

  Outputs out(config.out_dir);
  switch (config.subcommand) {
    case Subcommand::kToy: run_toy(plans.toy, config.jobs, out, result); break;
    case Subcommand::kGauss: run_gauss(plans.gauss, config.jobs, out, result); break;
    case Subcommand::kStarvation: run_starvation(plans.starvation, config.jobs, out, result); break;
    case Subcommand::kGradcheck: run_gradcheck(plans.gradcheck, out, result); break;
    case Subcommand::kReport: run_report(plans.report_input, out, result); break;
  }

  result.manifest.files = out.files();
  for (const std::string& f : result.manifest.files) {
    if (!fs::exists(config.out_dir / f)) throw IoError("listed output " + f + " is missing");
  }
  result.manifest.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  io::atomic_write(config.out_dir / ("manifest_" + name + ".txt"), manifest_text(result.manifest));
  return result;
}

std::string manifest_text(const RunManifest& m) {
  std::string out;
  out += "version: " + m.version + "\n";
  out += "subcommand: " + m.subcommand + "\n";
  out += "config_hash: " + hex64(m.config_hash) + "\n";
  out += "duration_seconds: " + fmt("%.3f", m.duration_seconds) + "\n";
  out += "config:\n";
  std::size_t start = 0;
  while (start < m.config.size()) {
    const std::size_t end = m.config.find('\n', start);
    out += "  " + m.config.substr(start, end - start) + "\n";
    if (end == std::string::npos) break;
    start = end + 1;
  }
  out += "files: " + std::to_string(m.files.size()) + "\n";
  for (const std::string& f : m.files) out += "  " + f + "\n";
  return out;
}

std::string format_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string v = c < cells.size() ? cells[c] : "";
      s += (c ? "  " : "") + v + std::string(width[c] - v.size(), ' ');
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + "\n";
  };
  std::string out = line(header);
  std::string rule;
  for (std::size_t c = 0; c < width.size(); ++c) rule += (c ? "  " : "") + std::string(width[c], '-');
  out += rule + "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

std::string format_report(const RunResult& result) {
  std::string out;
  if (!result.summary_header.empty()) out += format_table(result.summary_header, result.summary_rows) + "\n";
  for (const Check& c : result.checks) out += pass_word(c.passed) + "  " + c.name + ": " + c.detail + "\n";
  out += result.passed() ? "all checks passed\n" : "FAILED:";
  if (!result.passed()) {
    for (const Check& c : result.checks) {
      if (!c.passed) out += " " + c.name;
    }
    out += "\n";
  }
  return out;
}

}  // namespace infoalign::cli
