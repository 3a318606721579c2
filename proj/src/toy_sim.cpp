#include "infoalign/toy_sim.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "infoalign/errors.hpp"
#include "infoalign/io.hpp"

namespace infoalign::toy {
namespace {

double mean_over(const policy::ConditionalTable& pi, const std::vector<std::size_t>& set) {
  if (set.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t x = 0; x < pi.num_prompts(); ++x) {
    for (std::size_t y : set) total += pi(x, y);
  }
  return total / static_cast<double>(pi.num_prompts() * set.size());
}

std::string snapshot(const policy::PolicyTable& p) {
  const Matrix lp = p.log_probs();
  std::string s;
  for (std::size_t x = 0; x < lp.rows(); ++x) {
    s += x ? " | " : "";
    for (std::size_t y = 0; y < lp.cols(); ++y) {
      s += (y ? " " : "") + io::format_double(std::exp(lp(x, y)));
    }
  }
  return s;
}

void fit_to_target(policy::PolicyTable& theta, const Matrix& target, const ScenarioConfig& config,
                   Scenario& out) {
  Matrix log_target = target;
  for (double& v : log_target.values()) v = std::log(v);
  const double inv_n = 1.0 / static_cast<double>(target.size());
  diff::Optimizer opt({diff::Method::kAdam, config.fit_step_size});
  for (std::size_t it = 0;; ++it) {
    diff::Tape tape;
    std::vector<diff::Var> bound;
    diff::Var lp = theta.log_probs_on(tape, bound);
    out.fit_error = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
      out.fit_error = std::max(out.fit_error, std::abs(lp.value()[i] - log_target[i]));
    }
    out.fit_iterations = it;
    if (out.fit_error < config.fit_tolerance) return;
    if (it == config.fit_max_iterations) {
      throw ConvergenceError("MLP initialization fit stopped at max |log error| " +
                             io::format_double(out.fit_error) + " after " + std::to_string(it) +
                             " iterations");
    }
    diff::Var loss = diff::scale(diff::sum(diff::square(lp - tape.constant(log_target))), inv_n);
    tape.backward(loss);
    std::vector<Matrix> grads;
    for (diff::Var v : bound) grads.push_back(tape.grad(v));
    opt.step(theta.mutable_parameters(), grads);
  }
}

}  // namespace

void ResponseCategories::validate(std::size_t responses) const {
  std::set<std::size_t> seen;
  for (const auto* set : {&chosen, &rejected, &unseen}) {
    for (std::size_t y : *set) {
      if (y >= responses || !seen.insert(y).second) {
        throw DomainError("response categories must partition the responses");
      }
    }
  }
  if (seen.size() != responses) throw DomainError("response categories must cover every response");
  if (rejected.empty()) throw DomainError("rejected category is empty");
}

std::string negative_pool_name(NegativePool p) {
  return p == NegativePool::kRejected ? "rejected" : "non_optimal";
}

NegativePool parse_negative_pool(const std::string& name) {
  if (name == "rejected") return NegativePool::kRejected;
  if (name == "non_optimal") return NegativePool::kNonOptimal;
  throw ConfigError("unknown negative pool '" + name + "' (expected rejected or non_optimal)");
}

void ScenarioConfig::validate() const {
  if (scenario < 1 || scenario > 4) throw ConfigError("scenario must be 1, 2, 3 or 4");
  if (!(small_mass > 0.0) || small_mass >= 1.0) throw ConfigError("small_mass must lie in (0, 1)");
  if (batch == 0) throw ConfigError("batch must be positive");
  if (hidden == 0) throw ConfigError("hidden must be positive");
  if (prompts == 0 || prompts > categories.chosen.size()) {
    throw ConfigError("each prompt needs its own optimal response in the chosen set");
  }
  for (std::size_t x = 0; x < prompts; ++x) {
    if (std::find(categories.chosen.begin(), categories.chosen.end(), x) == categories.chosen.end()) {
      throw ConfigError("optimal response " + std::to_string(x) + " is not in the chosen set");
    }
  }
  loss.validate();
  categories.validate(responses);
}

Matrix target_distribution(const ScenarioConfig& config) {
  config.validate();
  const bool chosen_small = config.scenario == 1 || config.scenario == 3;
  const bool rejected_small = config.scenario == 1 || config.scenario == 2;
  std::vector<bool> small(config.responses, false);
  if (chosen_small) for (std::size_t y : config.categories.chosen) small[y] = true;
  if (rejected_small) for (std::size_t y : config.categories.rejected) small[y] = true;
  const auto n_small = static_cast<std::size_t>(std::count(small.begin(), small.end(), true));
  const std::size_t n_normal = config.responses - n_small;
  const double residual = 1.0 - config.small_mass * static_cast<double>(n_small);
  if (n_normal == 0 || !(residual > 0.0)) {
    throw DomainError("infeasible scenario masses: small responses take all the probability");
  }
  const double normal = residual / static_cast<double>(n_normal);
  if (normal <= config.small_mass && n_small > 0) {
    throw DomainError("infeasible scenario masses: normal share is not larger than small_mass");
  }
  Matrix t(config.prompts, config.responses);
  for (std::size_t x = 0; x < config.prompts; ++x) {
    for (std::size_t y = 0; y < config.responses; ++y) t(x, y) = small[y] ? config.small_mass : normal;
  }
  return t;
}

Scenario build_scenario(const ScenarioConfig& config) {
  Matrix target = target_distribution(config);
  Scenario s{policy::PolicyTable::tabular(Matrix(1, 1)), policy::PolicyTable::tabular(Matrix(1, 1)),
             target, 0, 0.0};
  if (config.parameterization == policy::Parameterization::kTabular) {
    Matrix logits = target;
    for (double& v : logits.values()) v = std::log(v);
    s.theta = policy::PolicyTable::tabular(std::move(logits));
    const Matrix lp = s.theta.log_probs();
    for (std::size_t i = 0; i < lp.size(); ++i) {
      s.fit_error = std::max(s.fit_error, std::abs(lp[i] - std::log(target[i])));
    }
  } else {
    Rng rng = make_stream(config.seed, "toy.init", static_cast<std::uint64_t>(config.scenario));
    s.theta = policy::PolicyTable::mlp(config.prompts, config.responses, config.hidden, rng);
    fit_to_target(s.theta, target, config, s);
  }
  s.reference = s.theta.frozen_copy();
  return s;
}

std::vector<losses::PreferenceTriple> make_batch(const ResponseCategories& categories,
                                                 NegativePool pool, std::size_t prompts,
                                                 std::size_t batch, Rng& rng) {
  std::vector<losses::PreferenceTriple> out;
  out.reserve(batch);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < batch; ++i) {
    const std::size_t x = i % prompts;
    if (pool == NegativePool::kRejected) {
      candidates = categories.rejected;
    } else {
      candidates.clear();
      for (std::size_t y : categories.chosen) if (y != x) candidates.push_back(y);
      candidates.insert(candidates.end(), categories.rejected.begin(), categories.rejected.end());
    }
    const std::size_t y_l = candidates[uniform_index(rng, candidates.size())];
    out.push_back({x, x, y_l});
  }
  return out;
}

CategoryMeans category_means(const policy::ConditionalTable& pi, const ResponseCategories& c) {
  return {mean_over(pi, c.chosen), mean_over(pi, c.rejected), mean_over(pi, c.unseen)};
}

double normalization_error(const CategoryMeans& m, const ResponseCategories& c) {
  return std::abs(m.chosen * static_cast<double>(c.chosen.size()) +
                  m.rejected * static_cast<double>(c.rejected.size()) +
                  m.unseen * static_cast<double>(c.unseen.size()) - 1.0);
}

CategoryMeans TrajectoryLog::final_means() const {
  if (rows.empty()) return initial;
  return {rows.back().chosen_mean, rows.back().rejected_mean, rows.back().unseen_mean};
}

TrajectoryLog run_training(const ScenarioConfig& config) {
  config.validate();
  Scenario s = build_scenario(config);
  const Matrix log_ref = s.reference.log_probs();
  const std::size_t R = config.responses;

  TrajectoryLog log;
  log.method = losses::method_name(config.loss.method);
  log.scenario = config.scenario;
  log.seed = config.seed;
  log.parameterization = policy::parameterization_name(config.parameterization);
  log.fit_iterations = s.fit_iterations;
  log.initial = category_means(s.theta.distribution(), config.categories);
  log.max_normalization_error = normalization_error(log.initial, config.categories);
  log.rows.reserve(config.steps);

  Rng rng = make_stream(config.seed, "toy.batch", static_cast<std::uint64_t>(config.scenario));
  diff::Optimizer opt(config.optimizer);
  std::vector<std::uint32_t> idx_w(config.batch);
  std::vector<std::uint32_t> idx_l(config.batch);
  std::vector<double> ref_w(config.batch);
  std::vector<double> ref_l(config.batch);

  for (std::size_t step = 1; step <= config.steps; ++step) {
    const auto batch = make_batch(config.categories, config.negative_pool, config.prompts,
                                  config.batch, rng);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      idx_w[i] = static_cast<std::uint32_t>(batch[i].x * R + batch[i].y_w);
      idx_l[i] = static_cast<std::uint32_t>(batch[i].x * R + batch[i].y_l);
      ref_w[i] = log_ref[idx_w[i]];
      ref_l[i] = log_ref[idx_l[i]];
    }

    diff::Tape tape;
    std::vector<diff::Var> bound;
    diff::Var lp = s.theta.log_probs_on(tape, bound);
    diff::Var loss = losses::preference_loss_on(config.loss, diff::gather(lp, idx_w),
                                                diff::gather(lp, idx_l), ref_w, ref_l);
    const double loss_value = loss.item();
    if (!std::isfinite(loss_value)) {
      throw NumericError("non-finite loss at step " + std::to_string(step) +
                         "; policy: " + snapshot(s.theta));
    }
    tape.backward(loss);
    std::vector<Matrix> grads;
    grads.reserve(bound.size());
    for (diff::Var v : bound) grads.push_back(tape.grad(v));
    opt.step(s.theta.mutable_parameters(), grads);

    const CategoryMeans m = category_means(s.theta.distribution(), config.categories);
    log.max_normalization_error =
        std::max(log.max_normalization_error, normalization_error(m, config.categories));
    log.rows.push_back({step, m.chosen, m.rejected, m.unseen, loss_value});
  }
  log.reference_drift = diff::max_abs_difference(s.reference.log_probs(), log_ref);
  return log;
}

std::string trajectory_csv(const TrajectoryLog& log) {
  io::CsvBuilder csv({"step", "chosen_mean", "rejected_mean", "unseen_mean", "loss"});
  csv.comment("method=" + log.method);
  csv.comment("scenario=" + std::to_string(log.scenario));
  csv.comment("seed=" + std::to_string(log.seed));
  csv.comment("parameterization=" + log.parameterization);
  csv.comment("initial_chosen_mean=" + io::format_double(log.initial.chosen));
  csv.comment("initial_rejected_mean=" + io::format_double(log.initial.rejected));
  csv.comment("initial_unseen_mean=" + io::format_double(log.initial.unseen));
  for (const TrajectoryRow& r : log.rows) {
    csv.row({std::to_string(r.step), io::format_double(r.chosen_mean),
             io::format_double(r.rejected_mean), io::format_double(r.unseen_mean),
             io::format_double(r.loss)});
  }
  return csv.str();
}

void export_trajectory(const TrajectoryLog& log, const std::filesystem::path& path) {
  io::atomic_write(path, trajectory_csv(log));
}

}  // namespace infoalign::toy
