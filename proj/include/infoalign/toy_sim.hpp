#pragma once

// Toy preference experiment: 4 prompts x 10 responses, the optimal response
// for prompt x is response x, negatives come from the rejected category.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "infoalign/diff/optimizer.hpp"
#include "infoalign/losses.hpp"
#include "infoalign/policy.hpp"
#include "infoalign/rng.hpp"

namespace infoalign::toy {

using diff::Matrix;

struct ResponseCategories {
  std::vector<std::size_t> chosen{0, 1, 2, 3};
  std::vector<std::size_t> rejected{4, 5, 6, 7};
  std::vector<std::size_t> unseen{8, 9};

  // Throws DomainError unless the sets partition {0..responses-1}.
  void validate(std::size_t responses) const;
};

enum class NegativePool {
  kRejected,    // y_l uniform over the rejected set
  kNonOptimal,  // y_l uniform over chosen + rejected minus y_w
};

std::string negative_pool_name(NegativePool p);
NegativePool parse_negative_pool(const std::string& name);

struct ScenarioConfig {
  int scenario = 1;
  double small_mass = 1e-4;
  std::uint64_t seed = 0;
  std::size_t steps = 2000;
  std::size_t batch = 4;
  losses::LossConfig loss;
  policy::Parameterization parameterization = policy::Parameterization::kMlp;
  std::size_t hidden = 64;
  diff::OptimizerConfig optimizer{diff::Method::kPlain, 0.05};
  NegativePool negative_pool = NegativePool::kRejected;
  std::size_t prompts = 4;
  std::size_t responses = 10;
  ResponseCategories categories;
  // MLP initialization fit: Adam on the mean squared log-probability error
  // until the largest absolute log error drops below fit_tolerance.
  double fit_tolerance = 1e-3;
  std::size_t fit_max_iterations = 20000;
  double fit_step_size = 1e-2;

  void validate() const;  // throws ConfigError
};

// Scenario 1: chosen and rejected small. 2: rejected small. 3: chosen small.
// 4: none small. Each small response gets `small_mass`; the remaining mass
// is shared uniformly by the other responses of the prompt.
Matrix target_distribution(const ScenarioConfig& config);

struct Scenario {
  policy::PolicyTable theta;
  policy::PolicyTable reference;
  Matrix target;
  std::size_t fit_iterations = 0;
  double fit_error = 0.0;  // max |log pi - log target|
};

// Throws DomainError for an infeasible mass configuration and
// ConvergenceError if the MLP fit does not reach its tolerance.
Scenario build_scenario(const ScenarioConfig& config);

// `batch` triples; triple i uses prompt i mod prompts and y_w = prompt.
std::vector<losses::PreferenceTriple> make_batch(const ResponseCategories& categories,
                                                 NegativePool pool, std::size_t prompts,
                                                 std::size_t batch, Rng& rng);

struct TrajectoryRow {
  std::size_t step = 0;
  double chosen_mean = 0.0;
  double rejected_mean = 0.0;
  double unseen_mean = 0.0;
  double loss = 0.0;
};

struct CategoryMeans {
  double chosen = 0.0;
  double rejected = 0.0;
  double unseen = 0.0;
};

CategoryMeans category_means(const policy::ConditionalTable& pi, const ResponseCategories& c);
// |chosen*|C| + rejected*|R| + unseen*|U| - 1|
double normalization_error(const CategoryMeans& m, const ResponseCategories& c);

struct TrajectoryLog {
  std::string method;
  int scenario = 0;
  std::uint64_t seed = 0;
  std::string parameterization;
  CategoryMeans initial;
  std::size_t fit_iterations = 0;
  double max_normalization_error = 0.0;
  // Largest change of a reference log-probability over the run.
  double reference_drift = 0.0;
  // Row t holds the loss evaluated before update t and the means after it.
  std::vector<TrajectoryRow> rows;

  CategoryMeans final_means() const;
};

// Deterministic given the config. Throws NumericError naming the step (and
// carrying a probability snapshot) if the loss turns non-finite.
TrajectoryLog run_training(const ScenarioConfig& config);

std::string trajectory_csv(const TrajectoryLog& log);
void export_trajectory(const TrajectoryLog& log, const std::filesystem::path& path);

}  // namespace infoalign::toy
