#pragma once

// Critic families T(x, y). Every discrete critic is a function
// T = G(x, y, l) of the policy log-probability l = log pi_theta(y|x):
//   table / neural:  G does not read l
//   log-ratio:       beta (l - log pi_den(y|x)) + c
//   lipschitz:       c(x, y) + L tanh(l)

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "infoalign/diff/matrix.hpp"
#include "infoalign/diff/mlp.hpp"
#include "infoalign/diff/tape.hpp"
#include "infoalign/policy.hpp"

namespace infoalign::critics {

using diff::Matrix;

struct TableCritic {
  Matrix scores;  // P x R
};

// One-hot(x) ++ one-hot(y) input, scalar output.
struct NeuralCritic {
  diff::Mlp net;
  std::size_t prompts = 0;
  std::size_t responses = 0;

  static NeuralCritic make(std::size_t prompts, std::size_t responses, std::size_t hidden, Rng& rng);
  // Network input row for cell (x, y).
  Matrix encode(const std::vector<std::uint32_t>& cells) const;
};

struct LogRatioCritic {
  policy::ConditionalTable denominator;
  double beta = 1.0;
  double offset = 0.0;
};

struct LipschitzCritic {
  Matrix base;  // c(x, y)
  double lipschitz = 1.0;
};

using Critic = std::variant<TableCritic, NeuralCritic, LogRatioCritic, LipschitzCritic>;

std::string critic_kind(const Critic& critic);
bool depends_on_policy(const Critic& critic);

// Score at one cell given l = log pi_theta(y|x).
double critic_score(const Critic& critic, std::size_t x, std::size_t y, double log_pi);

// Scores at the listed flat cells (x * R + y) of a P x R log-probability table.
std::vector<double> critic_scores(const Critic& critic, const Matrix& log_pi,
                                  const std::vector<std::uint32_t>& cells);

// Same on a tape; `log_pi` is a P x R node, the result is k x 1. Critics
// that ignore the policy record constants only.
diff::Var critic_scores_on(const Critic& critic, diff::Var log_pi,
                           const std::vector<std::uint32_t>& cells);

// dG/dl at one cell.
double dscore_dlogpi(const Critic& critic, std::size_t x, std::size_t y, double log_pi);

}  // namespace infoalign::critics
