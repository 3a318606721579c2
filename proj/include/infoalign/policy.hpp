#pragma once

// Finite conditional policies pi(y|x) over a prompt x response grid.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "infoalign/diff/matrix.hpp"
#include "infoalign/diff/mlp.hpp"
#include "infoalign/diff/tape.hpp"
#include "infoalign/rng.hpp"

namespace infoalign::policy {

using diff::Matrix;

// Row-stochastic table; rows are prompts. Exact zeros are allowed, which a
// softmax policy cannot represent, so constructed distributions (chosen,
// rejection, support-restricted references) use this type.
class ConditionalTable {
 public:
  ConditionalTable() = default;
  // Throws DomainError unless entries are finite, nonnegative and every row
  // sums to 1 within `tolerance`.
  explicit ConditionalTable(Matrix probs, double tolerance = 1e-12);

  static ConditionalTable uniform(std::size_t prompts, std::size_t responses);

  std::size_t num_prompts() const { return probs_.rows(); }
  std::size_t num_responses() const { return probs_.cols(); }
  double operator()(std::size_t x, std::size_t y) const { return probs_(x, y); }
  const Matrix& probs() const { return probs_; }

  // Throws DomainError for a zero entry.
  double log_prob(std::size_t x, std::size_t y) const;
  bool strictly_positive() const;

 private:
  Matrix probs_;
};

// 0.5 a + 0.5 b entrywise.
ConditionalTable mixture(const ConditionalTable& a, const ConditionalTable& b);

enum class Parameterization { kTabular, kMlp };

std::string parameterization_name(Parameterization p);
Parameterization parse_parameterization(const std::string& name);

// Softmax policy. Tabular: one P x R logit matrix. MLP: one-hot prompt input
// through a three-layer perceptron to R logits.
class PolicyTable {
 public:
  static PolicyTable tabular(Matrix logits);
  static PolicyTable mlp(std::size_t prompts, std::size_t responses, std::size_t hidden, Rng& rng);

  Parameterization parameterization() const { return kind_; }
  std::size_t num_prompts() const { return prompts_; }
  std::size_t num_responses() const { return responses_; }

  Matrix logits() const;
  Matrix log_probs() const;
  double log_prob(std::size_t x, std::size_t y) const;
  ConditionalTable distribution() const;

  const std::vector<Matrix>& parameters() const;
  // Throws DomainError when frozen.
  std::vector<Matrix>& mutable_parameters();

  // Parameters are copied onto `tape`; the handles come back in `bound`.
  diff::Var logits_on(diff::Tape& tape, std::vector<diff::Var>& bound) const;
  diff::Var log_probs_on(diff::Tape& tape, std::vector<diff::Var>& bound) const;

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  // Independent deep copy; frozen state is kept.
  PolicyTable clone() const { return *this; }
  PolicyTable frozen_copy() const;

 private:
  PolicyTable() = default;

  Parameterization kind_ = Parameterization::kTabular;
  std::size_t prompts_ = 0;
  std::size_t responses_ = 0;
  std::vector<Matrix> tabular_;
  diff::Mlp net_;
  bool frozen_ = false;
};

// d log pi(y|x) / d s(x*, y*) for the softmax parameterization.
double own_logit_derivative(const ConditionalTable& pi, std::size_t x_star, std::size_t y_star,
                            std::size_t y, std::size_t x);
double own_logit_derivative(const PolicyTable& policy, std::size_t x_star, std::size_t y_star,
                            std::size_t y, std::size_t x);

struct Reweighted {
  ConditionalTable table;
  std::vector<double> normalizer;  // Z(x)
};

// pi_out(y|x) = pi_base(y|x) e^{alpha r(x,y)} / Z(x). Zero base mass stays zero.
Reweighted ebm_reweight(const ConditionalTable& base, const Matrix& reward, double alpha);

struct IdentityOptions {
  double damping = 0.5;
  std::size_t max_iterations = 10000;
  double tolerance = 1e-12;
};

struct IdentityReport {
  double residual = 0.0;     // max |T - gamma r|
  double gamma = 0.0;
  std::vector<double> log_z;  // self-consistent log Z(x)
  std::size_t iterations = 0;
  Matrix reward;
  Matrix critic;
};

// Builds r = beta[log pi_theta/pi_ref + log Z] with self-consistent Z, forms
// pi_chosen = ebm_reweight(pi_ref, r, alpha), T = log pi_theta/pi_chosen and
// reports max |T - gamma r| with gamma = (1 - alpha beta)/beta.
// Throws ConvergenceError (with the tail of the residual trace) when the
// fixed point does not settle.
IdentityReport verify_critic_reward_identity(const ConditionalTable& pi_theta,
                                             const ConditionalTable& pi_ref, double alpha,
                                             double beta, const IdentityOptions& options = {});

// Rows of (prompt, response, probability).
std::string policy_csv(const ConditionalTable& table);
void write_policy_csv(const ConditionalTable& table, const std::filesystem::path& path);

}  // namespace infoalign::policy
