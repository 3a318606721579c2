#pragma once

// Directional derivative of the exact mixed-pool DV objective along the
// logit u = s(x*, y*) of a target response, for tabular softmax policies.

#include <cstdint>
#include <string>
#include <vector>

#include "infoalign/critics.hpp"
#include "infoalign/estimators.hpp"
#include "infoalign/policy.hpp"

namespace infoalign::starvation {

using diff::Matrix;
using policy::ConditionalTable;

enum class CriticKind { kThetaIndependent, kLogRatio, kLipschitz };
std::string critic_kind_name(CriticKind k);
CriticKind parse_critic_kind(const std::string& name);

struct StarvationProbe {
  std::size_t x_star = 0;
  std::size_t y_star = 0;
  CriticKind kind = CriticKind::kLogRatio;
  double lipschitz = 1.0;
  // Require pi_chosen(y*|x*) = pi_rejection(y*|x*) = 0.
  bool support_condition = true;
  estimators::Normalization normalization = estimators::Normalization::kPerPrompt;
};

struct Instance {
  Matrix logits;  // tabular pi_theta
  ConditionalTable reference;
  ConditionalTable chosen;
  ConditionalTable rejection;
  std::vector<double> prompt_weights;
  critics::Critic critic;
};

// Random instance: Gaussian logits, a reference with zero mass at (x*, y*)
// when the support condition is on, chosen / rejection as energy
// reweightings of the reference, and a critic of the probe's kind (a random
// table, the log-ratio critic against the reference, or a random base plus
// L tanh(log pi)).
Instance random_instance(const StarvationProbe& probe, std::size_t prompts, std::size_t responses,
                         std::uint64_t seed);

struct DirectionalDerivative {
  double autodiff = 0.0;
  double decomposition = 0.0;  // (A) - (B)
  double term_a = 0.0;
  double term_b = 0.0;
  double objective = 0.0;
};

// Throws DomainError when the support condition is requested but violated.
DirectionalDerivative dv_directional_derivative(const StarvationProbe& probe, const Instance& inst);

// The mixed-pool DV objective as a function of the tabular logits.
double dv_objective(const StarvationProbe& probe, const Instance& inst, const Matrix& logits);

// <grad_theta I_DV, grad_theta log pi(y*|x*)> over all logits. For tabular
// softmax this equals g(x*,y*) - sum_y pi(y|x*) g(x*,y) with g = dI/ds.
double inner_product_form(const StarvationProbe& probe, const Instance& inst);

// Logits of prompt x* shifted so pi(y*|x*) = pi_star, others untouched.
Matrix logits_with_target(const Matrix& logits, std::size_t x_star, std::size_t y_star,
                          double pi_star);

struct SweepRow {
  double pi_star = 0.0;
  double measured = 0.0;  // |dI/du|
  double bound = 0.0;     // 2 L pi_star
  double lipschitz = 0.0;
  std::string critic_kind;
  std::uint64_t seed = 0;
};

// Requires a Lipschitz probe with the support condition; pi_star in (0, 0.5).
std::vector<SweepRow> starvation_sweep(const StarvationProbe& probe, const Instance& inst,
                                       const std::vector<double>& pi_stars, std::uint64_t seed);

// Least-squares slope of log(measured) on log(pi_star).
double log_log_slope(const std::vector<SweepRow>& rows);

// pi_star,measured,bound,L,critic_kind,seed
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace infoalign::starvation
