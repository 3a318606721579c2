#pragma once

// Mutual-information surrogates. Discrete variants take exact expectations
// over the whole prompt x response grid.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "infoalign/critics.hpp"
#include "infoalign/diff/tape.hpp"
#include "infoalign/policy.hpp"

namespace infoalign::estimators {

using diff::Matrix;
using policy::ConditionalTable;

// How the log-partition term of the DV bound is taken over prompts:
//   per-prompt: sum_x D(x) [E_{joint|x} T - log E_{product|x} e^T]
//   pooled:     E_joint T - log sum_x D(x) E_{product|x} e^T
enum class Normalization { kPerPrompt, kPooled };

std::string normalization_name(Normalization n);

// Measures on the grid: x ~ D, then y ~ joint(.|x) for positives and
// y ~ product(.|x) for the negative / product measure.
struct JointSpec {
  std::vector<double> prompt_weights;
  ConditionalTable joint;
  ConditionalTable product;

  static JointSpec uniform_prompts(ConditionalTable joint, ConditionalTable product);
  void validate() const;
  // Flat cells (x * R + y) where the joint or the product has mass, in
  // increasing order. Scores are indexed by position in this list.
  std::vector<std::uint32_t> support() const;
};

// Joint pi_chosen against the mixed pool pibar = (pi_chosen + pi_rejection) / 2.
JointSpec mixed_spec(std::vector<double> prompt_weights, const ConditionalTable& chosen,
                     const ConditionalTable& rejection);

// E_joint[T] - log E_product[e^T]. `scores` follows spec.support().
// Throws NumericError if a score on the product support exceeds 700.
double dv_bound_exact(const JointSpec& spec, std::span<const double> scores,
                      Normalization norm = Normalization::kPerPrompt);
double dv_bound_exact(const JointSpec& spec, const critics::Critic& critic, const Matrix& log_pi,
                      Normalization norm = Normalization::kPerPrompt);

// dv_bound_exact(mixed_spec(...)) - log 2.
double dv_bound_mixed(const std::vector<double>& prompt_weights, const ConditionalTable& chosen,
                      const ConditionalTable& rejection, const critics::Critic& critic,
                      const Matrix& log_pi, Normalization norm = Normalization::kPerPrompt);

// Tape form of dv_bound_exact; `scores` is a k x 1 node aligned with spec.support().
diff::Var dv_bound_on(const JointSpec& spec, diff::Var scores,
                      Normalization norm = Normalization::kPerPrompt);

// KL(D joint || D product) by direct summation; infinite when joint mass
// falls outside the product support.
double joint_product_kl(const JointSpec& spec);

// mean_i [T+_i - log((1/M) sum e^{T+} + (1/N) sum e^{T-})].
double infonce_estimate(std::span<const double> t_plus, std::span<const double> t_minus);

// log sigma(T+ - T-).
double pairwise_logsigmoid(double t_plus, double t_minus);

using DeltaBuilder = std::function<diff::Var(diff::Tape&, diff::Var theta)>;

struct OppositionReport {
  bool stationary = false;
  double delta = 0.0;
  double inner = 0.0;     // <grad I+, grad I->
  double factor = 0.0;    // sigma(delta) / sigma(-delta)
  double residual = 0.0;  // max |grad I- + factor grad I+|
  std::vector<double> grad_plus;
  std::vector<double> grad_minus;
};

// I+ = log sigma(delta), I- = log sigma(-delta), both differentiated with
// respect to theta (an n x 1 parameter) by the tape.
OppositionReport gradient_opposition_check(const DeltaBuilder& delta, std::span<const double> theta);

// -(1/M) sum sp(-T+) - 0.5 [(1/M) sum sp(T+) + (1/N) sum sp(T-)].
double jsd_objective(std::span<const double> t_plus, std::span<const double> t_minus);

// Exact counterpart: -E_c sp(-T) - 0.5 [E_c sp(T) + E_r sp(T)] with x ~ D.
// `scores` follows mixed_spec(...).support().
double jsd_objective_exact(const std::vector<double>& prompt_weights, const ConditionalTable& chosen,
                           const ConditionalTable& rejection, const critics::Critic& critic,
                           const Matrix& log_pi);

// E_{x~D, y~pi_theta}[T] - sum_x D(x) KL(pi_theta(.|x) || pi_ref(.|x)).
double rlhf_stage2_objective(const std::vector<double>& prompt_weights,
                             const ConditionalTable& pi_theta, const ConditionalTable& pi_ref,
                             const critics::Critic& critic);

double kl_divergence(const std::vector<double>& prompt_weights, const ConditionalTable& p,
                     const ConditionalTable& q);

struct JensenGap {
  double gap = 0.0;           // log E f - E log f
  double taylor_bound = 0.0;  // var / (2 mean^2)
  double mean = 0.0;
  double variance = 0.0;
  double coefficient_of_variation = 0.0;
};

JensenGap jensen_gap(std::span<const double> values, std::span<const double> weights);
JensenGap jensen_gap(std::span<const double> samples);

enum class EstimateKind { kDvExact, kDvMixed, kInfoNce, kPairwise, kJsd };
std::string estimate_kind_name(EstimateKind k);

struct EstimateReport {
  EstimateKind kind = EstimateKind::kDvExact;
  double value = 0.0;
  std::size_t step = 0;
  std::string critic_id;
  std::uint64_t seed = 0;
};

// Header kind,step,value,critic_id,seed. Throws NumericError on a
// non-finite value.
std::string estimate_csv(const std::vector<EstimateReport>& rows);

}  // namespace infoalign::estimators
