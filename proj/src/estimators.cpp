#include "infoalign/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "infoalign/errors.hpp"
#include "infoalign/io.hpp"
#include "infoalign/numeric.hpp"

namespace infoalign::estimators {
namespace {

constexpr double kMaxScore = 700.0;

void check_weights(const std::vector<double>& w, std::size_t prompts) {
  if (w.size() != prompts) throw DomainError("prompt weights do not match the prompt count");
  double total = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("prompt weights must be nonnegative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("prompt weights must sum to 1");
}

void check_score_overflow(double t) {
  if (t > kMaxScore) {
    throw NumericError("critic score " + io::format_double(t) +
                       " exceeds 700; e^T overflows, rescale the critic");
  }
}

}  // namespace

std::string normalization_name(Normalization n) {
  return n == Normalization::kPerPrompt ? "per_prompt" : "pooled";
}

JointSpec JointSpec::uniform_prompts(ConditionalTable joint, ConditionalTable product) {
  const std::size_t P = joint.num_prompts();
  return {std::vector<double>(P, 1.0 / static_cast<double>(P)), std::move(joint),
          std::move(product)};
}

void JointSpec::validate() const {
  if (!joint.probs().same_shape(product.probs())) throw DomainError("JointSpec: shape mismatch");
  check_weights(prompt_weights, joint.num_prompts());
}

std::vector<std::uint32_t> JointSpec::support() const {
  std::vector<std::uint32_t> cells;
  const Matrix& a = joint.probs();
  const Matrix& b = product.probs();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > 0.0 || b[i] > 0.0) cells.push_back(static_cast<std::uint32_t>(i));
  }
  return cells;
}

JointSpec mixed_spec(std::vector<double> prompt_weights, const ConditionalTable& chosen,
                     const ConditionalTable& rejection) {
  JointSpec spec{std::move(prompt_weights), chosen, policy::mixture(chosen, rejection)};
  spec.validate();
  return spec;
}

double dv_bound_exact(const JointSpec& spec, std::span<const double> scores, Normalization norm) {
  spec.validate();
  const std::vector<std::uint32_t> cells = spec.support();
  if (scores.size() != cells.size()) throw DomainError("dv_bound_exact: score count mismatch");
  const std::size_t R = spec.joint.num_responses();
  const std::size_t P = spec.joint.num_prompts();

  double positive = 0.0;
  std::vector<std::vector<double>> log_terms(P);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::size_t x = cells[i] / R;
    const double pj = spec.joint.probs()[cells[i]];
    const double pp = spec.product.probs()[cells[i]];
    const double d = spec.prompt_weights[x];
    if (!std::isfinite(scores[i])) throw NumericError("dv_bound_exact: non-finite critic score");
    positive += d * pj * scores[i];
    if (pp > 0.0 && d > 0.0) {
      check_score_overflow(scores[i]);
      log_terms[x].push_back(scores[i] + std::log(pp));
    }
  }

  if (norm == Normalization::kPerPrompt) {
    double partition = 0.0;
    for (std::size_t x = 0; x < P; ++x) {
      if (spec.prompt_weights[x] > 0.0) partition += spec.prompt_weights[x] * logsumexp(log_terms[x]);
    }
    return positive - partition;
  }
  std::vector<double> pooled;
  for (std::size_t x = 0; x < P; ++x) {
    for (double t : log_terms[x]) pooled.push_back(t + std::log(spec.prompt_weights[x]));
  }
  return positive - logsumexp(pooled);
}

double dv_bound_exact(const JointSpec& spec, const critics::Critic& critic, const Matrix& log_pi,
                      Normalization norm) {
  const std::vector<double> scores = critics::critic_scores(critic, log_pi, spec.support());
  return dv_bound_exact(spec, scores, norm);
}

double dv_bound_mixed(const std::vector<double>& prompt_weights, const ConditionalTable& chosen,
                      const ConditionalTable& rejection, const critics::Critic& critic,
                      const Matrix& log_pi, Normalization norm) {
  return dv_bound_exact(mixed_spec(prompt_weights, chosen, rejection), critic, log_pi, norm) -
         std::numbers::ln2;
}

diff::Var dv_bound_on(const JointSpec& spec, diff::Var scores, Normalization norm) {
  spec.validate();
  const std::vector<std::uint32_t> cells = spec.support();
  if (scores.rows() != cells.size() || scores.cols() != 1) {
    throw DomainError("dv_bound_on: scores must be a k x 1 node aligned with the support");
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (spec.product.probs()[cells[i]] > 0.0) check_score_overflow(scores.value()[i]);
  }
  diff::Tape& tape = scores.tape();
  const std::size_t R = spec.joint.num_responses();
  const std::size_t P = spec.joint.num_prompts();

  std::vector<double> wj(cells.size());
  std::vector<std::vector<std::uint32_t>> idx(P);
  std::vector<std::vector<double>> logw(P);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::size_t x = cells[i] / R;
    const double d = spec.prompt_weights[x];
    wj[i] = d * spec.joint.probs()[cells[i]];
    const double pp = spec.product.probs()[cells[i]];
    if (pp > 0.0 && d > 0.0) {
      idx[x].push_back(static_cast<std::uint32_t>(i));
      logw[x].push_back(norm == Normalization::kPooled ? std::log(d * pp) : std::log(pp));
    }
  }
  diff::Var value = diff::sum(scores * tape.constant(Matrix::column(std::move(wj))));

  if (norm == Normalization::kPerPrompt) {
    for (std::size_t x = 0; x < P; ++x) {
      if (idx[x].empty()) continue;
      diff::Var shifted = diff::gather(scores, idx[x]) + tape.constant(Matrix::column(logw[x]));
      value = value - diff::scale(diff::logsumexp(shifted), spec.prompt_weights[x]);
    }
    return value;
  }
  std::vector<std::uint32_t> all;
  std::vector<double> all_w;
  for (std::size_t x = 0; x < P; ++x) {
    all.insert(all.end(), idx[x].begin(), idx[x].end());
    all_w.insert(all_w.end(), logw[x].begin(), logw[x].end());
  }
  if (all.empty()) throw DomainError("dv_bound_on: product measure has no mass");
  diff::Var shifted = diff::gather(scores, all) + tape.constant(Matrix::column(std::move(all_w)));
  return value - diff::logsumexp(shifted);
}

double kl_divergence(const std::vector<double>& prompt_weights, const ConditionalTable& p,
                     const ConditionalTable& q) {
  if (!p.probs().same_shape(q.probs())) throw DomainError("kl_divergence: shape mismatch");
  check_weights(prompt_weights, p.num_prompts());
  double kl = 0.0;
  for (std::size_t x = 0; x < p.num_prompts(); ++x) {
    if (prompt_weights[x] == 0.0) continue;
    for (std::size_t y = 0; y < p.num_responses(); ++y) {
      const double a = p(x, y);
      if (a == 0.0) continue;
      const double b = q(x, y);
      if (b == 0.0) return std::numeric_limits<double>::infinity();
      kl += prompt_weights[x] * a * (std::log(a) - std::log(b));
    }
  }
  return kl;
}

double joint_product_kl(const JointSpec& spec) {
  spec.validate();
  return kl_divergence(spec.prompt_weights, spec.joint, spec.product);
}

double infonce_estimate(std::span<const double> t_plus, std::span<const double> t_minus) {
  if (t_plus.empty() || t_minus.empty()) throw DomainError("infonce_estimate: empty sample list");
  const double log_m = std::log(static_cast<double>(t_plus.size()));
  const double log_n = std::log(static_cast<double>(t_minus.size()));
  std::vector<double> terms;
  terms.reserve(t_plus.size() + t_minus.size());
  for (double t : t_plus) terms.push_back(t - log_m);
  for (double t : t_minus) terms.push_back(t - log_n);
  const double log_den = logsumexp(terms);
  double total = 0.0;
  for (double t : t_plus) total += t - log_den;
  return total / static_cast<double>(t_plus.size());
}

double pairwise_logsigmoid(double t_plus, double t_minus) { return log_sigmoid(t_plus - t_minus); }

OppositionReport gradient_opposition_check(const DeltaBuilder& delta, std::span<const double> theta) {
  const Matrix point = Matrix::column(std::vector<double>(theta.begin(), theta.end()));
  auto grad_of = [&](int which, double* delta_value) {
    diff::Tape tape;
    diff::Var t = tape.parameter(point);
    diff::Var d = delta(tape, t);
    if (delta_value) *delta_value = d.item();
    diff::Var root = which == 0 ? d : diff::log_sigmoid(which > 0 ? d : -d);
    tape.backward(root);
    const Matrix& g = tape.grad(t);
    return std::vector<double>(g.values().begin(), g.values().end());
  };

  OppositionReport r;
  const std::vector<double> gd = grad_of(0, &r.delta);
  r.grad_plus = grad_of(+1, nullptr);
  r.grad_minus = grad_of(-1, nullptr);
  r.stationary = std::all_of(gd.begin(), gd.end(), [](double v) { return v == 0.0; });
  r.factor = sigmoid(r.delta) / sigmoid(-r.delta);
  for (std::size_t i = 0; i < gd.size(); ++i) {
    r.inner += r.grad_plus[i] * r.grad_minus[i];
    r.residual = std::max(r.residual, std::abs(r.grad_minus[i] + r.factor * r.grad_plus[i]));
  }
  return r;
}

double jsd_objective(std::span<const double> t_plus, std::span<const double> t_minus) {
  if (t_plus.empty() || t_minus.empty()) throw DomainError("jsd_objective: empty sample list");
  double pos = 0.0;
  double pos_sp = 0.0;
  double neg_sp = 0.0;
  for (double t : t_plus) {
    pos += softplus(-t);
    pos_sp += softplus(t);
  }
  for (double t : t_minus) neg_sp += softplus(t);
  const double m = static_cast<double>(t_plus.size());
  const double n = static_cast<double>(t_minus.size());
  return -pos / m - 0.5 * (pos_sp / m + neg_sp / n);
}

double jsd_objective_exact(const std::vector<double>& prompt_weights, const ConditionalTable& chosen,
                           const ConditionalTable& rejection, const critics::Critic& critic,
                           const Matrix& log_pi) {
  const JointSpec spec = mixed_spec(prompt_weights, chosen, rejection);
  const std::vector<std::uint32_t> cells = spec.support();
  const std::vector<double> t = critics::critic_scores(critic, log_pi, cells);
  const std::size_t R = chosen.num_responses();
  double value = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double d = prompt_weights[cells[i] / R];
    const double c = chosen.probs()[cells[i]];
    const double r = rejection.probs()[cells[i]];
    value -= d * c * softplus(-t[i]);
    value -= 0.5 * d * (c + r) * softplus(t[i]);
  }
  return value;
}

double rlhf_stage2_objective(const std::vector<double>& prompt_weights,
                             const ConditionalTable& pi_theta, const ConditionalTable& pi_ref,
                             const critics::Critic& critic) {
  check_weights(prompt_weights, pi_theta.num_prompts());
  if (!pi_theta.probs().same_shape(pi_ref.probs())) throw DomainError("rlhf_stage2: shape mismatch");
  const std::size_t R = pi_theta.num_responses();
  std::vector<std::uint32_t> cells;
  Matrix log_pi(pi_theta.num_prompts(), R);
  for (std::size_t i = 0; i < pi_theta.probs().size(); ++i) {
    if (pi_theta.probs()[i] > 0.0) {
      if (pi_ref.probs()[i] == 0.0) {
        throw DomainError("rlhf_stage2: pi_theta has mass outside the support of pi_ref at (" +
                          std::to_string(i / R) + ", " + std::to_string(i % R) + ")");
      }
      cells.push_back(static_cast<std::uint32_t>(i));
      log_pi[i] = std::log(pi_theta.probs()[i]);
    }
  }
  const std::vector<double> t = critics::critic_scores(critic, log_pi, cells);
  double expected = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    expected += prompt_weights[cells[i] / R] * pi_theta.probs()[cells[i]] * t[i];
  }
  return expected - kl_divergence(prompt_weights, pi_theta, pi_ref);
}

JensenGap jensen_gap(std::span<const double> values, std::span<const double> weights) {
  if (values.empty() || values.size() != weights.size()) {
    throw DomainError("jensen_gap: values and weights must be nonempty and equally long");
  }
  double wsum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
      throw DomainError("jensen_gap: nonpositive value at index " + std::to_string(i));
    }
    if (!(weights[i] >= 0.0)) throw DomainError("jensen_gap: negative weight");
    wsum += weights[i];
  }
  if (!(wsum > 0.0)) throw DomainError("jensen_gap: weights sum to zero");

  JensenGap g;
  double mean_log = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double w = weights[i] / wsum;
    g.mean += w * values[i];
    mean_log += w * std::log(values[i]);
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - g.mean;
    g.variance += weights[i] / wsum * d * d;
  }
  g.gap = std::log(g.mean) - mean_log;
  g.taylor_bound = g.variance / (2.0 * g.mean * g.mean);
  g.coefficient_of_variation = std::sqrt(g.variance) / g.mean;
  return g;
}

JensenGap jensen_gap(std::span<const double> samples) {
  const std::vector<double> w(samples.size(), 1.0);
  return jensen_gap(samples, w);
}

std::string estimate_kind_name(EstimateKind k) {
  switch (k) {
    case EstimateKind::kDvExact: return "dv_exact";
    case EstimateKind::kDvMixed: return "dv_mixed";
    case EstimateKind::kInfoNce: return "infonce";
    case EstimateKind::kPairwise: return "pairwise";
    case EstimateKind::kJsd: return "jsd";
  }
  return "unknown";
}

std::string estimate_csv(const std::vector<EstimateReport>& rows) {
  io::CsvBuilder csv({"kind", "step", "value", "critic_id", "seed"});
  for (const EstimateReport& r : rows) {
    if (!std::isfinite(r.value)) throw NumericError("estimate_csv: non-finite estimate value");
    csv.row({estimate_kind_name(r.kind), std::to_string(r.step), io::format_double(r.value),
             r.critic_id, std::to_string(r.seed)});
  }
  return csv.str();
}

}  // namespace infoalign::estimators
