#include "infoalign/starvation.hpp"

#include <cmath>
#include <numbers>

#include "infoalign/diff/tape.hpp"
#include "infoalign/errors.hpp"
#include "infoalign/io.hpp"
#include "infoalign/numeric.hpp"
#include "infoalign/rng.hpp"

namespace infoalign::starvation {
namespace {

ConditionalTable softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t x = 0; x < logits.rows(); ++x) {
    const double lse = logsumexp(logits.row(x));
    double total = 0.0;
    for (std::size_t y = 0; y < logits.cols(); ++y) total += p(x, y) = std::exp(logits(x, y) - lse);
    for (std::size_t y = 0; y < logits.cols(); ++y) p(x, y) /= total;
  }
  return ConditionalTable(std::move(p));
}

Matrix log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t x = 0; x < logits.rows(); ++x) {
    const double lse = logsumexp(logits.row(x));
    for (std::size_t y = 0; y < logits.cols(); ++y) out(x, y) = logits(x, y) - lse;
  }
  return out;
}

void check_probe(const StarvationProbe& probe, const Instance& inst) {
  const Matrix& s = inst.logits;
  if (probe.x_star >= s.rows() || probe.y_star >= s.cols()) {
    throw DomainError("starvation probe target outside the grid");
  }
  if (probe.support_condition) {
    const double c = inst.chosen(probe.x_star, probe.y_star);
    const double r = inst.rejection(probe.x_star, probe.y_star);
    if (c != 0.0 || r != 0.0) {
      throw DomainError("support violation: pi_chosen(y*|x*) = " + io::format_double(c) +
                        ", pi_rejection(y*|x*) = " + io::format_double(r));
    }
  }
}

struct Gradient {
  double value;
  Matrix grad;
};

Gradient objective_and_grad(const StarvationProbe& probe, const Instance& inst, const Matrix& logits) {
  const estimators::JointSpec spec =
      estimators::mixed_spec(inst.prompt_weights, inst.chosen, inst.rejection);
  diff::Tape tape;
  diff::Var s = tape.parameter(logits);
  diff::Var lp = diff::log_softmax_rows(s);
  diff::Var scores = critics::critic_scores_on(inst.critic, lp, spec.support());
  diff::Var objective =
      diff::add_const(estimators::dv_bound_on(spec, scores, probe.normalization), -std::numbers::ln2);
  tape.backward(objective);
  return {objective.item(), tape.grad(s)};
}

}  // namespace

std::string critic_kind_name(CriticKind k) {
  switch (k) {
    case CriticKind::kThetaIndependent: return "theta_independent";
    case CriticKind::kLogRatio: return "log_ratio";
    case CriticKind::kLipschitz: return "lipschitz";
  }
  return "unknown";
}

CriticKind parse_critic_kind(const std::string& name) {
  if (name == "theta_independent") return CriticKind::kThetaIndependent;
  if (name == "log_ratio") return CriticKind::kLogRatio;
  if (name == "lipschitz") return CriticKind::kLipschitz;
  throw ConfigError("unknown critic kind '" + name +
                    "' (expected theta_independent, log_ratio or lipschitz)");
}

Instance random_instance(const StarvationProbe& probe, std::size_t prompts, std::size_t responses,
                         std::uint64_t seed) {
  if (probe.x_star >= prompts || probe.y_star >= responses || responses < 2) {
    throw DomainError("random_instance: target outside the grid");
  }
  Rng rng = make_stream(seed, "starvation.instance");
  NormalSampler normal;
  auto gaussian = [&](double scale) {
    Matrix m(prompts, responses);
    for (double& v : m.values()) v = scale * normal(rng);
    return m;
  };

  Matrix logits = gaussian(1.0);
  Matrix ref_logits = gaussian(1.0);
  Matrix ref = softmax_rows(ref_logits).probs();
  if (probe.support_condition) {
    const double removed = ref(probe.x_star, probe.y_star);
    ref(probe.x_star, probe.y_star) = 0.0;
    for (std::size_t y = 0; y < responses; ++y) ref(probe.x_star, y) /= 1.0 - removed;
  }
  ConditionalTable reference(std::move(ref), 1e-12);
  const double alpha = 0.7;
  ConditionalTable chosen = policy::ebm_reweight(reference, gaussian(1.0), alpha).table;
  ConditionalTable rejection = policy::ebm_reweight(reference, gaussian(1.0), alpha).table;

  critics::Critic critic;
  switch (probe.kind) {
    case CriticKind::kThetaIndependent:
      critic = critics::TableCritic{gaussian(1.0)};
      break;
    case CriticKind::kLogRatio:
      critic = critics::LogRatioCritic{reference, 1.0, 0.0};
      break;
    case CriticKind::kLipschitz:
      critic = critics::LipschitzCritic{gaussian(0.5), probe.lipschitz};
      break;
  }
  return {std::move(logits), std::move(reference), std::move(chosen), std::move(rejection),
          std::vector<double>(prompts, 1.0 / static_cast<double>(prompts)), std::move(critic)};
}

double dv_objective(const StarvationProbe& probe, const Instance& inst, const Matrix& logits) {
  const Matrix lp = log_softmax(logits);
  return estimators::dv_bound_mixed(inst.prompt_weights, inst.chosen, inst.rejection, inst.critic,
                                    lp, probe.normalization);
}

DirectionalDerivative dv_directional_derivative(const StarvationProbe& probe, const Instance& inst) {
  check_probe(probe, inst);
  DirectionalDerivative out;
  const Gradient g = objective_and_grad(probe, inst, inst.logits);
  out.objective = g.value;
  out.autodiff = g.grad(probe.x_star, probe.y_star);

  // (A) = sum_x D sum_y pi_c G' dl/du
  // (B) = sum_x D sum_y pibar e^T G' dl/du / sum_y pibar e^T  (per prompt)
  const ConditionalTable pi = softmax_rows(inst.logits);
  const Matrix lp = log_softmax(inst.logits);
  const estimators::JointSpec spec =
      estimators::mixed_spec(inst.prompt_weights, inst.chosen, inst.rejection);
  const std::vector<std::uint32_t> cells = spec.support();
  const std::vector<double> t = critics::critic_scores(inst.critic, lp, cells);
  const std::size_t R = inst.logits.cols();
  const std::size_t P = inst.logits.rows();

  double max_t = -INFINITY;
  for (double v : t) max_t = std::max(max_t, v);
  std::vector<double> num(P, 0.0);
  std::vector<double> den(P, 0.0);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::size_t x = cells[i] / R;
    const std::size_t y = cells[i] % R;
    const double d = inst.prompt_weights[x];
    const double dl = policy::own_logit_derivative(pi, probe.x_star, probe.y_star, y, x);
    const double gp = critics::dscore_dlogpi(inst.critic, x, y, lp(x, y));
    out.term_a += d * inst.chosen(x, y) * gp * dl;
    const double w = spec.product(x, y) * std::exp(t[i] - max_t);
    num[x] += w * gp * dl;
    den[x] += w;
  }
  if (probe.normalization == estimators::Normalization::kPerPrompt) {
    for (std::size_t x = 0; x < P; ++x) {
      if (den[x] > 0.0) out.term_b += inst.prompt_weights[x] * num[x] / den[x];
    }
  } else {
    double n = 0.0;
    double z = 0.0;
    for (std::size_t x = 0; x < P; ++x) {
      n += inst.prompt_weights[x] * num[x];
      z += inst.prompt_weights[x] * den[x];
    }
    out.term_b = n / z;
  }
  out.decomposition = out.term_a - out.term_b;
  return out;
}

double inner_product_form(const StarvationProbe& probe, const Instance& inst) {
  if (probe.x_star >= inst.logits.rows() || probe.y_star >= inst.logits.cols()) {
    throw DomainError("starvation probe target outside the grid");
  }
  const Gradient g = objective_and_grad(probe, inst, inst.logits);
  // Score function of log pi(y*|x*) over the tabular logits: e_{y*} - pi(.|x*) on row x*.
  diff::Tape tape;
  diff::Var s = tape.parameter(inst.logits);
  diff::Var target = diff::gather(diff::log_softmax_rows(s),
                                  {static_cast<std::uint32_t>(probe.x_star * inst.logits.cols() + probe.y_star)});
  tape.backward(target);
  const Matrix& score = tape.grad(s);
  double inner = 0.0;
  for (std::size_t i = 0; i < score.size(); ++i) inner += g.grad[i] * score[i];
  return inner;
}

Matrix logits_with_target(const Matrix& logits, std::size_t x_star, std::size_t y_star,
                          double pi_star) {
  if (!(pi_star > 0.0 && pi_star < 1.0)) throw DomainError("target probability must lie in (0, 1)");
  if (x_star >= logits.rows() || y_star >= logits.cols()) throw DomainError("target outside the grid");
  std::vector<double> rest;
  for (std::size_t y = 0; y < logits.cols(); ++y) {
    if (y != y_star) rest.push_back(logits(x_star, y));
  }
  Matrix out = logits;
  out(x_star, y_star) = std::log(pi_star) - std::log1p(-pi_star) + logsumexp(rest);
  return out;
}

std::vector<SweepRow> starvation_sweep(const StarvationProbe& probe, const Instance& inst,
                                       const std::vector<double>& pi_stars, std::uint64_t seed) {
  if (probe.kind != CriticKind::kLipschitz) throw DomainError("starvation_sweep needs a Lipschitz critic");
  if (!probe.support_condition) throw DomainError("starvation_sweep needs the support condition");
  if (!(probe.lipschitz > 0.0)) throw DomainError("Lipschitz constant must be positive");
  std::vector<SweepRow> rows;
  for (double p : pi_stars) {
    if (!(p > 0.0 && p < 0.5)) {
      throw DomainError("infeasible target probability " + io::format_double(p) + " (need (0, 0.5))");
    }
    Instance at = inst;
    at.logits = logits_with_target(inst.logits, probe.x_star, probe.y_star, p);
    const DirectionalDerivative d = dv_directional_derivative(probe, at);
    rows.push_back({p, std::abs(d.autodiff), 2.0 * probe.lipschitz * p, probe.lipschitz,
                    critic_kind_name(probe.kind), seed});
  }
  return rows;
}

double log_log_slope(const std::vector<SweepRow>& rows) {
  if (rows.size() < 2) throw DomainError("log_log_slope needs at least two rows");
  double mx = 0.0;
  double my = 0.0;
  for (const SweepRow& r : rows) {
    if (!(r.measured > 0.0)) throw DomainError("log_log_slope: measured derivative is zero");
    mx += std::log(r.pi_star);
    my += std::log(r.measured);
  }
  const double n = static_cast<double>(rows.size());
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (const SweepRow& r : rows) {
    const double dx = std::log(r.pi_star) - mx;
    sxy += dx * (std::log(r.measured) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  io::CsvBuilder csv({"pi_star", "measured", "bound", "L", "critic_kind", "seed"});
  for (const SweepRow& r : rows) {
    csv.row({io::format_double(r.pi_star), io::format_double(r.measured),
             io::format_double(r.bound), io::format_double(r.lipschitz), r.critic_kind,
             std::to_string(r.seed)});
  }
  return csv.str();
}

}  // namespace infoalign::starvation
