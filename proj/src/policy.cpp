#include "infoalign/policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "infoalign/errors.hpp"
#include "infoalign/io.hpp"
#include "infoalign/numeric.hpp"

namespace infoalign::policy {
namespace {

void check_index(std::size_t x, std::size_t y, std::size_t prompts, std::size_t responses) {
  if (x >= prompts || y >= responses) {
    throw DomainError("index (" + std::to_string(x) + ", " + std::to_string(y) +
                      ") outside a " + std::to_string(prompts) + "x" +
                      std::to_string(responses) + " grid");
  }
}

}  // namespace

ConditionalTable::ConditionalTable(Matrix probs, double tolerance) : probs_(std::move(probs)) {
  if (probs_.rows() == 0 || probs_.cols() == 0) throw DomainError("ConditionalTable: empty table");
  for (std::size_t x = 0; x < probs_.rows(); ++x) {
    double total = 0.0;
    for (double p : probs_.row(x)) {
      if (!std::isfinite(p) || p < 0.0) {
        throw DomainError("ConditionalTable: invalid probability in row " + std::to_string(x));
      }
      total += p;
    }
    if (std::abs(total - 1.0) > tolerance) {
      throw DomainError("ConditionalTable: row " + std::to_string(x) + " sums to " +
                        io::format_double(total));
    }
  }
}

ConditionalTable ConditionalTable::uniform(std::size_t prompts, std::size_t responses) {
  return ConditionalTable(Matrix(prompts, responses, 1.0 / static_cast<double>(responses)));
}

double ConditionalTable::log_prob(std::size_t x, std::size_t y) const {
  check_index(x, y, num_prompts(), num_responses());
  const double p = probs_(x, y);
  if (p <= 0.0) {
    throw DomainError("log of zero probability at (" + std::to_string(x) + ", " +
                      std::to_string(y) + ")");
  }
  return std::log(p);
}

bool ConditionalTable::strictly_positive() const {
  return std::all_of(probs_.values().begin(), probs_.values().end(), [](double p) { return p > 0.0; });
}

ConditionalTable mixture(const ConditionalTable& a, const ConditionalTable& b) {
  if (!a.probs().same_shape(b.probs())) throw DomainError("mixture: shape mismatch");
  Matrix m(a.num_prompts(), a.num_responses());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.5 * a.probs()[i] + 0.5 * b.probs()[i];
  return ConditionalTable(std::move(m), 1e-12);
}

std::string parameterization_name(Parameterization p) {
  return p == Parameterization::kTabular ? "tabular" : "mlp";
}

Parameterization parse_parameterization(const std::string& name) {
  if (name == "tabular") return Parameterization::kTabular;
  if (name == "mlp") return Parameterization::kMlp;
  throw ConfigError("unknown parameterization '" + name + "' (expected tabular or mlp)");
}

PolicyTable PolicyTable::tabular(Matrix logits) {
  if (logits.empty()) throw DomainError("PolicyTable: empty logit table");
  if (!logits.all_finite()) throw NumericError("PolicyTable: non-finite logits");
  PolicyTable p;
  p.kind_ = Parameterization::kTabular;
  p.prompts_ = logits.rows();
  p.responses_ = logits.cols();
  p.tabular_.push_back(std::move(logits));
  return p;
}

PolicyTable PolicyTable::mlp(std::size_t prompts, std::size_t responses, std::size_t hidden,
                             Rng& rng) {
  PolicyTable p;
  p.kind_ = Parameterization::kMlp;
  p.prompts_ = prompts;
  p.responses_ = responses;
  p.net_ = diff::Mlp(prompts, hidden, responses, rng);
  return p;
}

Matrix PolicyTable::logits() const {
  if (kind_ == Parameterization::kTabular) return tabular_[0];
  return net_.evaluate(Matrix::identity(prompts_));
}

Matrix PolicyTable::log_probs() const {
  Matrix s = logits();
  Matrix out(s.rows(), s.cols());
  for (std::size_t x = 0; x < s.rows(); ++x) {
    const double lse = logsumexp(s.row(x));
    for (std::size_t y = 0; y < s.cols(); ++y) out(x, y) = s(x, y) - lse;
  }
  return out;
}

double PolicyTable::log_prob(std::size_t x, std::size_t y) const {
  check_index(x, y, prompts_, responses_);
  return log_probs()(x, y);
}

ConditionalTable PolicyTable::distribution() const {
  Matrix lp = log_probs();
  for (double& v : lp.values()) v = std::exp(v);
  // Renormalize each row so the sum is 1 to rounding.
  for (std::size_t x = 0; x < lp.rows(); ++x) {
    double total = 0.0;
    for (double v : lp.row(x)) total += v;
    for (double& v : lp.row(x)) v /= total;
  }
  return ConditionalTable(std::move(lp));
}

const std::vector<Matrix>& PolicyTable::parameters() const {
  return kind_ == Parameterization::kTabular ? tabular_ : net_.parameters();
}

std::vector<Matrix>& PolicyTable::mutable_parameters() {
  if (frozen_) throw DomainError("attempt to modify a frozen policy");
  return kind_ == Parameterization::kTabular ? tabular_ : net_.parameters();
}

diff::Var PolicyTable::logits_on(diff::Tape& tape, std::vector<diff::Var>& bound) const {
  if (kind_ == Parameterization::kTabular) {
    bound = {tape.parameter(tabular_[0])};
    return bound[0];
  }
  bound = net_.bind(tape);
  return diff::Mlp::forward(bound, tape.constant(Matrix::identity(prompts_)));
}

diff::Var PolicyTable::log_probs_on(diff::Tape& tape, std::vector<diff::Var>& bound) const {
  return diff::log_softmax_rows(logits_on(tape, bound));
}

PolicyTable PolicyTable::frozen_copy() const {
  PolicyTable copy = *this;
  copy.frozen_ = true;
  return copy;
}

double own_logit_derivative(const ConditionalTable& pi, std::size_t x_star, std::size_t y_star,
                            std::size_t y, std::size_t x) {
  check_index(x_star, y_star, pi.num_prompts(), pi.num_responses());
  check_index(x, y, pi.num_prompts(), pi.num_responses());
  if (x != x_star) return 0.0;
  const double p = pi(x_star, y_star);
  return y == y_star ? 1.0 - p : -p;
}

double own_logit_derivative(const PolicyTable& policy, std::size_t x_star, std::size_t y_star,
                            std::size_t y, std::size_t x) {
  if (policy.parameterization() != Parameterization::kTabular) {
    throw DomainError("own_logit_derivative requires a tabular policy");
  }
  return own_logit_derivative(policy.distribution(), x_star, y_star, y, x);
}

Reweighted ebm_reweight(const ConditionalTable& base, const Matrix& reward, double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("ebm_reweight: alpha must be > 0");
  if (!reward.same_shape(base.probs())) throw DomainError("ebm_reweight: reward shape mismatch");
  Matrix out(base.num_prompts(), base.num_responses());
  std::vector<double> z(base.num_prompts(), 0.0);
  for (std::size_t x = 0; x < out.rows(); ++x) {
    for (std::size_t y = 0; y < out.cols(); ++y) {
      const double p = base(x, y);
      if (p == 0.0) continue;
      const double w = std::exp(alpha * reward(x, y));
      if (!std::isfinite(w) || !std::isfinite(reward(x, y))) {
        throw NumericError("ebm_reweight: exponent alpha*r overflows at (" + std::to_string(x) +
                           ", " + std::to_string(y) + "); rescale the reward");
      }
      out(x, y) = p * w;
      z[x] += out(x, y);
    }
    if (!(z[x] > 0.0) || !std::isfinite(z[x])) {
      throw NumericError("ebm_reweight: normalizer for prompt " + std::to_string(x) +
                         " is not positive and finite");
    }
    // A constant reward cancels; keep the base row bit for bit.
    bool constant = true;
    for (std::size_t y = 1; y < out.cols(); ++y) constant = constant && reward(x, y) == reward(x, 0);
    for (std::size_t y = 0; y < out.cols(); ++y) out(x, y) = constant ? base(x, y) : out(x, y) / z[x];
  }
  return {ConditionalTable(std::move(out), 1e-10), std::move(z)};
}

IdentityReport verify_critic_reward_identity(const ConditionalTable& pi_theta,
                                             const ConditionalTable& pi_ref, double alpha,
                                             double beta, const IdentityOptions& options) {
  if (!pi_theta.probs().same_shape(pi_ref.probs())) {
    throw DomainError("verify_critic_reward_identity: shape mismatch");
  }
  if (!pi_theta.strictly_positive() || !pi_ref.strictly_positive()) {
    throw DomainError("verify_critic_reward_identity: policies must be strictly positive");
  }
  if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("alpha and beta must be positive");

  const std::size_t P = pi_theta.num_prompts();
  const std::size_t R = pi_theta.num_responses();
  const double ab = alpha * beta;

  // Z is self-consistent when log Z = log S + ab log Z with
  // S = sum_y pi_ref^{1-ab} pi_theta^{ab}.
  std::vector<double> log_s(P);
  std::vector<double> terms(R);
  for (std::size_t x = 0; x < P; ++x) {
    for (std::size_t y = 0; y < R; ++y) {
      terms[y] = (1.0 - ab) * std::log(pi_ref(x, y)) + ab * std::log(pi_theta(x, y));
    }
    log_s[x] = logsumexp(terms);
  }

  IdentityReport report;
  report.log_z.assign(P, 0.0);
  std::vector<double> trace;
  bool converged = false;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    double change = 0.0;
    for (std::size_t x = 0; x < P; ++x) {
      const double lz = report.log_z[x];
      // The forward map expands when ab > 1, so iterate its inverse there.
      const double target = ab <= 1.0 ? log_s[x] + ab * lz : (lz - log_s[x]) / ab;
      const double next = (1.0 - options.damping) * lz + options.damping * target;
      change = std::max(change, std::abs(next - lz));
      report.log_z[x] = next;
    }
    trace.push_back(change);
    report.iterations = it + 1;
    if (change < options.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "self-consistent log Z did not converge in " << options.max_iterations
        << " iterations; last changes:";
    for (std::size_t i = trace.size() > 5 ? trace.size() - 5 : 0; i < trace.size(); ++i) {
      msg << ' ' << io::format_double(trace[i]);
    }
    throw ConvergenceError(msg.str());
  }

  report.reward = Matrix(P, R);
  for (std::size_t x = 0; x < P; ++x) {
    for (std::size_t y = 0; y < R; ++y) {
      report.reward(x, y) =
          beta * (std::log(pi_theta(x, y)) - std::log(pi_ref(x, y)) + report.log_z[x]);
    }
  }
  const Reweighted chosen = ebm_reweight(pi_ref, report.reward, alpha);

  report.gamma = (1.0 - ab) / beta;
  report.critic = Matrix(P, R);
  for (std::size_t x = 0; x < P; ++x) {
    for (std::size_t y = 0; y < R; ++y) {
      const double t = std::log(pi_theta(x, y)) - std::log(chosen.table(x, y));
      report.critic(x, y) = t;
      report.residual = std::max(report.residual, std::abs(t - report.gamma * report.reward(x, y)));
    }
  }
  return report;
}

std::string policy_csv(const ConditionalTable& table) {
  io::CsvBuilder csv({"prompt", "response", "probability"});
  for (std::size_t x = 0; x < table.num_prompts(); ++x) {
    for (std::size_t y = 0; y < table.num_responses(); ++y) {
      csv.row({std::to_string(x), std::to_string(y), io::format_double(table(x, y))});
    }
  }
  return csv.str();
}

void write_policy_csv(const ConditionalTable& table, const std::filesystem::path& path) {
  io::atomic_write(path, policy_csv(table));
}

}  // namespace infoalign::policy
