#include "infoalign/losses.hpp"

#include <cmath>

#include "infoalign/errors.hpp"
#include "infoalign/numeric.hpp"

namespace infoalign::losses {
namespace {

void check_positive(double p, const char* what) {
  if (!(p > 0.0) || !std::isfinite(p)) {
    throw DomainError(std::string(what) + " must be a strictly positive probability");
  }
}

LogRatios ratios_for(const PreferenceTriple& t, const Matrix& log_pi, const Matrix& log_ref,
                     double beta) {
  if (!log_pi.same_shape(log_ref)) throw DomainError("loss: policy/reference shape mismatch");
  if (t.x >= log_pi.rows() || t.y_w >= log_pi.cols() || t.y_l >= log_pi.cols()) {
    throw DomainError("loss: preference triple out of range");
  }
  if (t.y_w == t.y_l) throw DomainError("loss: chosen and rejected responses coincide");
  return LogRatios::from_logs(log_pi(t.x, t.y_w), log_pi(t.x, t.y_l), log_ref(t.x, t.y_w),
                              log_ref(t.x, t.y_l), beta);
}

}  // namespace

std::string method_name(LossMethod m) { return m == LossMethod::kDpo ? "dpo" : "mio"; }

LossMethod parse_method(const std::string& name) {
  if (name == "dpo") return LossMethod::kDpo;
  if (name == "mio") return LossMethod::kMio;
  throw ConfigError("unknown loss method '" + name + "' (expected dpo or mio)");
}

void LossConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be positive and finite");
}

LogRatios LogRatios::from_logs(double log_pi_w, double log_pi_l, double log_ref_w,
                               double log_ref_l, double beta) {
  LogRatios r;
  r.lr_plus = log_pi_w - log_ref_w;
  r.lr_minus = log_pi_l - log_ref_l;
  if (!std::isfinite(r.lr_plus) || !std::isfinite(r.lr_minus)) {
    throw DomainError("log-ratios must be finite (zero probability?)");
  }
  r.sigma_plus = sigmoid(beta * r.lr_plus);
  r.sigma_minus = sigmoid(beta * r.lr_minus);
  return r;
}

LogRatios LogRatios::from_probs(double pi_w, double pi_l, double ref_w, double ref_l,
                                double beta) {
  check_positive(pi_w, "pi(y_w|x)");
  check_positive(pi_l, "pi(y_l|x)");
  check_positive(ref_w, "pi_ref(y_w|x)");
  check_positive(ref_l, "pi_ref(y_l|x)");
  return from_logs(std::log(pi_w), std::log(pi_l), std::log(ref_w), std::log(ref_l), beta);
}

double dpo_loss(const LogRatios& r, double beta) {
  return softplus(-beta * (r.lr_plus - r.lr_minus));
}

double mio_loss(const LogRatios& r, double beta) {
  return softplus(-beta * r.lr_plus) + 0.5 * softplus(beta * r.lr_plus) +
         0.5 * softplus(beta * r.lr_minus);
}

double preference_loss(const LogRatios& r, const LossConfig& config) {
  return config.method == LossMethod::kDpo ? dpo_loss(r, config.beta) : mio_loss(r, config.beta);
}

double dpo_loss(const PreferenceTriple& t, const Matrix& log_pi, const Matrix& log_ref,
                double beta) {
  return dpo_loss(ratios_for(t, log_pi, log_ref, beta), beta);
}

double mio_loss(const PreferenceTriple& t, const Matrix& log_pi, const Matrix& log_ref,
                double beta) {
  return mio_loss(ratios_for(t, log_pi, log_ref, beta), beta);
}

double dpo_loss_reparameterized(double pi_w, double pi_l, double ref_w, double ref_l, double beta) {
  check_positive(pi_w, "pi(y_w|x)");
  check_positive(pi_l, "pi(y_l|x)");
  check_positive(ref_w, "pi_ref(y_w|x)");
  check_positive(ref_l, "pi_ref(y_l|x)");
  const double alpha = std::pow(ref_w / ref_l, beta);
  const double z = pi_l / pi_w;
  return std::log1p(alpha * std::pow(z, beta));
}

ProbabilityGrads dpo_analytic_grads(double pi_plus, double pi_minus, double ref_plus,
                                    double ref_minus, double beta) {
  const LogRatios r = LogRatios::from_probs(pi_plus, pi_minus, ref_plus, ref_minus, beta);
  const double s = sigmoid(-beta * (r.lr_plus - r.lr_minus));
  return {-beta * s / pi_plus, beta * s / pi_minus};
}

ProbabilityGrads mio_analytic_grads(double pi_plus, double pi_minus, double ref_plus,
                                    double ref_minus, double beta) {
  const LogRatios r = LogRatios::from_probs(pi_plus, pi_minus, ref_plus, ref_minus, beta);
  return {beta / pi_plus * (1.5 * r.sigma_plus - 1.0), beta / (2.0 * pi_minus) * r.sigma_minus};
}

diff::Var preference_loss_on(const LossConfig& config, diff::Var log_pi_w, diff::Var log_pi_l,
                             const std::vector<double>& log_ref_w,
                             const std::vector<double>& log_ref_l) {
  config.validate();
  diff::Tape& tape = log_pi_w.tape();
  const double b = config.beta;
  diff::Var lr_plus = log_pi_w - tape.constant(Matrix::column(log_ref_w));
  diff::Var lr_minus = log_pi_l - tape.constant(Matrix::column(log_ref_l));
  if (config.method == LossMethod::kDpo) {
    return diff::mean(diff::softplus(diff::scale(lr_plus - lr_minus, -b)));
  }
  diff::Var loss = diff::softplus(diff::scale(lr_plus, -b)) +
                   diff::scale(diff::softplus(diff::scale(lr_plus, b)), 0.5) +
                   diff::scale(diff::softplus(diff::scale(lr_minus, b)), 0.5);
  return diff::mean(loss);
}

}  // namespace infoalign::losses
