#pragma once

// Closed-form DPO and MIO preference losses. Everything is evaluated from
// log-probabilities so tiny probabilities never underflow.

#include <cstddef>
#include <string>
#include <vector>

#include "infoalign/diff/matrix.hpp"
#include "infoalign/diff/tape.hpp"

namespace infoalign::losses {

using diff::Matrix;

struct PreferenceTriple {
  std::size_t x = 0;
  std::size_t y_w = 0;
  std::size_t y_l = 0;
};

enum class LossMethod { kDpo, kMio };

std::string method_name(LossMethod m);
LossMethod parse_method(const std::string& name);

struct LossConfig {
  LossMethod method = LossMethod::kMio;
  double beta = 1.0;

  void validate() const;  // throws ConfigError
};

struct LogRatios {
  double lr_plus = 0.0;   // log pi(y_w|x) - log pi_ref(y_w|x)
  double lr_minus = 0.0;  // log pi(y_l|x) - log pi_ref(y_l|x)
  double sigma_plus = 0.0;
  double sigma_minus = 0.0;

  static LogRatios from_logs(double log_pi_w, double log_pi_l, double log_ref_w, double log_ref_l,
                             double beta);
  // Throws DomainError unless all four probabilities are strictly positive.
  static LogRatios from_probs(double pi_w, double pi_l, double ref_w, double ref_l, double beta);
};

// -log sigma(beta (LR+ - LR-))
double dpo_loss(const LogRatios& r, double beta);
// sp(-beta LR+) + sp(beta LR+)/2 + sp(beta LR-)/2
double mio_loss(const LogRatios& r, double beta);
double preference_loss(const LogRatios& r, const LossConfig& config);

// Loss of one triple against P x R log-probability tables.
double dpo_loss(const PreferenceTriple& t, const Matrix& log_pi, const Matrix& log_ref, double beta);
double mio_loss(const PreferenceTriple& t, const Matrix& log_pi, const Matrix& log_ref, double beta);

// log(1 + alpha z^beta) with alpha = (ref_w / ref_l)^beta and
// z = pi_l / pi_w. Equal to dpo_loss wherever both are representable.
double dpo_loss_reparameterized(double pi_w, double pi_l, double ref_w, double ref_l, double beta);

struct ProbabilityGrads {
  double d_plus = 0.0;   // d loss / d pi(y_w|x)
  double d_minus = 0.0;  // d loss / d pi(y_l|x)
};

// (-beta sigma(-m) / pi+, beta sigma(-m) / pi-) with m = beta (LR+ - LR-).
ProbabilityGrads dpo_analytic_grads(double pi_plus, double pi_minus, double ref_plus,
                                    double ref_minus, double beta);
// ((beta / pi+)(1.5 sigma+ - 1), (beta / (2 pi-)) sigma-).
ProbabilityGrads mio_analytic_grads(double pi_plus, double pi_minus, double ref_plus,
                                    double ref_minus, double beta);

// Mean loss over a batch on a tape. `log_pi_w` and `log_pi_l` are k x 1
// nodes; the reference values are constants.
diff::Var preference_loss_on(const LossConfig& config, diff::Var log_pi_w, diff::Var log_pi_l,
                             const std::vector<double>& log_ref_w,
                             const std::vector<double>& log_ref_l);

}  // namespace infoalign::losses
