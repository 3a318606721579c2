#include "infoalign/critics.hpp"

#include <cmath>

#include "infoalign/errors.hpp"

namespace infoalign::critics {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_cell(const Matrix& grid, std::size_t x, std::size_t y) {
  if (x >= grid.rows() || y >= grid.cols()) {
    throw DomainError("critic: cell (" + std::to_string(x) + ", " + std::to_string(y) +
                      ") out of range");
  }
}

double log_den(const LogRatioCritic& c, std::size_t x, std::size_t y) {
  return c.denominator.log_prob(x, y);
}

Matrix neural_scores(const NeuralCritic& c, const std::vector<std::uint32_t>& cells) {
  return c.net.evaluate(c.encode(cells));
}

}  // namespace

NeuralCritic NeuralCritic::make(std::size_t prompts, std::size_t responses, std::size_t hidden,
                                Rng& rng) {
  return {diff::Mlp(prompts + responses, hidden, 1, rng), prompts, responses};
}

Matrix NeuralCritic::encode(const std::vector<std::uint32_t>& cells) const {
  Matrix in(cells.size(), prompts + responses);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::size_t x = cells[i] / responses;
    const std::size_t y = cells[i] % responses;
    if (x >= prompts) throw DomainError("NeuralCritic: cell out of range");
    in(i, x) = 1.0;
    in(i, prompts + y) = 1.0;
  }
  return in;
}

std::string critic_kind(const Critic& critic) {
  return std::visit(overloaded{[](const TableCritic&) { return std::string("table"); },
                               [](const NeuralCritic&) { return std::string("neural"); },
                               [](const LogRatioCritic&) { return std::string("log_ratio"); },
                               [](const LipschitzCritic&) { return std::string("lipschitz"); }},
                    critic);
}

bool depends_on_policy(const Critic& critic) {
  return std::holds_alternative<LogRatioCritic>(critic) ||
         std::holds_alternative<LipschitzCritic>(critic);
}

double critic_score(const Critic& critic, std::size_t x, std::size_t y, double log_pi) {
  return std::visit(
      overloaded{
          [&](const TableCritic& c) {
            check_cell(c.scores, x, y);
            return c.scores(x, y);
          },
          [&](const NeuralCritic& c) {
            return neural_scores(c, {static_cast<std::uint32_t>(x * c.responses + y)})[0];
          },
          [&](const LogRatioCritic& c) { return c.beta * (log_pi - log_den(c, x, y)) + c.offset; },
          [&](const LipschitzCritic& c) {
            check_cell(c.base, x, y);
            return c.base(x, y) + c.lipschitz * std::tanh(log_pi);
          }},
      critic);
}

std::vector<double> critic_scores(const Critic& critic, const Matrix& log_pi,
                                  const std::vector<std::uint32_t>& cells) {
  std::vector<double> out(cells.size());
  if (const auto* nc = std::get_if<NeuralCritic>(&critic)) {
    const Matrix s = neural_scores(*nc, cells);
    for (std::size_t i = 0; i < cells.size(); ++i) out[i] = s[i];
    return out;
  }
  const std::size_t R = log_pi.cols();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i] >= log_pi.size()) throw DomainError("critic_scores: cell out of range");
    out[i] = critic_score(critic, cells[i] / R, cells[i] % R, log_pi[cells[i]]);
  }
  return out;
}

diff::Var critic_scores_on(const Critic& critic, diff::Var log_pi,
                           const std::vector<std::uint32_t>& cells) {
  diff::Tape& tape = log_pi.tape();
  const std::size_t R = log_pi.cols();
  return std::visit(
      overloaded{
          [&](const TableCritic&) {
            return tape.constant(Matrix::column(critic_scores(critic, log_pi.value(), cells)));
          },
          [&](const NeuralCritic&) {
            return tape.constant(Matrix::column(critic_scores(critic, log_pi.value(), cells)));
          },
          [&](const LogRatioCritic& c) {
            std::vector<double> shift(cells.size());
            for (std::size_t i = 0; i < cells.size(); ++i) {
              shift[i] = c.offset - c.beta * log_den(c, cells[i] / R, cells[i] % R);
            }
            return diff::scale(diff::gather(log_pi, cells), c.beta) +
                   tape.constant(Matrix::column(std::move(shift)));
          },
          [&](const LipschitzCritic& c) {
            if (!c.base.same_shape(log_pi.value())) throw DomainError("LipschitzCritic: base shape mismatch");
            std::vector<double> base(cells.size());
            for (std::size_t i = 0; i < cells.size(); ++i) base[i] = c.base[cells[i]];
            return diff::scale(diff::tanh(diff::gather(log_pi, cells)), c.lipschitz) +
                   tape.constant(Matrix::column(std::move(base)));
          }},
      critic);
}

double dscore_dlogpi(const Critic& critic, std::size_t, std::size_t, double log_pi) {
  return std::visit(overloaded{[](const TableCritic&) { return 0.0; },
                               [](const NeuralCritic&) { return 0.0; },
                               [](const LogRatioCritic& c) { return c.beta; },
                               [&](const LipschitzCritic& c) {
                                 const double t = std::tanh(log_pi);
                                 return c.lipschitz * (1.0 - t * t);
                               }},
                    critic);
}

}  // namespace infoalign::critics
