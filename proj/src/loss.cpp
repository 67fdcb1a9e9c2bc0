#include "rqvqa/loss.hpp"

#include <cmath>
#include <string>

#include "rqvqa/error.hpp"

namespace rqvqa {

namespace {

void check(std::span<const double> pred, std::span<const double> mos) {
  if (pred.size() != mos.size()) {
    fail(ErrorCode::InvalidArgument, "length mismatch: " + std::to_string(pred.size()) + " predictions, " +
                                         std::to_string(mos.size()) + " labels");
  }
  if (pred.size() < 2) fail(ErrorCode::InvalidArgument, "correlation loss needs at least 2 samples");
}

struct Centered {
  std::vector<double> p, q;
  double inner = 0.0;
  double p_norm = 0.0;
  double q_norm = 0.0;
};

Centered center(std::span<const double> pred, std::span<const double> mos) {
  const double n = static_cast<double>(pred.size());
  double pm = 0.0, qm = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pm += pred[i];
    qm += mos[i];
  }
  pm /= n;
  qm /= n;
  Centered c;
  c.p.resize(pred.size());
  c.q.resize(pred.size());
  double pp = 0.0, qq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    c.p[i] = pred[i] - pm;
    c.q[i] = mos[i] - qm;
    c.inner += c.p[i] * c.q[i];
    pp += c.p[i] * c.p[i];
    qq += c.q[i] * c.q[i];
  }
  c.p_norm = std::sqrt(pp);
  c.q_norm = std::sqrt(qq);
  return c;
}

}  // namespace

double plcc_loss(std::span<const double> pred, std::span<const double> mos) {
  check(pred, mos);
  const Centered c = center(pred, mos);
  const double rho = c.inner / ((c.p_norm + kPlccEpsilon) * (c.q_norm + kPlccEpsilon));
  return (1.0 - rho) / 2.0;
}

std::vector<double> plcc_loss_grad(std::span<const double> pred, std::span<const double> mos) {
  check(pred, mos);
  const Centered c = center(pred, mos);
  const double a = c.p_norm + kPlccEpsilon;
  const double b = c.q_norm + kPlccEpsilon;
  // rho = s / (a b); d rho / d p = q_c / (a b) - s / (a^2 b) * p_c / |p_c|.
  // The centring projector leaves both q_c and p_c unchanged.
  const double radial = c.p_norm > 0.0 ? c.inner / (a * a * b * c.p_norm) : 0.0;
  std::vector<double> g(pred.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -0.5 * (c.q[i] / (a * b) - radial * c.p[i]);
  return g;
}

double mse_loss(std::span<const double> pred, std::span<const double> mos) {
  check(pred, mos);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - mos[i]) * (pred[i] - mos[i]);
  return s / static_cast<double>(pred.size());
}

std::vector<double> mse_loss_grad(std::span<const double> pred, std::span<const double> mos) {
  check(pred, mos);
  std::vector<double> g(pred.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * (pred[i] - mos[i]) / static_cast<double>(g.size());
  return g;
}

}  // namespace rqvqa
