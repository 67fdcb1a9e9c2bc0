#include "rqvqa/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "rqvqa/error.hpp"

namespace rqvqa::eval {

double FourPL::operator()(double x) const {
  return (beta1 - beta2) / (1.0 + std::exp(-(x - beta3) / std::abs(beta4))) + beta2;
}

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::InvalidArgument, "length mismatch");
  if (x.size() < 2) fail(ErrorCode::InvalidArgument, "correlation needs at least 2 samples");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) fail(ErrorCode::NonFinite, "non-finite input");
  }
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sse_of(const FourPL& f, std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = f(x[i]) - y[i];
    s += r * r;
  }
  return s;
}

// Solves a 4x4 system by Gaussian elimination with partial pivoting.
bool solve4(std::array<std::array<double, 4>, 4> a, std::array<double, 4> b, std::array<double, 4>& out) {
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    if (std::abs(a[piv][col]) < 1e-300) return false;
    std::swap(a[col], a[piv]);
    std::swap(b[col], b[piv]);
    for (int r = col + 1; r < 4; ++r) {
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (int r = 3; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < 4; ++c) s -= a[r][c] * out[c];
    out[r] = s / a[r][r];
  }
  return std::all_of(out.begin(), out.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) fail(ErrorCode::ZeroVariance, "zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> fractional_ranks(std::span<const double> values) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const auto rx = fractional_ranks(x);
  const auto ry = fractional_ranks(y);
  return pearson(rx, ry);
}

FitResult fit_4pl(std::span<const double> pred, std::span<const double> mos, const FitOptions& opts) {
  check_pair(pred, mos);
  const std::size_t n = pred.size();
  if (n < 5) fail(ErrorCode::Degenerate, "4PL fit needs at least 5 points");
  const double mp = mean_of(pred);
  double var = 0.0;
  for (double p : pred) var += (p - mp) * (p - mp);
  const double sd = std::sqrt(var / static_cast<double>(n));
  if (sd == 0.0) fail(ErrorCode::Degenerate, "constant predictions");
  const auto [lo, hi] = std::minmax_element(mos.begin(), mos.end());
  if (*lo == *hi) fail(ErrorCode::Degenerate, "constant MOS");

  FitResult res;
  FourPL b{*hi, *lo, mp, sd / 4.0};
  double sse = sse_of(b, pred, mos);
  double lambda = 1e-3;

  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    std::array<std::array<double, 4>, 4> jtj{};
    std::array<double, 4> jtr{};
    const double s4 = std::abs(b.beta4);
    const double sign4 = b.beta4 < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (pred[i] - b.beta3) / s4;
      const double s = 1.0 / (1.0 + std::exp(-u));
      const double ds = s * (1.0 - s) * (b.beta1 - b.beta2);
      const std::array<double, 4> j{s, 1.0 - s, -ds / s4, -ds * u / s4 * sign4};
      const double r = (b.beta1 - b.beta2) * s + b.beta2 - mos[i];
      for (int p = 0; p < 4; ++p) {
        jtr[p] += j[p] * r;
        for (int q = 0; q < 4; ++q) jtj[p][q] += j[p] * j[q];
      }
    }
    for (int p = 0; p < 4; ++p) {
      if (!std::isfinite(jtr[p])) fail(ErrorCode::NonFinite, "non-finite gradient in 4PL fit at iteration " + std::to_string(res.iterations));
    }

    bool accepted = false;
    while (!accepted && lambda < 1e16) {
      auto damped = jtj;
      for (int p = 0; p < 4; ++p) damped[p][p] += lambda * std::max(jtj[p][p], 1e-12);
      std::array<double, 4> neg{-jtr[0], -jtr[1], -jtr[2], -jtr[3]};
      std::array<double, 4> step{};
      if (solve4(damped, neg, step)) {
        const FourPL trial{b.beta1 + step[0], b.beta2 + step[1], b.beta3 + step[2], b.beta4 + step[3]};
        const double trial_sse = std::abs(trial.beta4) > 1e-12 ? sse_of(trial, pred, mos) : INFINITY;
        if (std::isfinite(trial_sse) && trial_sse < sse) {
          const double drop = (sse - trial_sse) / sse;
          b = trial;
          sse = trial_sse;
          lambda = std::max(lambda / 10.0, 1e-12);
          accepted = true;
          if (drop < opts.relative_tolerance || sse == 0.0) res.converged = true;
          break;
        }
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No descent direction left at any damping: a stationary point.
      res.converged = true;
    }
    if (res.converged) {
      ++res.iterations;
      break;
    }
  }
  res.params = b;
  res.sse = sse;
  return res;
}

std::vector<double> apply_4pl(const FourPL& fit, std::span<const double> pred) {
  std::vector<double> out(pred.size());
  std::transform(pred.begin(), pred.end(), out.begin(), [&](double x) { return fit(x); });
  return out;
}

Report evaluate(std::span<const double> pred, std::span<const double> mos) {
  Report r;
  r.n = pred.size();
  r.srcc = spearman(pred, mos);
  r.plcc_raw = pearson(pred, mos);
  try {
    const FitResult f = fit_4pl(pred, mos);
    r.plcc_4pl = pearson(apply_4pl(f.params, pred), mos);
    r.fit = f.params;
  } catch (const Error& e) {
    r.fit_failed = true;
    r.fit_error = e.what();
    r.plcc_4pl = r.plcc_raw;
  }
  return r;
}

double challenge_score(double srcc, double plcc, double rank1, double rank2) {
  for (double c : {srcc, plcc}) {
    if (!(c >= -1.0 && c <= 1.0)) fail(ErrorCode::InvalidArgument, "correlation outside [-1, 1]");
  }
  for (double c : {rank1, rank2}) {
    if (!(c >= 0.0 && c <= 1.0)) fail(ErrorCode::InvalidArgument, "rank metric outside [0, 1]");
  }
  return (45.0 * srcc + 45.0 * plcc + 5.0 * rank1 + 5.0 * rank2) / 100.0;
}

}  // namespace rqvqa::eval
