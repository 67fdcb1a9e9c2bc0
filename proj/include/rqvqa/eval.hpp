#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rqvqa::eval {

/// mos ~ (beta1 - beta2) / (1 + exp(-(pred - beta3) / |beta4|)) + beta2
struct FourPL {
  double beta1 = 0.0;  // upper asymptote
  double beta2 = 0.0;  // lower asymptote
  double beta3 = 0.0;  // inflection location
  double beta4 = 1.0;  // slope scale (sign ignored)

  double operator()(double x) const;
};

struct FitOptions {
  int max_iterations = 200;
  double relative_tolerance = 1e-10;
};

struct FitResult {
  FourPL params;
  int iterations = 0;
  double sse = 0.0;
  bool converged = false;
};

double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

/// Average (fractional, 1-based) ranks; ties share the mean of their positions.
std::vector<double> fractional_ranks(std::span<const double> values);

/// Damped Gauss-Newton (Levenberg-Marquardt) least-squares fit.
FitResult fit_4pl(std::span<const double> pred, std::span<const double> mos, const FitOptions& opts = {});
std::vector<double> apply_4pl(const FourPL& fit, std::span<const double> pred);

struct Report {
  double srcc = 0.0;
  double plcc_raw = 0.0;
  double plcc_4pl = 0.0;
  std::optional<FourPL> fit;
  std::size_t n = 0;
  bool fit_failed = false;  // plcc_4pl fell back to plcc_raw
  std::string fit_error;
};

Report evaluate(std::span<const double> pred, std::span<const double> mos);

/// 0.45 SRCC + 0.45 PLCC + 0.05 Rank1 + 0.05 Rank2; the rank terms are opaque inputs.
double challenge_score(double srcc, double plcc, double rank1, double rank2);

}  // namespace rqvqa::eval
