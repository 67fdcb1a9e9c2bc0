#pragma once

#include <span>
#include <vector>

namespace rqvqa {

/// Added to each centred norm in the correlation loss.
inline constexpr double kPlccEpsilon = 1e-8;

/// (1 - rho) / 2 where rho is the Pearson correlation of the batch.
double plcc_loss(std::span<const double> pred, std::span<const double> mos);
std::vector<double> plcc_loss_grad(std::span<const double> pred, std::span<const double> mos);

double mse_loss(std::span<const double> pred, std::span<const double> mos);
std::vector<double> mse_loss_grad(std::span<const double> pred, std::span<const double> mos);

}  // namespace rqvqa
