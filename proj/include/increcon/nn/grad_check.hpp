#pragma once

#include <cstdint>

namespace increcon::nn {

enum class GradOp { SparseConv, Mlp, Gru, OccupancyLoss, SdfLoss };

// Compares analytic gradients against central differences
// (f(x+h)-f(x-h))/2h on a seeded random instance, in double precision.
// Returns the max relative error with denominator max(|analytic|,|numeric|,1e-8).
double grad_check(GradOp op, uint64_t seed, double h = 1e-5);

const char* grad_op_name(GradOp op);

}  // namespace increcon::nn
