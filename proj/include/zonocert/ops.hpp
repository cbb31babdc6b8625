#pragma once

#include "zonocert/tensor.hpp"

namespace zonocert::nn {

// Probability floor used inside every log() so a zero probability never
// poisons a loss with -inf.
inline constexpr double kProbFloor = 1e-12;

// Max-subtracted softmax; entries positive and summing to one.
Tensor softmax(const Tensor& logits);

// -log(p[y] + floor).
double cross_entropy(const Tensor& p, int y);

} // namespace zonocert::nn
