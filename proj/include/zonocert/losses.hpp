#pragma once

#include "zonocert/ops.hpp"
#include "zonocert/tape.hpp"

namespace zonocert::train {

// KL(p || q) with both logs floored; exactly zero when p == q.
double kl_div(const nn::Tensor& p, const nn::Tensor& q);

// Soft replacement for the misclassification indicator: 1 - p[y].
double soft_indicator(const nn::Tensor& p_nat, int y);

double colt_loss(const nn::Tensor& p_nat, const nn::Tensor& p_adv, int y);

// Adversarial term retargeted to the model's own prediction when the natural
// example is misclassified; identical to colt_loss otherwise.
double mat_loss(const nn::Tensor& p_nat, const nn::Tensor& p_adv, int y, int y_pred);

// colt_loss + lambda * KL(p_nat || p_adv) * (1 - p_nat[y]).
double maar_loss(const nn::Tensor& p_nat, const nn::Tensor& p_adv, int y, double lambda);

// Tape builders over probability nodes; gradients flow into both branches.
nn::NodeId tape_cross_entropy(nn::Tape& t, nn::NodeId p, int y);
nn::NodeId tape_kl(nn::Tape& t, nn::NodeId p, nn::NodeId q);
nn::NodeId tape_soft_indicator(nn::Tape& t, nn::NodeId p, int y);
nn::NodeId tape_colt(nn::Tape& t, nn::NodeId p_nat, nn::NodeId p_adv, int y);
nn::NodeId tape_mat(nn::Tape& t, nn::NodeId p_nat, nn::NodeId p_adv, int y, int y_pred);
nn::NodeId tape_maar(nn::Tape& t, nn::NodeId p_nat, nn::NodeId p_adv, int y, double lambda);

} // namespace zonocert::train
