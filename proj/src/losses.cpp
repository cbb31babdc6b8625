#include "zonocert/losses.hpp"

#include <cmath>
#include <string>

namespace zonocert::train {

using nn::kProbFloor;

double kl_div(const nn::Tensor& p, const nn::Tensor& q) {
    if (p.size() != q.size()) {
        throw ShapeError("kl_div: length " + std::to_string(p.size()) + " vs " +
                         std::to_string(q.size()));
    }
    double acc = 0.0;
    for (std::int64_t i = 0; i < p.size(); ++i) {
        acc += p[i] * (std::log(p[i] + kProbFloor) - std::log(q[i] + kProbFloor));
    }
    return acc;
}

double soft_indicator(const nn::Tensor& p_nat, int y) {
    if (y < 0 || y >= p_nat.size()) throw IndexError("soft_indicator class " + std::to_string(y));
    return 1.0 - p_nat[y];
}

double colt_loss(const nn::Tensor& p_nat, const nn::Tensor& p_adv, int y) {
    return nn::cross_entropy(p_nat, y) + nn::cross_entropy(p_adv, y);
}

double mat_loss(const nn::Tensor& p_nat, const nn::Tensor& p_adv, int y, int y_pred) {
    return nn::cross_entropy(p_nat, y) + nn::cross_entropy(p_adv, y_pred == y ? y : y_pred);
}

double maar_loss(const nn::Tensor& p_nat, const nn::Tensor& p_adv, int y, double lambda) {
    if (lambda < 0.0) throw DomainError("lambda must be non-negative");
    return colt_loss(p_nat, p_adv, y) + lambda * kl_div(p_nat, p_adv) * soft_indicator(p_nat, y);
}

nn::NodeId tape_cross_entropy(nn::Tape& t, nn::NodeId p, int y) {
    return t.scale(t.log_shift(t.pick(p, y), kProbFloor), -1.0);
}

nn::NodeId tape_kl(nn::Tape& t, nn::NodeId p, nn::NodeId q) {
    return t.sum(t.mul(p, t.sub(t.log_shift(p, kProbFloor), t.log_shift(q, kProbFloor))));
}

nn::NodeId tape_soft_indicator(nn::Tape& t, nn::NodeId p, int y) {
    return t.add_const(t.scale(t.pick(p, y), -1.0), 1.0);
}

nn::NodeId tape_colt(nn::Tape& t, nn::NodeId p_nat, nn::NodeId p_adv, int y) {
    return t.add(tape_cross_entropy(t, p_nat, y), tape_cross_entropy(t, p_adv, y));
}

nn::NodeId tape_mat(nn::Tape& t, nn::NodeId p_nat, nn::NodeId p_adv, int y, int y_pred) {
    return t.add(tape_cross_entropy(t, p_nat, y),
                 tape_cross_entropy(t, p_adv, y_pred == y ? y : y_pred));
}

nn::NodeId tape_maar(nn::Tape& t, nn::NodeId p_nat, nn::NodeId p_adv, int y, double lambda) {
    if (lambda < 0.0) throw DomainError("lambda must be non-negative");
    nn::NodeId reg = t.scale(t.mul(tape_kl(t, p_nat, p_adv), tape_soft_indicator(t, p_nat, y)), lambda);
    return t.add(tape_colt(t, p_nat, p_adv, y), reg);
}

} // namespace zonocert::train
