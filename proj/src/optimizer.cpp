#include "zonocert/optimizer.hpp"

#include <cmath>
#include <string>

namespace zonocert::nn {

double LrSchedule::rate_at(double base_rate, int epoch) const {
    if (start_epoch < 0 || epoch < start_epoch) return base_rate;
    const int decays = (epoch - start_epoch) / period + 1;
    return base_rate * std::pow(factor, decays);
}

OptimizerState OptimizerState::sgd_momentum(double lr, double momentum, LrSchedule schedule) {
    if (lr <= 0.0) throw ConfigError("learning rate must be positive");
    OptimizerState s;
    s.kind_ = Kind::SgdMomentum;
    s.lr_ = lr;
    s.momentum_ = momentum;
    s.schedule_ = schedule;
    return s;
}

OptimizerState OptimizerState::adam(double lr, double beta1, double beta2, double eps,
                                    LrSchedule schedule) {
    if (lr <= 0.0) throw ConfigError("learning rate must be positive");
    OptimizerState s;
    s.kind_ = Kind::Adam;
    s.lr_ = lr;
    s.beta1_ = beta1;
    s.beta2_ = beta2;
    s.eps_ = eps;
    s.schedule_ = schedule;
    return s;
}

void OptimizerState::reset_buffers() {
    velocity_.clear();
    adam_m_.clear();
    adam_v_.clear();
    step_count_ = 0;
}

void OptimizerState::step(LayeredNetwork& net, const GradientMap& grads, int epoch) {
    const double eta = schedule_.rate_at(lr_, epoch);
    ++step_count_;
    for (const auto& [key, grad] : grads) {
        if (net.layer(key.layer).frozen) {
            throw ConfigError("gradient supplied for frozen layer " + std::to_string(key.layer));
        }
        Tensor& p = net.param(key);
        if (!p.same_shape(grad)) {
            throw ShapeError("gradient shape " + grad.shape_str() + " vs param " + p.shape_str());
        }
        if (kind_ == Kind::SgdMomentum) {
            auto it = velocity_.find(key);
            if (it == velocity_.end()) it = velocity_.emplace(key, Tensor(p.shape())).first;
            Tensor& v = it->second;
            for (std::int64_t i = 0; i < p.size(); ++i) {
                v[i] = momentum_ * v[i] + grad[i];
                p[i] -= eta * v[i];
            }
        } else {
            auto mi = adam_m_.find(key);
            if (mi == adam_m_.end()) mi = adam_m_.emplace(key, Tensor(p.shape())).first;
            auto vi = adam_v_.find(key);
            if (vi == adam_v_.end()) vi = adam_v_.emplace(key, Tensor(p.shape())).first;
            Tensor& m = mi->second;
            Tensor& v = vi->second;
            const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
            const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
            for (std::int64_t i = 0; i < p.size(); ++i) {
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                p[i] -= eta * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }
}

} // namespace zonocert::nn
