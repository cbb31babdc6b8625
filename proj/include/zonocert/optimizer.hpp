#pragma once

#include <map>

#include "zonocert/network.hpp"

namespace zonocert::nn {

// Step-decay schedule: starting at start_epoch, the rate is multiplied by
// factor once per period. start_epoch < 0 disables the schedule.
struct LrSchedule {
    int start_epoch = -1;
    double factor = 1.0;
    int period = 1;

    double rate_at(double base_rate, int epoch) const;
};

class OptimizerState {
public:
    enum class Kind { SgdMomentum, Adam };

    static OptimizerState sgd_momentum(double lr, double momentum, LrSchedule schedule = {});
    static OptimizerState adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                               double eps = 1e-8, LrSchedule schedule = {});

    Kind kind() const { return kind_; }
    double base_rate() const { return lr_; }
    const LrSchedule& schedule() const { return schedule_; }

    // Applies one update to every unfrozen parameter present in grads.
    // Frozen parameters must not appear; unknown keys are an error.
    void step(LayeredNetwork& net, const GradientMap& grads, int epoch);

    // Buffers are tied to a parameter set; call when the trainable set changes.
    void reset_buffers();

private:
    OptimizerState() = default;
    Kind kind_ = Kind::SgdMomentum;
    double lr_ = 0.01;
    double momentum_ = 0.9;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    LrSchedule schedule_;
    std::map<ParamKey, Tensor> velocity_;
    std::map<ParamKey, Tensor> adam_m_;
    std::map<ParamKey, Tensor> adam_v_;
    long step_count_ = 0;
};

} // namespace zonocert::nn
