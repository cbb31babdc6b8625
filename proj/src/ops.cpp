#include "zonocert/ops.hpp"

#include <cmath>
#include <string>

namespace zonocert::nn {

Tensor softmax(const Tensor& logits) {
    if (logits.size() < 2) throw ShapeError("softmax needs at least 2 logits");
    logits.check_finite("softmax input");
    double mx = logits[0];
    for (std::int64_t i = 1; i < logits.size(); ++i) mx = std::max(mx, logits[i]);
    Tensor p({static_cast<int>(logits.size())});
    double sum = 0.0;
    for (std::int64_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (std::int64_t i = 0; i < p.size(); ++i) p[i] /= sum;
    return p;
}

double cross_entropy(const Tensor& p, int y) {
    if (y < 0 || y >= p.size()) {
        throw IndexError("class " + std::to_string(y) + " out of range for " +
                         std::to_string(p.size()) + " classes");
    }
    return -std::log(p[y] + kProbFloor);
}

} // namespace zonocert::nn
