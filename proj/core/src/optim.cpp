#include "seqformer/optim.hpp"

#include <algorithm>
#include <cmath>

#include "seqformer/errors.hpp"

namespace seqformer {

Adam::Adam(std::size_t size, AdamOptions options)
    : options_(options), m_(size, 0.0), v_(size, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("Adam::step: parameter/gradient size mismatch");
  }
  ++steps_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double lr = options_.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + options_.epsilon);
  }
}

double PlateauScheduler::step(double val_loss, double lr) {
  if (val_loss < best_ - options_.threshold) {
    best_ = val_loss;
    bad_epochs_ = 0;
    return lr;
  }
  if (++bad_epochs_ >= options_.patience) {
    bad_epochs_ = 0;
    return std::min(lr, std::max(lr * options_.factor, options_.min_lr));
  }
  return lr;
}

StopDecision EarlyStopping::update(double val_loss, int epoch, const ParameterStore& params) {
  if (val_loss < best_ - threshold_) {
    best_ = val_loss;
    best_epoch_ = epoch;
    bad_epochs_ = 0;
    snapshot_ = params;
    return StopDecision::Continue;
  }
  return ++bad_epochs_ >= patience_ ? StopDecision::Stop : StopDecision::Continue;
}

}  // namespace seqformer
