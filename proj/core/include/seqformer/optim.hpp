#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "seqformer/parameters.hpp"

namespace seqformer {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction over a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t size, AdamOptions options = {});

  void step(std::span<double> params, std::span<const double> grads);

  double learning_rate() const { return options_.learning_rate; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  std::int64_t steps() const { return steps_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

 private:
  AdamOptions options_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t steps_ = 0;
};

struct PlateauOptions {
  double factor = 0.5;
  int patience = 15;
  double min_lr = 1e-6;
  double threshold = 1e-8;  // absolute improvement required
};

/// Reduce-on-plateau: after `patience` consecutive epochs without improvement
/// the learning rate is multiplied by `factor` (floored at min_lr) and the
/// counter restarts.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(PlateauOptions options = {}) : options_(options) {}

  double step(double val_loss, double current_lr);

  double best() const { return best_; }
  int epochs_since_improvement() const { return bad_epochs_; }

 private:
  PlateauOptions options_;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

enum class StopDecision { Continue, Stop };

/// Tracks the best validation loss and keeps a snapshot of the parameters
/// that produced it.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience = 150, double threshold = 1e-8)
      : patience_(patience), threshold_(threshold) {}

  StopDecision update(double val_loss, int epoch, const ParameterStore& params);

  double best_val_loss() const { return best_; }
  int best_epoch() const { return best_epoch_; }
  int epochs_since_improvement() const { return bad_epochs_; }
  bool has_snapshot() const { return best_epoch_ > 0; }
  const ParameterStore& best_parameters() const { return snapshot_; }

 private:
  int patience_;
  double threshold_;
  double best_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
  int bad_epochs_ = 0;
  ParameterStore snapshot_;
};

}  // namespace seqformer
