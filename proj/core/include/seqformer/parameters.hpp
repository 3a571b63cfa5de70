#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "seqformer/tensor.hpp"

namespace seqformer {

// Eigen's vectorized reductions over an unaligned Map peel a number of leading
// elements that depends on the address, which changes the summation order. An
// aligned base makes every tensor's alignment a function of its offset alone,
// so results do not depend on where the heap put the buffer.
using AlignedValues = std::vector<double, Eigen::aligned_allocator<double>>;

struct TensorId {
  std::size_t index = 0;
};

struct TensorInfo {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
};

/// Every trainable tensor of a model, stored contiguously in registration
/// order. The registration order is the serialization order.
class ParameterStore {
 public:
  TensorId add(std::string name, Index rows, Index cols);

  std::size_t tensor_count() const { return layout_.size(); }
  std::size_t size() const { return values_.size(); }
  const std::vector<TensorInfo>& layout() const { return layout_; }
  const TensorInfo& info(TensorId id) const { return layout_.at(id.index); }

  MatrixMap tensor(TensorId id);
  ConstMatrixMap tensor(TensorId id) const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  /// Same layout (names and shapes, in order).
  bool same_layout(const ParameterStore& other) const;

  friend bool operator==(const ParameterStore& a, const ParameterStore& b) {
    return a.same_layout(b) && a.values_ == b.values_;
  }

 private:
  std::vector<TensorInfo> layout_;
  AlignedValues values_;
};

/// Gradient slots congruent to a ParameterStore.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParameterStore& store);

  MatrixMap tensor(TensorId id);
  ConstMatrixMap tensor(TensorId id) const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  void zero();
  void scale(double factor);
  Gradients& operator+=(const Gradients& other);

 private:
  std::vector<TensorInfo> layout_;
  AlignedValues values_;
};

}  // namespace seqformer
