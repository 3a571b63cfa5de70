#include "seqformer/parameters.hpp"

#include <algorithm>

#include "seqformer/errors.hpp"

namespace seqformer {

TensorId ParameterStore::add(std::string name, Index rows, Index cols) {
  if (rows <= 0 || cols <= 0) {
    throw ConfigError("tensor '" + name + "' must have positive dimensions");
  }
  TensorInfo info{std::move(name), rows, cols, values_.size()};
  values_.resize(values_.size() + info.size(), 0.0);
  layout_.push_back(std::move(info));
  return TensorId{layout_.size() - 1};
}

MatrixMap ParameterStore::tensor(TensorId id) {
  const TensorInfo& t = layout_.at(id.index);
  return MatrixMap(values_.data() + t.offset, t.rows, t.cols);
}

ConstMatrixMap ParameterStore::tensor(TensorId id) const {
  const TensorInfo& t = layout_.at(id.index);
  return ConstMatrixMap(values_.data() + t.offset, t.rows, t.cols);
}

bool ParameterStore::same_layout(const ParameterStore& other) const {
  return std::equal(layout_.begin(), layout_.end(), other.layout_.begin(), other.layout_.end(),
                    [](const TensorInfo& a, const TensorInfo& b) {
                      return a.name == b.name && a.rows == b.rows && a.cols == b.cols;
                    });
}

Gradients::Gradients(const ParameterStore& store)
    : layout_(store.layout()), values_(store.size(), 0.0) {}

MatrixMap Gradients::tensor(TensorId id) {
  const TensorInfo& t = layout_.at(id.index);
  return MatrixMap(values_.data() + t.offset, t.rows, t.cols);
}

ConstMatrixMap Gradients::tensor(TensorId id) const {
  const TensorInfo& t = layout_.at(id.index);
  return ConstMatrixMap(values_.data() + t.offset, t.rows, t.cols);
}

void Gradients::zero() { std::fill(values_.begin(), values_.end(), 0.0); }

void Gradients::scale(double factor) {
  for (double& g : values_) g *= factor;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.values_.size() != values_.size()) {
    throw ShapeError("gradient buffers are not congruent");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

}  // namespace seqformer
