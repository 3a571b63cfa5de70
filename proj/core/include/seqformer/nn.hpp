#pragma once

#include <string>

#include "seqformer/parameters.hpp"
#include "seqformer/random.hpp"
#include "seqformer/tensor.hpp"

namespace seqformer {

enum class Mode { Train, Eval };

/// Exact GELU, 0.5 x (1 + erf(x / sqrt 2)).
double gelu(double x);
double gelu_derivative(double x);
double sigmoid(double x);

/// Affine map y = W x + b with W stored out x in. Holds only tensor ids; the
/// values live in a ParameterStore.
struct Linear {
  TensorId weight;
  TensorId bias;
  Index in = 0;
  Index out = 0;

  static Linear create(ParameterStore& store, const std::string& prefix, Index in, Index out);

  std::size_t parameter_count() const { return static_cast<std::size_t>(out * in + out); }

  /// x: batch x in -> batch x out.
  Matrix forward(const ParameterStore& params, const Matrix& x) const;

  /// Accumulates dW, db into grads and returns dL/dx.
  Matrix backward(const ParameterStore& params, Gradients& grads, const Matrix& x,
                  const Matrix& dy) const;
};

struct MlpCache {
  bool valid = false;
  Matrix input;
  Matrix pre1;
  Matrix mask1;  // empty when dropout was inactive
  Matrix out1;
  Matrix pre2;
  Matrix mask2;
};

/// Two blocks of dropout(GELU(Linear(x))).
struct MlpBlockPair {
  Linear block1;
  Linear block2;
  double dropout_rate = 0.0;

  static MlpBlockPair create(ParameterStore& store, const std::string& prefix, Index in,
                             Index hidden, Index out, double dropout_rate);

  std::size_t parameter_count() const {
    return block1.parameter_count() + block2.parameter_count();
  }

  Matrix forward(const ParameterStore& params, const Matrix& x, Mode mode, Rng& rng,
                 MlpCache* cache = nullptr) const;

  Matrix backward(const ParameterStore& params, Gradients& grads, const MlpCache& cache,
                  const Matrix& dy) const;
};

/// Inverted dropout mask: each entry 0 with probability rate, else 1/(1-rate).
Matrix dropout_mask(Index rows, Index cols, double rate, Rng& rng);

struct ScaCache {
  bool valid = false;
  Matrix q;
  Matrix k;
  Matrix v;
  Vector gate;  // one gate per row
  double scale = 1.0;
};

struct ScaInputGrads {
  Matrix dq;
  Matrix dk;
  Matrix dv;
};

/// Sigmoid cross-attention, row-wise: out_b = sigmoid(<q_b, k_b> / sqrt(d)) * v_b.
Matrix sca_single_head(const Matrix& q, const Matrix& k, const Matrix& v, double d,
                       ScaCache* cache = nullptr);
ScaInputGrads sca_single_head_backward(const ScaCache& cache, const Matrix& dout);

/// Single-sample convenience overload.
Vector sca_single_head(const Vector& q, const Vector& k, const Vector& v, double d);

struct MhaCache {
  bool valid = false;
  Matrix q_in;
  Matrix k_in;
  Matrix v_in;
  Matrix q;
  Matrix k;
  Matrix v;
  Matrix gates;   // batch x heads
  Matrix concat;  // batch x dim, input of the output projection
};

/// Multi-head sigmoid cross-attention. q/k/v are each projected once, split
/// into num_heads chunks of width dim/num_heads, gated per chunk with the
/// chunk width as scale, concatenated and projected.
struct MultiHeadSca {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  Index num_heads = 1;

  static MultiHeadSca create(ParameterStore& store, const std::string& prefix, Index dim,
                             Index num_heads);

  Index dim() const { return output.out; }
  Index head_dim() const { return dim() / num_heads; }
  std::size_t parameter_count() const {
    return query.parameter_count() + key.parameter_count() + value.parameter_count() +
           output.parameter_count();
  }

  Matrix forward(const ParameterStore& params, const Matrix& q, const Matrix& k, const Matrix& v,
                 MhaCache* cache = nullptr) const;

  ScaInputGrads backward(const ParameterStore& params, Gradients& grads, const MhaCache& cache,
                         const Matrix& dy) const;
};

/// Sinusoidal daytime embedding of minutes-since-midnight (reduced mod 1440).
/// e[2k] = sin(pos / 10000^(2k/n)), e[2k+1] = cos(pos / 10000^(2k/n)).
Vector daytime_embed(double minute_of_day, Index n);

/// Row b is daytime_embed(minutes[b], n).
Matrix daytime_embed_rows(const Vector& minutes, Index n);

}  // namespace seqformer
