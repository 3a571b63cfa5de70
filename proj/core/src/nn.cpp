#include "seqformer/nn.hpp"

#include <cmath>
#include <numbers>

#include "seqformer/errors.hpp"

namespace seqformer {

namespace {

void require_valid(bool valid, const char* what) {
  if (!valid) throw StateError(std::string(what) + ": backward called before forward");
}

void require_cols(const Matrix& m, Index cols, const char* what) {
  if (m.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(cols) +
                     " columns, got " + std::to_string(m.cols()));
  }
}

Matrix apply_gelu(const Matrix& x) { return x.unaryExpr([](double v) { return gelu(v); }); }

Matrix apply_gelu_derivative(const Matrix& x) {
  return x.unaryExpr([](double v) { return gelu_derivative(v); });
}

}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
  return cdf + x * pdf;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// --- Linear ------------------------------------------------------------------

Linear Linear::create(ParameterStore& store, const std::string& prefix, Index in, Index out) {
  Linear l;
  l.in = in;
  l.out = out;
  l.weight = store.add(prefix + ".weight", out, in);
  l.bias = store.add(prefix + ".bias", 1, out);
  return l;
}

Matrix Linear::forward(const ParameterStore& params, const Matrix& x) const {
  require_cols(x, in, "Linear::forward");
  Matrix y = x * params.tensor(weight).transpose();
  y.rowwise() += params.tensor(bias).row(0);
  return y;
}

Matrix Linear::backward(const ParameterStore& params, Gradients& grads, const Matrix& x,
                        const Matrix& dy) const {
  require_cols(dy, out, "Linear::backward");
  if (x.rows() != dy.rows()) throw ShapeError("Linear::backward: batch mismatch");
  grads.tensor(weight).noalias() += dy.transpose() * x;
  grads.tensor(bias).row(0) += dy.colwise().sum();
  return dy * params.tensor(weight);
}

// --- MLP ---------------------------------------------------------------------

Matrix dropout_mask(Index rows, Index cols, double rate, Rng& rng) {
  Matrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      mask(r, c) = rng.uniform() < rate ? 0.0 : keep_scale;
    }
  }
  return mask;
}

MlpBlockPair MlpBlockPair::create(ParameterStore& store, const std::string& prefix, Index in,
                                  Index hidden, Index out, double dropout_rate) {
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1)");
  }
  MlpBlockPair m;
  m.block1 = Linear::create(store, prefix + ".block1", in, hidden);
  m.block2 = Linear::create(store, prefix + ".block2", hidden, out);
  m.dropout_rate = dropout_rate;
  return m;
}

Matrix MlpBlockPair::forward(const ParameterStore& params, const Matrix& x, Mode mode, Rng& rng,
                             MlpCache* cache) const {
  const bool drop = mode == Mode::Train && dropout_rate > 0.0;

  Matrix pre1 = block1.forward(params, x);
  Matrix out1 = apply_gelu(pre1);
  Matrix mask1;
  if (drop) {
    mask1 = dropout_mask(out1.rows(), out1.cols(), dropout_rate, rng);
    out1.array() *= mask1.array();
  }

  Matrix pre2 = block2.forward(params, out1);
  Matrix out2 = apply_gelu(pre2);
  Matrix mask2;
  if (drop) {
    mask2 = dropout_mask(out2.rows(), out2.cols(), dropout_rate, rng);
    out2.array() *= mask2.array();
  }

  if (cache != nullptr) {
    cache->valid = true;
    cache->input = x;
    cache->pre1 = std::move(pre1);
    cache->mask1 = std::move(mask1);
    cache->out1 = std::move(out1);
    cache->pre2 = std::move(pre2);
    cache->mask2 = std::move(mask2);
  }
  return out2;
}

Matrix MlpBlockPair::backward(const ParameterStore& params, Gradients& grads,
                              const MlpCache& cache, const Matrix& dy) const {
  require_valid(cache.valid, "MlpBlockPair");
  Matrix d2 = dy;
  if (cache.mask2.size() != 0) d2.array() *= cache.mask2.array();
  d2.array() *= apply_gelu_derivative(cache.pre2).array();
  Matrix d1 = block2.backward(params, grads, cache.out1, d2);
  if (cache.mask1.size() != 0) d1.array() *= cache.mask1.array();
  d1.array() *= apply_gelu_derivative(cache.pre1).array();
  return block1.backward(params, grads, cache.input, d1);
}

// --- Sigmoid cross-attention ---------------------------------------------------

Matrix sca_single_head(const Matrix& q, const Matrix& k, const Matrix& v, double d,
                       ScaCache* cache) {
  if (q.rows() != k.rows() || q.rows() != v.rows() || q.cols() != k.cols() ||
      q.cols() != v.cols()) {
    throw ShapeError("sca_single_head: query, key and value must have the same shape");
  }
  if (!(d > 0.0)) throw ConfigError("sca_single_head: scale must be positive");

  const double inv_sqrt_d = 1.0 / std::sqrt(d);
  Vector gate(q.rows());
  for (Index b = 0; b < q.rows(); ++b) {
    gate(b) = sigmoid(q.row(b).dot(k.row(b)) * inv_sqrt_d);
  }
  Matrix out = v.array().colwise() * gate.array();

  if (cache != nullptr) {
    cache->valid = true;
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->gate = std::move(gate);
    cache->scale = d;
  }
  return out;
}

Vector sca_single_head(const Vector& q, const Vector& k, const Vector& v, double d) {
  const Matrix out = sca_single_head(Matrix(q.transpose()), Matrix(k.transpose()),
                                     Matrix(v.transpose()), d);
  return out.row(0).transpose();
}

ScaInputGrads sca_single_head_backward(const ScaCache& cache, const Matrix& dout) {
  require_valid(cache.valid, "sca_single_head");
  if (dout.rows() != cache.v.rows() || dout.cols() != cache.v.cols()) {
    throw ShapeError("sca_single_head_backward: gradient shape mismatch");
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(cache.scale);
  ScaInputGrads g;
  g.dv = dout.array().colwise() * cache.gate.array();
  // d score = <dout, v> * gate * (1 - gate) / sqrt(d)
  Vector dscore = (dout.array() * cache.v.array()).rowwise().sum().matrix();
  dscore.array() *= cache.gate.array() * (1.0 - cache.gate.array()) * inv_sqrt_d;
  g.dq = cache.k.array().colwise() * dscore.array();
  g.dk = cache.q.array().colwise() * dscore.array();
  return g;
}

MultiHeadSca MultiHeadSca::create(ParameterStore& store, const std::string& prefix, Index dim,
                                  Index num_heads) {
  if (num_heads <= 0 || dim <= 0 || dim % num_heads != 0) {
    throw ConfigError("multi-head attention: dimension " + std::to_string(dim) +
                      " is not divisible by " + std::to_string(num_heads) + " heads");
  }
  MultiHeadSca m;
  m.query = Linear::create(store, prefix + ".query", dim, dim);
  m.key = Linear::create(store, prefix + ".key", dim, dim);
  m.value = Linear::create(store, prefix + ".value", dim, dim);
  m.output = Linear::create(store, prefix + ".output", dim, dim);
  m.num_heads = num_heads;
  return m;
}

Matrix MultiHeadSca::forward(const ParameterStore& params, const Matrix& q_in, const Matrix& k_in,
                             const Matrix& v_in, MhaCache* cache) const {
  if (q_in.rows() != k_in.rows() || q_in.rows() != v_in.rows()) {
    throw ShapeError("MultiHeadSca::forward: batch mismatch");
  }
  Matrix q = query.forward(params, q_in);
  Matrix k = key.forward(params, k_in);
  Matrix v = value.forward(params, v_in);

  const Index h = head_dim();
  const double inv_sqrt_h = 1.0 / std::sqrt(static_cast<double>(h));
  Matrix gates(q.rows(), num_heads);
  Matrix concat(q.rows(), dim());
  for (Index head = 0; head < num_heads; ++head) {
    const Index c0 = head * h;
    for (Index b = 0; b < q.rows(); ++b) {
      const double g = sigmoid(q.row(b).segment(c0, h).dot(k.row(b).segment(c0, h)) * inv_sqrt_h);
      gates(b, head) = g;
      concat.row(b).segment(c0, h) = g * v.row(b).segment(c0, h);
    }
  }
  Matrix y = output.forward(params, concat);

  if (cache != nullptr) {
    cache->valid = true;
    cache->q_in = q_in;
    cache->k_in = k_in;
    cache->v_in = v_in;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->gates = std::move(gates);
    cache->concat = std::move(concat);
  }
  return y;
}

ScaInputGrads MultiHeadSca::backward(const ParameterStore& params, Gradients& grads,
                                     const MhaCache& cache, const Matrix& dy) const {
  require_valid(cache.valid, "MultiHeadSca");
  const Matrix dconcat = output.backward(params, grads, cache.concat, dy);

  const Index h = head_dim();
  const double inv_sqrt_h = 1.0 / std::sqrt(static_cast<double>(h));
  const Index batch = dconcat.rows();
  Matrix dq(batch, dim());
  Matrix dk(batch, dim());
  Matrix dv(batch, dim());
  for (Index head = 0; head < num_heads; ++head) {
    const Index c0 = head * h;
    for (Index b = 0; b < batch; ++b) {
      const double g = cache.gates(b, head);
      const auto dout = dconcat.row(b).segment(c0, h);
      dv.row(b).segment(c0, h) = g * dout;
      const double dscore =
          dout.dot(cache.v.row(b).segment(c0, h)) * g * (1.0 - g) * inv_sqrt_h;
      dq.row(b).segment(c0, h) = dscore * cache.k.row(b).segment(c0, h);
      dk.row(b).segment(c0, h) = dscore * cache.q.row(b).segment(c0, h);
    }
  }

  ScaInputGrads g;
  g.dq = query.backward(params, grads, cache.q_in, dq);
  g.dk = key.backward(params, grads, cache.k_in, dk);
  g.dv = value.backward(params, grads, cache.v_in, dv);
  return g;
}

// --- Daytime embedding -----------------------------------------------------------

Vector daytime_embed(double minute_of_day, Index n) {
  if (n <= 0 || n % 2 != 0) {
    throw ConfigError("daytime embedding size must be a positive even integer");
  }
  if (!std::isfinite(minute_of_day)) throw InputError("daytime must be finite");
  double pos = std::fmod(minute_of_day, 1440.0);
  if (pos < 0.0) pos += 1440.0;

  Vector e(n);
  for (Index k = 0; k < n / 2; ++k) {
    const double freq = std::pow(10000.0, static_cast<double>(2 * k) / static_cast<double>(n));
    e(2 * k) = std::sin(pos / freq);
    e(2 * k + 1) = std::cos(pos / freq);
  }
  return e;
}

Matrix daytime_embed_rows(const Vector& minutes, Index n) {
  Matrix out(minutes.size(), n);
  for (Index b = 0; b < minutes.size(); ++b) out.row(b) = daytime_embed(minutes(b), n).transpose();
  return out;
}

}  // namespace seqformer
