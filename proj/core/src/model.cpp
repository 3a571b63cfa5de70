#include "seqformer/model.hpp"

#include <string>

#include "seqformer/errors.hpp"

namespace seqformer {

namespace {

constexpr double kInitStddev = 0.02;

bool is_bias(const std::string& name) {
  return name.size() >= 5 && name.compare(name.size() - 5, 5, ".bias") == 0;
}

Matrix broadcast_rows(const ConstMatrixMap& row, Index rows) {
  return row.replicate(rows, 1);
}

}  // namespace

void ModelConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (embed_dim <= 0 || embed_dim % 2 != 0) fail("embed_dim must be a positive even integer");
  if (num_heads <= 0 || embed_dim % num_heads != 0) fail("embed_dim must be divisible by num_heads");
  if (observed_len < 1) fail("observed_len must be >= 1");
  if (forecast_len < 1) fail("forecast_len must be >= 1");
  if (feature_count < 1) fail("feature_count must be >= 1");
  if (mlp_hidden < 1) fail("mlp_hidden must be >= 1");
  if (regression_hidden < 1) fail("regression_hidden must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must lie in [0, 1)");
}

nlohmann::json ModelConfig::to_json() const {
  return nlohmann::json{{"dropout_rate", dropout_rate},     {"embed_dim", embed_dim},
                        {"feature_count", feature_count},   {"forecast_len", forecast_len},
                        {"mlp_hidden", mlp_hidden},         {"num_heads", num_heads},
                        {"observed_len", observed_len},     {"regression_hidden", regression_hidden}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.observed_len = j.value("observed_len", c.observed_len);
  c.forecast_len = j.value("forecast_len", c.forecast_len);
  c.feature_count = j.value("feature_count", c.feature_count);
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
  c.regression_hidden = j.value("regression_hidden", c.regression_hidden);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  return c;
}

WindowBatch make_batch(std::span<const GlucoseWindow> windows, const ModelConfig& config) {
  std::vector<std::size_t> idx(windows.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return make_batch(windows, idx, config);
}

WindowBatch make_batch(std::span<const GlucoseWindow> windows, std::span<const std::size_t> indices,
                       const ModelConfig& config) {
  const Index batch = static_cast<Index>(indices.size());
  const Index T = config.observed_len;
  const Index L = config.forecast_len;
  const Index F = config.feature_count;

  WindowBatch out;
  out.features.assign(static_cast<std::size_t>(T), Matrix(batch, F));
  out.observed_daytimes.resize(batch, T);
  out.target_daytimes.resize(batch, L);
  for (Index b = 0; b < batch; ++b) {
    const GlucoseWindow& w = windows[indices[static_cast<std::size_t>(b)]];
    if (w.observed_features.rows() != T || w.observed_features.cols() != F ||
        static_cast<Index>(w.observed_daytimes.size()) != T ||
        static_cast<Index>(w.target_daytimes.size()) != L) {
      throw ShapeError("window shape (T=" + std::to_string(w.observed_features.rows()) +
                       ", F=" + std::to_string(w.observed_features.cols()) +
                       ", L=" + std::to_string(w.target_daytimes.size()) +
                       ") does not match model (T=" + std::to_string(T) +
                       ", F=" + std::to_string(F) + ", L=" + std::to_string(L) + ")");
    }
    for (Index t = 0; t < T; ++t) {
      out.features[static_cast<std::size_t>(t)].row(b) = w.observed_features.row(t);
      out.observed_daytimes(b, t) = w.observed_daytimes[static_cast<std::size_t>(t)];
    }
    for (Index i = 0; i < L; ++i) out.target_daytimes(b, i) = w.target_daytimes[static_cast<std::size_t>(i)];
  }
  return out;
}

SeqFormer::SeqFormer(const ModelConfig& config) : config_(config) {
  config_.validate();
  const Index N = config_.embed_dim;
  const Index H = config_.mlp_hidden;
  const double p = config_.dropout_rate;

  layout_.token_embedder = Linear::create(params_, "token_embedder", config_.feature_count, N);
  layout_.s0 = params_.add("s0", 1, N);
  layout_.time_mha = MultiHeadSca::create(params_, "time_block.mha", N, config_.num_heads);
  layout_.time_mlp1 = MlpBlockPair::create(params_, "time_block.mlp1", N, H, N, p);
  layout_.time_mlp2 = MlpBlockPair::create(params_, "time_block.mlp2", N, H, N, p);
  layout_.pred_mha = MultiHeadSca::create(params_, "prediction_block.mha", N, config_.num_heads);
  layout_.pred_mlp_r = MlpBlockPair::create(params_, "prediction_block.mlp_r", N, H, N, p);
  layout_.pred_mlp_p = MlpBlockPair::create(params_, "prediction_block.mlp_p", N, H, N, p);
  layout_.reg_lin1 = Linear::create(params_, "regression.lin1", N, config_.regression_hidden);
  layout_.reg_lin2 = Linear::create(params_, "regression.lin2", config_.regression_hidden, 1);
}

SeqFormer SeqFormer::initialized(const ModelConfig& config, std::uint64_t seed) {
  SeqFormer model(config);
  Rng rng(seed);
  for (const TensorInfo& t : model.params_.layout()) {
    if (is_bias(t.name)) continue;
    auto values = model.params_.values().subspan(t.offset, t.size());
    for (double& v : values) v = kInitStddev * rng.normal();
  }
  return model;
}

Matrix SeqFormer::token_embed(const Matrix& features) const {
  return layout_.token_embedder.forward(params_, features);
}

Matrix SeqFormer::time_block_step(const Matrix& token, const Matrix& daytime, const Matrix& state,
                                  Mode mode, Rng& rng, TimeStepCache* cache) const {
  // z' = MLP1(MHA(q = daytime, k = v = token)); s = MLP2(SCA(q = state, k = v = z')).
  const Matrix mixed = layout_.time_mha.forward(params_, daytime, token, token,
                                                cache ? &cache->mha : nullptr);
  const Matrix fused = layout_.time_mlp1.forward(params_, mixed, mode, rng,
                                                 cache ? &cache->mlp1 : nullptr);
  const Matrix gated = sca_single_head(state, fused, fused, static_cast<double>(config_.embed_dim),
                                       cache ? &cache->sca : nullptr);
  return layout_.time_mlp2.forward(params_, gated, mode, rng, cache ? &cache->mlp2 : nullptr);
}

Matrix SeqFormer::encode(const WindowBatch& batch, Mode mode, Rng& rng, ForwardCache* cache) const {
  const Index T = config_.observed_len;
  if (static_cast<Index>(batch.features.size()) != T || batch.observed_daytimes.cols() != T) {
    throw ShapeError("encode: window has " + std::to_string(batch.features.size()) +
                     " observed steps, model expects " + std::to_string(T));
  }
  const Index B = batch.size();
  if (cache != nullptr) {
    cache->features = batch.features;
    cache->encoder.assign(static_cast<std::size_t>(T), TimeStepCache{});
  }

  Matrix state = broadcast_rows(params_.tensor(layout_.s0), B);
  for (Index t = 0; t < T; ++t) {
    const Matrix token = token_embed(batch.features[static_cast<std::size_t>(t)]);
    const Matrix daytime = daytime_embed_rows(batch.observed_daytimes.col(t), config_.embed_dim);
    state = time_block_step(token, daytime, state, mode, rng,
                            cache ? &cache->encoder[static_cast<std::size_t>(t)] : nullptr);
  }
  return state;
}

PredictionStep SeqFormer::prediction_block_step(const Matrix& state, const Matrix& daytime,
                                                Mode mode, Rng& rng,
                                                PredictionStepCache* cache) const {
  const Matrix e = layout_.pred_mha.forward(params_, daytime, state, state,
                                            cache ? &cache->mha : nullptr);
  PredictionStep out;
  out.next_state = layout_.pred_mlp_r.forward(params_, e, mode, rng, cache ? &cache->mlp_r : nullptr);
  out.prediction = layout_.pred_mlp_p.forward(params_, e, mode, rng, cache ? &cache->mlp_p : nullptr);
  return out;
}

Matrix SeqFormer::regress(const Matrix& prediction, RegressionCache* cache) const {
  Matrix pre = layout_.reg_lin1.forward(params_, prediction);
  Matrix hidden = pre.unaryExpr([](double v) { return gelu(v); });
  Matrix y = layout_.reg_lin2.forward(params_, hidden);
  if (cache != nullptr) {
    cache->valid = true;
    cache->input = prediction;
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return y;
}

Matrix SeqFormer::forecast(const Matrix& encoded, const Matrix& target_daytimes, Mode mode, Rng& rng,
                           ForwardCache* cache) const {
  const Index L = config_.forecast_len;
  if (target_daytimes.cols() != L) {
    throw ShapeError("forecast: got " + std::to_string(target_daytimes.cols()) +
                     " target daytimes, model expects " + std::to_string(L));
  }
  if (encoded.rows() != target_daytimes.rows() || encoded.cols() != config_.embed_dim) {
    throw ShapeError("forecast: encoded state has the wrong shape");
  }
  if (cache != nullptr) {
    cache->forecaster.assign(static_cast<std::size_t>(L), PredictionStepCache{});
    cache->regression.assign(static_cast<std::size_t>(L), RegressionCache{});
  }

  Matrix out(encoded.rows(), L);
  Matrix state = encoded;
  for (Index i = 0; i < L; ++i) {
    const auto si = static_cast<std::size_t>(i);
    const Matrix daytime = daytime_embed_rows(target_daytimes.col(i), config_.embed_dim);
    PredictionStep step = prediction_block_step(state, daytime, mode, rng,
                                                cache ? &cache->forecaster[si] : nullptr);
    out.col(i) = regress(step.prediction, cache ? &cache->regression[si] : nullptr).col(0);
    state = std::move(step.next_state);
  }
  return out;
}

Matrix SeqFormer::forward(const WindowBatch& batch, Mode mode, Rng& rng, ForwardCache* cache) const {
  const Matrix encoded = encode(batch, mode, rng, cache);
  Matrix out = forecast(encoded, batch.target_daytimes, mode, rng, cache);
  if (cache != nullptr) cache->valid = true;
  return out;
}

std::vector<double> SeqFormer::predict_mgdl(const GlucoseWindow& window) const {
  const Matrix out = predict_mgdl(std::span<const GlucoseWindow>(&window, 1));
  return std::vector<double>(out.data(), out.data() + out.size());
}

Matrix SeqFormer::predict_mgdl(std::span<const GlucoseWindow> windows) const {
  Rng unused(0);
  Matrix out = forward(make_batch(windows, config_), Mode::Eval, unused);
  return out.unaryExpr([](double v) { return denormalize_glucose(v); });
}

void SeqFormer::backward(const ForwardCache& cache, const Matrix& d_output, Gradients& grads) const {
  if (!cache.valid) throw StateError("SeqFormer::backward called before forward");
  const Index L = config_.forecast_len;
  const Index T = config_.observed_len;
  if (d_output.cols() != L) throw ShapeError("backward: output gradient has the wrong width");
  const Index B = d_output.rows();

  // Forecaster, reverse over i.
  Matrix d_state = Matrix::Zero(B, config_.embed_dim);
  for (Index i = L - 1; i >= 0; --i) {
    const auto si = static_cast<std::size_t>(i);
    const RegressionCache& rc = cache.regression[si];
    if (!rc.valid) throw StateError("SeqFormer::backward: incomplete forward cache");
    Matrix d_hidden = layout_.reg_lin2.backward(params_, grads, rc.hidden, d_output.col(i));
    d_hidden.array() *= rc.pre.unaryExpr([](double v) { return gelu_derivative(v); }).array();
    const Matrix d_pred = layout_.reg_lin1.backward(params_, grads, rc.input, d_hidden);

    const PredictionStepCache& pc = cache.forecaster[si];
    Matrix d_e = layout_.pred_mlp_r.backward(params_, grads, pc.mlp_r, d_state);
    d_e += layout_.pred_mlp_p.backward(params_, grads, pc.mlp_p, d_pred);
    const ScaInputGrads g = layout_.pred_mha.backward(params_, grads, pc.mha, d_e);
    d_state = g.dk + g.dv;
  }

  // Encoder, reverse over t.
  for (Index t = T - 1; t >= 0; --t) {
    const auto st = static_cast<std::size_t>(t);
    const TimeStepCache& tc = cache.encoder[st];
    const Matrix d_gated = layout_.time_mlp2.backward(params_, grads, tc.mlp2, d_state);
    const ScaInputGrads g2 = sca_single_head_backward(tc.sca, d_gated);
    const Matrix d_mixed = layout_.time_mlp1.backward(params_, grads, tc.mlp1, g2.dk + g2.dv);
    const ScaInputGrads g1 = layout_.time_mha.backward(params_, grads, tc.mha, d_mixed);
    layout_.token_embedder.backward(params_, grads, cache.features[st], g1.dk + g1.dv);
    d_state = g2.dq;
  }
  grads.tensor(layout_.s0).row(0) += d_state.colwise().sum();
}

}  // namespace seqformer
