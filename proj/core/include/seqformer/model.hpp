#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqformer/nn.hpp"
#include "seqformer/parameters.hpp"
#include "seqformer/window.hpp"

namespace seqformer {

struct ModelConfig {
  int embed_dim = 88;
  int num_heads = 4;
  int observed_len = 24;
  int forecast_len = 6;
  int feature_count = 1;
  int mlp_hidden = 88;
  int regression_hidden = 44;
  double dropout_rate = 0.1;

  /// Throws ConfigError when a structural constraint is violated.
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Tensor ids of every component. Registration order (and therefore the
/// serialization order) is:
///   token_embedder.{weight,bias}, s0,
///   time_block.mha.{query,key,value,output}.{weight,bias},
///   time_block.mlp1.{block1,block2}.{weight,bias},
///   time_block.mlp2.{block1,block2}.{weight,bias},
///   prediction_block.mha.{query,key,value,output}.{weight,bias},
///   prediction_block.mlp_r.{block1,block2}.{weight,bias},
///   prediction_block.mlp_p.{block1,block2}.{weight,bias},
///   regression.lin1.{weight,bias}, regression.lin2.{weight,bias}
/// Weights are stored out x in, biases 1 x out, s0 1 x N.
struct ModelLayout {
  Linear token_embedder;
  TensorId s0;
  MultiHeadSca time_mha;
  MlpBlockPair time_mlp1;
  MlpBlockPair time_mlp2;
  MultiHeadSca pred_mha;
  MlpBlockPair pred_mlp_r;
  MlpBlockPair pred_mlp_p;
  Linear reg_lin1;
  Linear reg_lin2;
};

/// A batch of windows in step-major form.
struct WindowBatch {
  std::vector<Matrix> features;  // observed_len entries, each batch x F
  Matrix observed_daytimes;      // batch x T
  Matrix target_daytimes;        // batch x L

  Index size() const { return observed_daytimes.rows(); }
};

WindowBatch make_batch(std::span<const GlucoseWindow> windows, const ModelConfig& config);
WindowBatch make_batch(std::span<const GlucoseWindow> windows, std::span<const std::size_t> indices,
                       const ModelConfig& config);

struct TimeStepCache {
  MhaCache mha;
  MlpCache mlp1;
  ScaCache sca;
  MlpCache mlp2;
};

struct PredictionStepCache {
  MhaCache mha;
  MlpCache mlp_r;
  MlpCache mlp_p;
};

struct RegressionCache {
  bool valid = false;
  Matrix input;
  Matrix pre;
  Matrix hidden;
};

struct ForwardCache {
  bool valid = false;
  std::vector<Matrix> features;
  std::vector<TimeStepCache> encoder;
  std::vector<PredictionStepCache> forecaster;
  std::vector<RegressionCache> regression;
};

struct PredictionStep {
  Matrix next_state;  // r_{i+1}
  Matrix prediction;  // p_{i+1}
};

/// Sequential transformer: a recurrent encoder over the T observed steps
/// followed by a recurrent forecaster over the L target steps. Each recurrence
/// reuses one block of parameters at every step.
class SeqFormer {
 public:
  /// Parameters zero-initialized.
  explicit SeqFormer(const ModelConfig& config);

  /// Weights and s0 ~ N(0, 0.02^2), biases zero. Deterministic in (config, seed).
  static SeqFormer initialized(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const ModelLayout& layout() const { return layout_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  Matrix token_embed(const Matrix& features) const;

  Matrix time_block_step(const Matrix& token, const Matrix& daytime, const Matrix& state,
                         Mode mode, Rng& rng, TimeStepCache* cache = nullptr) const;

  /// Returns s_T, batch x N.
  Matrix encode(const WindowBatch& batch, Mode mode, Rng& rng,
                ForwardCache* cache = nullptr) const;

  PredictionStep prediction_block_step(const Matrix& state, const Matrix& daytime, Mode mode,
                                       Rng& rng, PredictionStepCache* cache = nullptr) const;

  /// batch x N -> batch x 1, normalized glucose scale.
  Matrix regress(const Matrix& prediction, RegressionCache* cache = nullptr) const;

  /// batch x L on the normalized glucose scale.
  Matrix forecast(const Matrix& encoded, const Matrix& target_daytimes, Mode mode, Rng& rng,
                  ForwardCache* cache = nullptr) const;

  /// batch x L on the normalized glucose scale.
  Matrix forward(const WindowBatch& batch, Mode mode, Rng& rng,
                 ForwardCache* cache = nullptr) const;

  /// Eval-mode forecast in mg/dL.
  std::vector<double> predict_mgdl(const GlucoseWindow& window) const;
  Matrix predict_mgdl(std::span<const GlucoseWindow> windows) const;

  /// Back-propagates d loss / d forward-output (batch x L, normalized scale)
  /// and accumulates parameter gradients.
  void backward(const ForwardCache& cache, const Matrix& d_output, Gradients& grads) const;

 private:
  ModelConfig config_;
  ParameterStore params_;
  ModelLayout layout_;
};

}  // namespace seqformer
