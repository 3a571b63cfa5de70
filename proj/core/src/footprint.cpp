#include "seqformer/footprint.hpp"

#include <algorithm>

#include "seqformer/window.hpp"

namespace seqformer {

namespace {

constexpr std::uint64_t kFloatBytes = 4;

struct StepSizes {
  std::uint64_t encoder_step;   // floats live during one Time Block step
  std::uint64_t forecast_step;  // floats live during one Prediction + Regression step
};

StepSizes step_sizes(const ModelConfig& c) {
  const auto N = static_cast<std::uint64_t>(c.embed_dim);
  const auto H = static_cast<std::uint64_t>(c.mlp_hidden);
  const auto R = static_cast<std::uint64_t>(c.regression_hidden);
  // token z, daytime m, Q/K/V, head concat, attention out, mlp1 hidden, z',
  // gated, mlp2 hidden, new state
  const std::uint64_t enc = N + N + 3 * N + N + N + H + N + N + H + N;
  // daytime b, Q/K/V, concat, e, mlp_r hidden, r, mlp_p hidden, p, regression hidden, output
  const std::uint64_t pred = N + 3 * N + N + N + H + N + H + N + R + 1;
  return {enc, pred};
}

}  // namespace

std::uint64_t ram_full_window_bytes(const ModelConfig& c, int observed_len, int forecast_len) {
  const auto T = static_cast<std::uint64_t>(observed_len);
  const auto L = static_cast<std::uint64_t>(forecast_len);
  const auto F = static_cast<std::uint64_t>(c.feature_count);
  const auto N = static_cast<std::uint64_t>(c.embed_dim);
  const StepSizes s = step_sizes(c);
  const std::uint64_t inputs = T * F + T + L;  // features, observed daytimes, target daytimes
  const std::uint64_t floats = inputs + N /* s0 */ + T * s.encoder_step + L * s.forecast_step;
  return floats * kFloatBytes;
}

std::uint64_t ram_streaming_bytes(const ModelConfig& c, int forecast_len) {
  const auto L = static_cast<std::uint64_t>(forecast_len);
  const auto F = static_cast<std::uint64_t>(c.feature_count);
  const auto N = static_cast<std::uint64_t>(c.embed_dim);
  const StepSizes s = step_sizes(c);
  const std::uint64_t floats = (F + 1) + N + std::max(s.encoder_step, s.forecast_step) + L;
  return floats * kFloatBytes;
}

FootprintReport footprint(const ModelConfig& config, std::uint64_t flash_bytes) {
  FootprintReport r;
  r.flash_bytes = flash_bytes;
  r.param_count = SeqFormer(config).parameter_count();
  for (const auto& [ph, T, L] : {std::tuple{30, 24, 6}, std::tuple{60, 48, 12}}) {
    r.ram.push_back({ph, T, L, ram_full_window_bytes(config, T, L), ram_streaming_bytes(config, L)});
  }
  return r;
}

nlohmann::json FootprintReport::to_json() const {
  nlohmann::json ram_json = nlohmann::json::array();
  for (const RamEstimate& e : ram) {
    ram_json.push_back({{"ph_min", e.ph_minutes},
                        {"observed_len", e.observed_len},
                        {"forecast_len", e.forecast_len},
                        {"ram_full_window_bytes", e.full_window_bytes},
                        {"ram_streaming_bytes", e.streaming_bytes}});
  }
  return {{"flash_bytes", flash_bytes},
          {"flash_mib", static_cast<double>(flash_bytes) / (1024.0 * 1024.0)},
          {"params", param_count},
          {"ram", ram_json}};
}

}  // namespace seqformer
