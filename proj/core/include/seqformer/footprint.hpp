#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqformer/model.hpp"

namespace seqformer {

/// Activation/data buffer sizes (f32) for one forecast. Weights are excluded:
/// they live in flash.
struct RamEstimate {
  int ph_minutes = 0;
  int observed_len = 0;
  int forecast_len = 0;
  std::uint64_t full_window_bytes = 0;
  std::uint64_t streaming_bytes = 0;
};

struct FootprintReport {
  std::uint64_t flash_bytes = 0;
  std::uint64_t param_count = 0;
  std::vector<RamEstimate> ram;  // one entry per prediction horizon

  nlohmann::json to_json() const;
};

/// Whole window buffered and every per-step intermediate retained: the input
/// window, all token/daytime embeddings, every encoder and forecaster step's
/// activations, and the outputs.
std::uint64_t ram_full_window_bytes(const ModelConfig& config, int observed_len, int forecast_len);

/// One sample at a time: the running state, one input sample, and the larger
/// of one encoder step's or one forecaster step's activations, plus the
/// outputs. Independent of the observed length.
std::uint64_t ram_streaming_bytes(const ModelConfig& config, int forecast_len);

/// RAM for the 30- and 60-minute horizons (T/L = 24/6 and 48/12).
FootprintReport footprint(const ModelConfig& config, std::uint64_t flash_bytes);

}  // namespace seqformer
