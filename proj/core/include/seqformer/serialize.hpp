#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqformer/data.hpp"
#include "seqformer/model.hpp"

namespace seqformer {

inline constexpr char kWeightMagic[4] = {'S', 'Q', 'T', '1'};
inline constexpr std::uint32_t kWeightVersion = 1;
inline constexpr char kWindowMagic[4] = {'S', 'Q', 'W', '1'};
inline constexpr std::uint32_t kWindowVersion = 1;

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

/// Canonical JSON: sorted keys, no whitespace.
std::string canonical_json(const nlohmann::json& j);

struct ModelFile {
  SeqFormer model;
  std::optional<FeatureScaler> scaler;
};

/// Weight file layout:
///   "SQT1" | u32 version | u32 config length | config JSON | f32 tensors
/// Integers and floats are little-endian; tensors follow the ParameterStore
/// order. The config blob is the canonical JSON of ModelConfig, plus a
/// "feature_scaling" object when a scaler is attached.
Bytes encode_weights(const SeqFormer& model, const FeatureScaler* scaler = nullptr);
ModelFile decode_weights(std::span<const std::uint8_t> bytes);

void save_weights(const std::filesystem::path& path, const SeqFormer& model,
                  const FeatureScaler* scaler = nullptr);
ModelFile load_weights(const std::filesystem::path& path);

struct WindowCache {
  int observed_len = 0;
  int forecast_len = 0;
  int feature_count = 0;
  /// Leading windows that are real (not synthesized by augmentation).
  std::size_t real_count = 0;
  FeatureScaler scaler;
  std::vector<GlucoseWindow> windows;
};

/// Window cache layout:
///   "SQW1" | u32 version | u32 window count | u32 T | u32 L | u32 F |
///   u32 real count | F x (f64 min, f64 max) | windows
/// Each window is f32: features (T x F, row-major), observed daytimes (T),
/// targets (L), target daytimes (L), event label (0 hypo, 1 normal, 2 hyper).
Bytes encode_windows(const WindowCache& cache);
WindowCache decode_windows(std::span<const std::uint8_t> bytes);

void save_windows(const std::filesystem::path& path, const WindowCache& cache);
WindowCache load_windows(const std::filesystem::path& path);

}  // namespace seqformer
