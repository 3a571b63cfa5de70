#include "seqformer/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "seqformer/errors.hpp"

namespace seqformer {

namespace {

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::span<const std::uint8_t> take(std::size_t n) {
    if (remaining() < n) throw FormatError("unexpected end of file");
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    const auto s = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(s[static_cast<std::size_t>(i)]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto s = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(s[static_cast<std::size_t>(i)]) << (8 * i);
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

void check_magic(Reader& r, const char (&magic)[4], const char* what) {
  const auto m = r.take(4);
  if (std::memcmp(m.data(), magic, 4) != 0) {
    throw FormatError(std::string(what) + ": bad magic (expected '" + std::string(magic, 4) + "')");
  }
}

}  // namespace

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  return std::string(b.begin(), b.end());
}

std::string canonical_json(const nlohmann::json& j) { return j.dump(); }

Bytes encode_weights(const SeqFormer& model, const FeatureScaler* scaler) {
  nlohmann::json config = model.config().to_json();
  if (scaler != nullptr) config["feature_scaling"] = scaler->to_json();
  const std::string blob = canonical_json(config);

  Writer w;
  w.bytes(kWeightMagic, 4);
  w.u32(kWeightVersion);
  w.u32(static_cast<std::uint32_t>(blob.size()));
  w.bytes(blob.data(), blob.size());
  for (double v : model.parameters().values()) w.f32(v);
  return w.take();
}

ModelFile decode_weights(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  check_magic(r, kWeightMagic, "weight file");
  const std::uint32_t version = r.u32();
  if (version != kWeightVersion) {
    throw FormatError("weight file: unsupported version " + std::to_string(version));
  }
  const std::uint32_t blob_len = r.u32();
  const auto blob = r.take(blob_len);
  nlohmann::json config;
  try {
    config = nlohmann::json::parse(blob.begin(), blob.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("weight file: bad config blob: ") + e.what());
  }

  ModelFile file{SeqFormer(ModelConfig::from_json(config)), std::nullopt};
  if (config.contains("feature_scaling")) {
    file.scaler = FeatureScaler::from_json(config["feature_scaling"]);
  }
  auto values = file.model.parameters().values();
  if (r.remaining() != 4 * values.size()) {
    throw FormatError("weight file: expected " + std::to_string(values.size()) +
                      " f32 parameters, found " + std::to_string(r.remaining()) + " bytes");
  }
  for (double& v : values) v = r.f32();
  return file;
}

void save_weights(const std::filesystem::path& path, const SeqFormer& model,
                  const FeatureScaler* scaler) {
  write_file(path, encode_weights(model, scaler));
}

ModelFile load_weights(const std::filesystem::path& path) { return decode_weights(read_file(path)); }

Bytes encode_windows(const WindowCache& cache) {
  const auto F = static_cast<std::size_t>(cache.feature_count);
  if (cache.scaler.min.size() != F || cache.scaler.max.size() != F) {
    throw ShapeError("window cache: scaler does not match feature count");
  }
  Writer w;
  w.bytes(kWindowMagic, 4);
  w.u32(kWindowVersion);
  w.u32(static_cast<std::uint32_t>(cache.windows.size()));
  w.u32(static_cast<std::uint32_t>(cache.observed_len));
  w.u32(static_cast<std::uint32_t>(cache.forecast_len));
  w.u32(static_cast<std::uint32_t>(cache.feature_count));
  w.u32(static_cast<std::uint32_t>(cache.real_count));
  for (std::size_t f = 0; f < F; ++f) {
    w.f64(cache.scaler.min[f]);
    w.f64(cache.scaler.max[f]);
  }
  for (const GlucoseWindow& win : cache.windows) {
    if (win.observed_len() != cache.observed_len || win.feature_count() != cache.feature_count ||
        win.forecast_len() != cache.forecast_len) {
      throw ShapeError("window cache: window shape does not match header");
    }
    for (Index t = 0; t < win.observed_len(); ++t) {
      for (Index f = 0; f < win.feature_count(); ++f) w.f32(win.observed_features(t, f));
    }
    for (double v : win.observed_daytimes) w.f32(v);
    for (double v : win.targets) w.f32(v);
    for (double v : win.target_daytimes) w.f32(v);
    w.f32(static_cast<double>(static_cast<int>(win.event_label)));
  }
  return w.take();
}

WindowCache decode_windows(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  check_magic(r, kWindowMagic, "window cache");
  const std::uint32_t version = r.u32();
  if (version != kWindowVersion) {
    throw FormatError("window cache: unsupported version " + std::to_string(version));
  }
  WindowCache c;
  const std::uint32_t count = r.u32();
  c.observed_len = static_cast<int>(r.u32());
  c.forecast_len = static_cast<int>(r.u32());
  c.feature_count = static_cast<int>(r.u32());
  c.real_count = r.u32();
  if (c.observed_len < 1 || c.forecast_len < 1 || c.feature_count < 1 ||
      c.feature_count > kMaxFeatureCount || c.real_count > count) {
    throw FormatError("window cache: inconsistent header");
  }
  for (int f = 0; f < c.feature_count; ++f) {
    c.scaler.min.push_back(r.f64());
    c.scaler.max.push_back(r.f64());
  }
  const std::size_t per_window = static_cast<std::size_t>(
      c.observed_len * c.feature_count + c.observed_len + 2 * c.forecast_len + 1);
  if (r.remaining() != 4 * per_window * count) {
    throw FormatError("window cache: payload size does not match header");
  }
  c.windows.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    GlucoseWindow w;
    w.observed_features.resize(c.observed_len, c.feature_count);
    for (Index t = 0; t < c.observed_len; ++t) {
      for (Index f = 0; f < c.feature_count; ++f) w.observed_features(t, f) = r.f32();
    }
    w.observed_daytimes.resize(static_cast<std::size_t>(c.observed_len));
    for (double& v : w.observed_daytimes) v = r.f32();
    w.targets.resize(static_cast<std::size_t>(c.forecast_len));
    for (double& v : w.targets) v = r.f32();
    w.target_daytimes.resize(static_cast<std::size_t>(c.forecast_len));
    for (double& v : w.target_daytimes) v = r.f32();
    const double label = r.f32();
    if (label != 0.0 && label != 1.0 && label != 2.0) {
      throw FormatError("window cache: bad event label in window " + std::to_string(i));
    }
    w.event_label = static_cast<EventClass>(static_cast<int>(label));
    c.windows.push_back(std::move(w));
  }
  return c;
}

void save_windows(const std::filesystem::path& path, const WindowCache& cache) {
  write_file(path, encode_windows(cache));
}

WindowCache load_windows(const std::filesystem::path& path) { return decode_windows(read_file(path)); }

}  // namespace seqformer
