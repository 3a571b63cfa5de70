#include "seqformer/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <thread>

#include "seqformer/errors.hpp"

namespace seqformer {

namespace {

constexpr std::size_t kChunkSize = 16;
constexpr std::size_t kEvalChunk = 256;

void append_number(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ec == std::errc() ? ptr : buf);
}

// Sum (not mean) of per-window losses for one chunk, with the gradient of
// that sum scaled by `grad_scale`.
double chunk_loss(const SeqFormer& model, std::span<const GlucoseWindow> windows,
                  std::span<const std::size_t> indices, const EventWeights& weights, Mode mode,
                  Rng& rng, Gradients* grads, double grad_scale) {
  const WindowBatch batch = make_batch(windows, indices, model.config());
  ForwardCache cache;
  const Matrix out = model.forward(batch, mode, rng, grads ? &cache : nullptr);

  const Index L = out.cols();
  Matrix d_out(out.rows(), L);
  std::vector<double> preds(static_cast<std::size_t>(L));
  std::vector<double> grad(static_cast<std::size_t>(L));
  double total = 0.0;
  constexpr double kScale = kGlucoseCeiling - kGlucoseFloor;
  for (Index b = 0; b < out.rows(); ++b) {
    const GlucoseWindow& w = windows[indices[static_cast<std::size_t>(b)]];
    for (Index j = 0; j < L; ++j) preds[static_cast<std::size_t>(j)] = denormalize_glucose(out(b, j));
    total += balanced_mse(w.targets, preds, weights, grad);
    for (Index j = 0; j < L; ++j) d_out(b, j) = grad[static_cast<std::size_t>(j)] * kScale * grad_scale;
  }
  if (grads != nullptr) model.backward(cache, d_out, *grads);
  return total;
}

}  // namespace

nlohmann::json TrainingState::to_json() const {
  return {{"best_epoch", best_epoch}, {"best_val_loss", best_val_loss}, {"epoch", epoch},
          {"lr", lr},                 {"rng_state", rng_state}};
}

TrainingState TrainingState::from_json(const nlohmann::json& j) {
  TrainingState s;
  s.epoch = j.at("epoch").get<int>();
  s.lr = j.at("lr").get<double>();
  s.best_val_loss = j.at("best_val_loss").get<double>();
  s.best_epoch = j.at("best_epoch").get<int>();
  s.rng_state = j.at("rng_state").get<std::string>();
  return s;
}

double batch_loss(const SeqFormer& model, std::span<const GlucoseWindow> windows,
                  std::span<const std::size_t> indices, const EventWeights& weights, Mode mode,
                  Rng& rng, Gradients* grads) {
  if (indices.empty()) throw InputError("batch_loss: empty batch");
  const double inv_n = 1.0 / static_cast<double>(indices.size());
  return chunk_loss(model, windows, indices, weights, mode, rng, grads, inv_n) * inv_n;
}

double evaluate_loss(const SeqFormer& model, std::span<const GlucoseWindow> windows,
                     const EventWeights& weights) {
  if (windows.empty()) throw InputError("evaluate_loss: no windows");
  std::vector<std::size_t> idx(windows.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng unused(0);
  double total = 0.0;
  for (std::size_t begin = 0; begin < idx.size(); begin += kEvalChunk) {
    const std::size_t end = std::min(idx.size(), begin + kEvalChunk);
    total += chunk_loss(model, windows, std::span(idx).subspan(begin, end - begin), weights,
                        Mode::Eval, unused, nullptr, 0.0);
  }
  return total / static_cast<double>(windows.size());
}

TrainResult train_loop(const ModelConfig& config, std::span<const GlucoseWindow> train,
                       std::span<const GlucoseWindow> val, const EventWeights& weights,
                       const TrainOptions& options) {
  return train_loop(SeqFormer::initialized(config, options.seed), train, val, weights, options);
}

TrainResult train_loop(SeqFormer model, std::span<const GlucoseWindow> train,
                       std::span<const GlucoseWindow> val, const EventWeights& weights,
                       const TrainOptions& options) {
  if (train.empty() || val.empty()) throw InputError("train_loop: empty train or validation set");
  if (options.batch_size < 1 || options.max_epochs < 1) {
    throw ConfigError("train_loop: batch_size and max_epochs must be positive");
  }

  // Stream 0 shuffles; dropout masks use per-chunk seeds drawn from it.
  Rng rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  Adam adam(model.parameter_count(), AdamOptions{options.learning_rate});
  PlateauScheduler scheduler(options.scheduler);
  EarlyStopping stopper(options.early_stop_patience, options.scheduler.threshold);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch_size = static_cast<std::size_t>(options.batch_size);
  const std::size_t threads = static_cast<std::size_t>(std::max(options.threads, 1));

  TrainResult result{model, {}, {}, false};
  Gradients grads(model.parameters());
  double lr = options.learning_rate;

  for (int epoch = 1; epoch <= options.max_epochs; ++epoch) {
    // Fisher-Yates with the portable index draw.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

    double epoch_total = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), begin + batch_size);
      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      const double inv_n = 1.0 / static_cast<double>(batch.size());

      const std::size_t chunks = (batch.size() + kChunkSize - 1) / kChunkSize;
      std::vector<std::uint64_t> seeds(chunks);
      for (auto& s : seeds) s = rng.next_u64();
      std::vector<Gradients> chunk_grads(chunks, Gradients(model.parameters()));
      std::vector<double> chunk_losses(chunks, 0.0);
      const auto run_chunk = [&](std::size_t c) {
        Rng chunk_rng(seeds[c]);
        const std::size_t c0 = c * kChunkSize;
        const std::size_t c1 = std::min(batch.size(), c0 + kChunkSize);
        chunk_losses[c] = chunk_loss(model, train, batch.subspan(c0, c1 - c0), weights, Mode::Train,
                                     chunk_rng, &chunk_grads[c], inv_n);
      };
      if (threads == 1 || chunks == 1) {
        for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
      } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(threads, chunks); ++w) {
          pool.emplace_back([&, w] {
            for (std::size_t c = w; c < chunks; c += threads) run_chunk(c);
          });
        }
      }

      // Fixed-order reduction keeps the result independent of the thread count.
      grads.zero();
      double loss_sum = 0.0;
      for (std::size_t c = 0; c < chunks; ++c) {
        grads += chunk_grads[c];
        loss_sum += chunk_losses[c];
      }
      if (!std::isfinite(loss_sum)) {
        throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(batch_no + 1));
      }
      epoch_total += loss_sum;
      adam.step(model.parameters().values(), grads.values());
    }

    const double train_loss = epoch_total / static_cast<double>(train.size());
    const double val_loss = evaluate_loss(model, val, weights);
    if (!std::isfinite(val_loss)) {
      throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    const EpochRecord record{epoch, train_loss, val_loss, lr};
    result.history.push_back(record);
    if (options.on_epoch) options.on_epoch(record);

    lr = scheduler.step(val_loss, lr);
    adam.set_learning_rate(lr);
    const StopDecision decision = stopper.update(val_loss, epoch, model.parameters());
    result.state.epoch = epoch;
    if (decision == StopDecision::Stop) {
      result.stopped_early = true;
      break;
    }
  }

  result.model = model;
  if (stopper.has_snapshot()) result.model.parameters() = stopper.best_parameters();
  result.state.lr = lr;
  result.state.best_val_loss = stopper.best_val_loss();
  result.state.best_epoch = stopper.best_epoch();
  result.state.rng_state = rng.state();
  return result;
}

std::string history_csv(std::span<const EpochRecord> history) {
  std::string out = "epoch,train_loss,val_loss,lr\n";
  for (const EpochRecord& r : history) {
    out += std::to_string(r.epoch);
    for (double v : {r.train_loss, r.val_loss, r.lr}) {
      out += ',';
      append_number(out, v);
    }
    out += '\n';
  }
  return out;
}

}  // namespace seqformer
