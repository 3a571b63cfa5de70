#include <numeric>
#include <vector>

#include <benchmark/benchmark.h>
#include <seqformer/seqformer.hpp>

using namespace seqformer;

namespace {

ModelConfig config_for(int ph) {
  ModelConfig c;
  if (ph == 60) {
    c.observed_len = 48;
    c.forecast_len = 12;
  }
  return c;
}

std::vector<GlucoseWindow> windows_for(const ModelConfig& c, int n) {
  Rng rng(7);
  std::vector<GlucoseWindow> ws(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    GlucoseWindow& w = ws[static_cast<std::size_t>(i)];
    w.observed_features = Matrix(c.observed_len, c.feature_count);
    for (Index t = 0; t < c.observed_len; ++t) {
      for (Index f = 0; f < c.feature_count; ++f) w.observed_features(t, f) = rng.uniform();
      w.observed_daytimes.push_back(5.0 * static_cast<double>((i + t) % 288));
    }
    for (int l = 0; l < c.forecast_len; ++l) {
      w.targets.push_back(rng.uniform(50.0, 300.0));
      w.target_daytimes.push_back(5.0 * static_cast<double>((i + c.observed_len + l) % 288));
    }
    w.event_label = window_label(w.targets);
  }
  return ws;
}

// args: PH minutes, batch size
void BM_Forward(benchmark::State& state) {
  const ModelConfig c = config_for(static_cast<int>(state.range(0)));
  const SeqFormer model = SeqFormer::initialized(c, 1);
  const auto ws = windows_for(c, static_cast<int>(state.range(1)));
  const WindowBatch batch = make_batch(ws, c);
  Rng rng(0);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(batch, Mode::Eval, rng));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_Forward)->Args({30, 1})->Args({30, 64})->Args({60, 1})->Args({60, 64})->Unit(benchmark::kMicrosecond);

// Forward + balanced loss + backward on one mini-batch.
void BM_TrainStep(benchmark::State& state) {
  const ModelConfig c = config_for(static_cast<int>(state.range(0)));
  SeqFormer model = SeqFormer::initialized(c, 1);
  const auto ws = windows_for(c, static_cast<int>(state.range(1)));
  std::vector<std::size_t> idx(ws.size());
  std::iota(idx.begin(), idx.end(), 0);
  const EventWeights w{2.85, 0.25, 1.6};
  Gradients grads(model.parameters());
  Adam adam(model.parameter_count());
  Rng rng(0);
  for (auto _ : state) {
    grads.zero();
    benchmark::DoNotOptimize(batch_loss(model, ws, idx, w, Mode::Train, rng, &grads));
    adam.step(model.parameters().values(), grads.values());
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_TrainStep)->Args({30, 64})->Args({60, 64})->Unit(benchmark::kMillisecond);

void BM_ClarkeGrid(benchmark::State& state) {
  for (auto _ : state) {
    int a = 0;
    for (int r = 40; r <= 400; r += 5) {
      for (int p = 40; p <= 400; p += 5) a += clarke_zone(r, p) == EgaZone::A;
    }
    benchmark::DoNotOptimize(a);
  }
}
BENCHMARK(BM_ClarkeGrid);

}  // namespace

BENCHMARK_MAIN();
