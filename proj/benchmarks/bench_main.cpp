#include <benchmark/benchmark.h>

#include "hashtrace/dataset.hpp"
#include "hashtrace/encoder.hpp"
#include "hashtrace/index.hpp"
#include "hashtrace/rng.hpp"

namespace {

using namespace hashtrace;

HashCode random_code(Rng& rng, std::size_t k) {
  HashCode c(k);
  for (std::size_t i = 0; i < k; ++i) c.set(i, rng.below(2) == 1);
  return c;
}

TraceIndex random_index(std::size_t n, std::size_t k) {
  Rng rng(1);
  std::vector<IndexEntry> entries(n);
  for (std::size_t i = 0; i < n; ++i) {
    entries[i].group_id = static_cast<std::uint32_t>(i);
    entries[i].center = random_code(rng, k);
    entries[i].label = "g" + std::to_string(i);
  }
  return TraceIndex(k, std::move(entries));
}

void BM_TraceScan(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const TraceIndex idx = random_index(n, k);
  Rng rng(2);
  std::vector<HashCode> queries;
  for (int i = 0; i < 64; ++i) queries.push_back(random_code(rng, k));
  std::size_t q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(idx.trace(queries[q++ & 63]));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_TraceScan)->ArgsProduct({{32, 1024, 65536}, {64, 512}});

void BM_Encode(benchmark::State& state) {
  EncoderConfig cfg;
  cfg.D = kDescriptorDim;
  cfg.E = static_cast<std::uint32_t>(state.range(0));
  cfg.k = 64;
  cfg.T = 8;
  const EncoderParams p = init_params(cfg);
  Rng rng(3);
  FeatureSequence x(cfg.T, cfg.D);
  for (auto& v : x.values) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(forward(p, x));
}
BENCHMARK(BM_Encode)->Arg(32)->Arg(64)->Arg(128);

void BM_EncodeBackward(benchmark::State& state) {
  EncoderConfig cfg;
  cfg.D = kDescriptorDim;
  cfg.E = 64;
  cfg.k = 64;
  cfg.T = 8;
  const EncoderParams p = init_params(cfg);
  Rng rng(4);
  FeatureSequence x(cfg.T, cfg.D);
  for (auto& v : x.values) v = rng.uniform();
  std::vector<double> up(cfg.k, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(backward(p, x, up));
}
BENCHMARK(BM_EncodeBackward);

}  // namespace

BENCHMARK_MAIN();
