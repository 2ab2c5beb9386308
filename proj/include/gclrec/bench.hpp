#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "gclrec/train.hpp"

namespace gclrec {

struct BenchOptions {
  std::vector<Method> methods;
  int layers = 2;
  std::size_t batches = 50;
  // Leading batches timed but left out of the statistics.
  std::size_t warmup = 5;
};

struct BenchRow {
  Method method = Method::kLightGcn;
  std::size_t timed_batches = 0;
  double mean_ms = 0.0;
  double stdev_ms = 0.0;
  // Rebuild time of one epoch's augmentations; zero for methods without one.
  double augmentation_ms = 0.0;
  // Augmentation cost spread over the batches of one epoch.
  double amortized_ms = 0.0;
  double total_ms() const { return mean_ms + amortized_ms; }
};

// Times forward+backward per batch for each method over the same batch
// stream. `base` supplies every setting except method and layers.
std::vector<BenchRow> run_bench(const TrainConfig& base, const InteractionDataset& dataset,
                                const BenchOptions& options);

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

}  // namespace gclrec
