#include "gclrec/bench.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

namespace gclrec {

std::vector<BenchRow> run_bench(const TrainConfig& base, const InteractionDataset& dataset,
                                const BenchOptions& options) {
  std::vector<BenchRow> rows;
  if (options.batches == 0) return rows;

  // One batch stream shared by every method; cycled when an epoch is short.
  std::vector<Batch> stream;
  for (int epoch = 0; stream.size() < options.batches + options.warmup; ++epoch) {
    auto epoch_batches = sample_batches(dataset, base.batch_size, base.seed, epoch);
    for (auto& b : epoch_batches) stream.push_back(std::move(b));
  }
  const double per_epoch = std::ceil(static_cast<double>(dataset.train().size()) /
                                     static_cast<double>(base.batch_size));

  for (Method method : options.methods) {
    TrainConfig config = base;
    config.method = method;
    config.layers = options.layers;
    if (config.contrast_layer > config.layers) config.contrast_layer = 1;
    Trainer trainer(config, dataset);
    trainer.begin_epoch(0);

    BenchRow row;
    row.method = method;
    row.augmentation_ms = trainer.last_augmentation_seconds() * 1e3;
    row.amortized_ms = row.augmentation_ms / per_epoch;

    std::vector<double> samples;
    for (std::size_t k = 0; k < options.batches + options.warmup; ++k) {
      const auto start = std::chrono::steady_clock::now();
      const auto result = trainer.compute(stream[k], derive_seed(base.seed, 0xbe7c, k));
      const auto stop = std::chrono::steady_clock::now();
      if (k >= options.warmup) {
        samples.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
      }
      (void)result;
    }
    row.timed_batches = samples.size();
    double sum = 0.0;
    for (double s : samples) sum += s;
    row.mean_ms = sum / static_cast<double>(samples.size());
    double var = 0.0;
    for (double s : samples) var += (s - row.mean_ms) * (s - row.mean_ms);
    row.stdev_ms =
        samples.size() > 1 ? std::sqrt(var / static_cast<double>(samples.size() - 1)) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "method,batches,mean_ms,stdev_ms,augmentation_ms,amortized_ms,total_ms\n";
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << r.timed_batches << ',' << r.mean_ms << ','
        << r.stdev_ms << ',' << r.augmentation_ms << ',' << r.amortized_ms << ','
        << r.total_ms() << '\n';
  }
}

}  // namespace gclrec
