#include "treedual/bessel.hpp"

#include <cmath>
#include <future>
#include <random>
#include <stdexcept>
#include <vector>

namespace treedual {

namespace {

constexpr std::int64_t kBatch = 1 << 16;
constexpr int kWorkers = 4;  // fixed so that the merge order never varies

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

struct BatchSum {
  long double sum = 0.0L;
  long double sum_sq = 0.0L;
};

BatchSum run_batch(double t, std::int64_t count, std::uint64_t stream_seed) {
  std::mt19937_64 rng(stream_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sd = std::sqrt(t);
  BatchSum acc;
  for (std::int64_t i = 0; i < count; ++i) {
    const double a = 1.0 + sd * gauss(rng);
    const double b = sd * gauss(rng);
    const double c = sd * gauss(rng);
    const double inv_r = 1.0 / std::sqrt(a * a + b * b + c * c);
    acc.sum += inv_r;
    acc.sum_sq += static_cast<long double>(inv_r) * inv_r;
  }
  return acc;
}

}  // namespace

DefectEstimate estimate_defect(double t, std::int64_t paths,
                               std::uint64_t seed) {
  if (!(t > 0.0)) throw std::invalid_argument("horizon t must be positive");
  if (paths < 10000) {
    throw std::invalid_argument("need at least 10^4 paths");
  }

  const std::int64_t batches = (paths + kBatch - 1) / kBatch;
  std::vector<BatchSum> partial(batches);
  auto worker = [&](int w) {
    for (std::int64_t b = w; b < batches; b += kWorkers) {
      const std::int64_t count = std::min(kBatch, paths - b * kBatch);
      partial[b] = run_batch(t, count, splitmix64(seed ^ (0xABCD1234ULL + b)));
    }
  };
  std::vector<std::future<void>> jobs;
  for (int w = 1; w < kWorkers; ++w) {
    jobs.push_back(std::async(std::launch::async, worker, w));
  }
  worker(0);
  for (auto& j : jobs) j.get();

  BatchSum total;
  for (const BatchSum& b : partial) {  // fixed merge order
    total.sum += b.sum;
    total.sum_sq += b.sum_sq;
  }

  DefectEstimate out;
  out.t = t;
  out.paths = paths;
  const long double mean = total.sum / paths;
  const long double var =
      (total.sum_sq / paths - mean * mean) * paths / (paths - 1);
  out.estimate = static_cast<double>(mean);
  out.std_error = static_cast<double>(std::sqrt(var / paths));
  out.defect = 1.0 - out.estimate;
  return out;
}

}  // namespace treedual
