#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace amenpois {

/// Runs body(replicate, accumulator) for replicate in [0, count) on `workers`
/// threads, each with its own accumulator, then merges them in worker order.
/// Accumulators must combine exactly (integer counts), so the result does not
/// depend on the worker count.
template <typename Acc, typename Body, typename Merge>
Acc parallel_replicates(std::int64_t count, int workers, const Acc& init, Body body, Merge merge) {
  workers = std::max(1, workers);
  if (count <= 0) return init;
  workers = static_cast<int>(std::min<std::int64_t>(workers, count));
  std::vector<Acc> partial(static_cast<std::size_t>(workers), init);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  auto run = [&](int w) {
    try {
      const std::int64_t lo = count * w / workers;
      const std::int64_t hi = count * (w + 1) / workers;
      for (std::int64_t r = lo; r < hi; ++r) body(r, partial[static_cast<std::size_t>(w)]);
    } catch (...) {
      errors[static_cast<std::size_t>(w)] = std::current_exception();
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  Acc out = init;
  for (auto& p : partial) merge(out, p);
  return out;
}

}  // namespace amenpois
