#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace fkmc {

int hardware_workers();

/// Deterministic block-parallel map-reduce.
///
/// Items [0, n) are split into fixed-size blocks.  Workers claim whole blocks
/// (any scheduling); within a block items are folded in index order, and the
/// per-block results are merged afterwards by a fixed pairwise tree over the
/// block index.  The result is therefore bit-identical for any worker count.
///
/// Acc requirements: default-constructible via make(), merge(acc, other)
/// folds other into acc.  Exceptions thrown by per_item/make are rethrown
/// from the lowest-indexed failing block.
template <class Acc>
Acc block_reduce(std::int64_t n_items, std::int64_t block_size, int workers,
                 const std::function<Acc()>& make,
                 const std::function<void(Acc&, std::int64_t)>& per_item,
                 const std::function<void(Acc&, Acc&&)>& merge) {
  if (block_size < 1) block_size = 1;
  const std::int64_t n_blocks =
      n_items <= 0 ? 0 : (n_items + block_size - 1) / block_size;
  std::vector<std::optional<Acc>> partials(static_cast<size_t>(n_blocks));
  std::vector<std::pair<std::int64_t, std::exception_ptr>> errors;
  std::mutex err_mutex;

  std::atomic<std::int64_t> next{0};
  auto run = [&] {
    for (;;) {
      const std::int64_t b = next.fetch_add(1);
      if (b >= n_blocks) break;
      try {
        Acc acc = make();
        const std::int64_t lo = b * block_size;
        const std::int64_t hi = std::min(n_items, lo + block_size);
        for (std::int64_t i = lo; i < hi; ++i) per_item(acc, i);
        partials[static_cast<size_t>(b)] = std::move(acc);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        errors.emplace_back(b, std::current_exception());
      }
    }
  };

  if (workers <= 0) workers = hardware_workers();
  if (workers <= 1 || n_blocks <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    const int spawn = static_cast<int>(
        std::min<std::int64_t>(workers, n_blocks));
    pool.reserve(static_cast<size_t>(spawn));
    for (int w = 0; w < spawn; ++w) pool.emplace_back(run);
    for (auto& th : pool) th.join();
  }

  if (!errors.empty()) {
    auto first = std::min_element(
        errors.begin(), errors.end(),
        [](const auto& a, const auto& b) { return a.first < b.first; });
    std::rethrow_exception(first->second);
  }
  if (n_blocks == 0) return make();

  // Pairwise tree over block index, independent of worker count.
  std::function<Acc(std::int64_t, std::int64_t)> combine =
      [&](std::int64_t lo, std::int64_t hi) -> Acc {
    if (hi - lo == 1) return std::move(*partials[static_cast<size_t>(lo)]);
    const std::int64_t mid = lo + (hi - lo) / 2;
    Acc left = combine(lo, mid);
    merge(left, combine(mid, hi));
    return left;
  };
  return combine(0, n_blocks);
}

/// Block size used by the estimator reductions; fixed so that the reduction
/// topology is a pure function of (n_paths).
inline constexpr std::int64_t kReduceBlock = 256;

}  // namespace fkmc
