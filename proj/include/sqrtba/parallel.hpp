#pragma once

#include <cstddef>
#include <memory>

#include <tbb/blocked_range.h>
#include <tbb/global_control.h>
#include <tbb/parallel_for.h>
#include <tbb/parallel_reduce.h>

namespace sqrtba {

// Items per task. The split of a deterministic reduce depends only on the
// range and this grain, so results are bitwise identical for any thread count.
inline constexpr std::size_t kDefaultGrain = 64;

template <typename Body>
void parallel_for_index(std::size_t n, Body&& body,
                        std::size_t grain = kDefaultGrain) {
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, grain),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      for (std::size_t i = r.begin(); i != r.end(); ++i)
                        body(i);
                    });
}

// Fixed-order pairwise reduction. body(i, acc) accumulates item i into acc;
// join(a, b) adds b into a.
template <typename T, typename Body, typename Join>
T deterministic_reduce(std::size_t n, const T& identity, Body&& body,
                       Join&& join, std::size_t grain = kDefaultGrain) {
  return tbb::parallel_deterministic_reduce(
      tbb::blocked_range<std::size_t>(0, n, grain), identity,
      [&](const tbb::blocked_range<std::size_t>& r, T acc) {
        for (std::size_t i = r.begin(); i != r.end(); ++i) body(i, acc);
        return acc;
      },
      [&](T a, const T& b) {
        join(a, b);
        return a;
      });
}

// Limits the TBB worker count for the lifetime of the object. 0 keeps the
// library default.
class ThreadLimit {
 public:
  explicit ThreadLimit(std::size_t threads) {
    if (threads > 0)
      control_ = std::make_unique<tbb::global_control>(
          tbb::global_control::max_allowed_parallelism, threads);
  }

 private:
  std::unique_ptr<tbb::global_control> control_;
};

}  // namespace sqrtba
