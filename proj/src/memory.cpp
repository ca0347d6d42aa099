#include "sqrtba/memory.hpp"

namespace sqrtba {

MemoryTracker& MemoryTracker::instance() {
  static MemoryTracker tracker;
  return tracker;
}

void MemoryTracker::allocate(std::size_t bytes) {
  const std::size_t live = live_.fetch_add(bytes) + bytes;
  const std::size_t limit = limit_.load();
  if (limit != 0 && live > limit) {
    live_.fetch_sub(bytes);
    throw MemoryLimitExceeded();
  }
  std::size_t peak = peak_.load();
  while (live > peak && !peak_.compare_exchange_weak(peak, live)) {
  }
}

void MemoryTracker::deallocate(std::size_t bytes) noexcept {
  live_.fetch_sub(bytes);
}

}  // namespace sqrtba
