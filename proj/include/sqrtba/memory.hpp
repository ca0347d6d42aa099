#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <new>
#include <vector>

namespace sqrtba {

// Counts bytes held by solver storage (landmark blocks, Hessian blocks).
// Peak memory in traces comes from here, not from OS statistics.
class MemoryTracker {
 public:
  static MemoryTracker& instance();

  void allocate(std::size_t bytes);
  void deallocate(std::size_t bytes) noexcept;

  std::size_t live_bytes() const { return live_.load(); }
  std::size_t peak_bytes() const { return peak_.load(); }

  // Resets the peak to the current live value.
  void reset_peak() { peak_.store(live_.load()); }

  // 0 disables the limit. Exceeding it throws MemoryLimitExceeded.
  void set_limit(std::size_t bytes) { limit_.store(bytes); }
  std::size_t limit() const { return limit_.load(); }

 private:
  std::atomic<std::size_t> live_{0};
  std::atomic<std::size_t> peak_{0};
  std::atomic<std::size_t> limit_{0};
};

class MemoryLimitExceeded : public std::bad_alloc {
 public:
  const char* what() const noexcept override {
    return "tracked solver memory exceeds the configured limit";
  }
};

template <typename T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() = default;
  template <typename U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    MemoryTracker::instance().allocate(n * sizeof(T));
    try {
      return std::allocator<T>{}.allocate(n);
    } catch (...) {
      MemoryTracker::instance().deallocate(n * sizeof(T));
      throw;
    }
  }

  void deallocate(T* p, std::size_t n) noexcept {
    std::allocator<T>{}.deallocate(p, n);
    MemoryTracker::instance().deallocate(n * sizeof(T));
  }

  template <typename U>
  bool operator==(const TrackingAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using TrackedVector = std::vector<T, TrackingAllocator<T>>;

// RAII limit for a scope (used per solver run).
class ScopedMemoryLimit {
 public:
  explicit ScopedMemoryLimit(std::size_t bytes)
      : previous_(MemoryTracker::instance().limit()) {
    MemoryTracker::instance().set_limit(bytes);
  }
  ~ScopedMemoryLimit() { MemoryTracker::instance().set_limit(previous_); }
  ScopedMemoryLimit(const ScopedMemoryLimit&) = delete;
  ScopedMemoryLimit& operator=(const ScopedMemoryLimit&) = delete;

 private:
  std::size_t previous_;
};

}  // namespace sqrtba
