#pragma once

#include <cstddef>
#include <memory>
#include <type_traits>

namespace stream {

/// Fixed-size set of worker threads. `parallel_for(count, fn)` calls fn(i) for
/// i in [0, count) with static partitioning, and returns once all calls finished.
/// A pool may be shared by several callers.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t size() const noexcept { return workers_; }

  template <class Fn>
  void parallel_for(std::size_t count, Fn&& fn) {
    if (count == 0) return;
    if (workers_ == 1 || count == 1) {
      for (std::size_t i = 0; i < count; ++i) fn(i);
      return;
    }
    using F = std::remove_reference_t<Fn>;
    run(count, [](void* ctx, std::size_t i) { (*static_cast<F*>(ctx))(i); },
        const_cast<void*>(static_cast<const void*>(&fn)));
  }

  /// Logical core count reported by the OS (at least 1).
  static std::size_t hardware_workers();

 private:
  using Thunk = void (*)(void*, std::size_t);
  void run(std::size_t count, Thunk thunk, void* ctx);

  struct Arena;
  std::size_t workers_;
  std::unique_ptr<Arena> arena_;
};

}  // namespace stream
