#include "stream/common/worker_pool.hpp"

#include <mutex>
#include <thread>

#include <tbb/blocked_range.h>
#include <tbb/global_control.h>
#include <tbb/parallel_for.h>
#include <tbb/partitioner.h>
#include <tbb/task_arena.h>

#include "stream/common/errors.hpp"

namespace stream {

namespace {

// TBB caps its worker count at the core count by default; a pool of w workers
// should really get w threads, so the cap is raised to the largest pool requested.
void allow_parallelism(std::size_t threads) {
  static std::mutex mutex;
  static std::unique_ptr<tbb::global_control> control;
  static std::size_t allowed = 0;
  std::lock_guard lock(mutex);
  if (threads <= allowed || threads <= tbb::global_control::active_value(tbb::global_control::max_allowed_parallelism)) {
    allowed = std::max(allowed, threads);
    return;
  }
  control.reset();
  control = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism, threads);
  allowed = threads;
}

}  // namespace

struct WorkerPool::Arena {
  explicit Arena(int threads) : arena(threads) {}
  tbb::task_arena arena;
};

WorkerPool::WorkerPool(std::size_t workers) : workers_(workers) {
  if (workers == 0) throw ContractError("worker pool needs at least one worker");
  allow_parallelism(workers);
  arena_ = std::make_unique<Arena>(static_cast<int>(workers));
}

WorkerPool::~WorkerPool() = default;

void WorkerPool::run(std::size_t count, Thunk thunk, void* ctx) {
  arena_->arena.execute([&] {
    tbb::parallel_for(
        tbb::blocked_range<std::size_t>(0, count, 1),
        [&](const tbb::blocked_range<std::size_t>& r) {
          for (std::size_t i = r.begin(); i != r.end(); ++i) thunk(ctx, i);
        },
        tbb::static_partitioner());
  });
}

std::size_t WorkerPool::hardware_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

}  // namespace stream
