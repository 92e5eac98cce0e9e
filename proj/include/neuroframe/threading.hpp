#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace neuroframe {

// Shared worker pool for data-parallel loops. Every parallel_for partitions
// the index range into one contiguous block per worker, and each output
// element is produced by exactly one sequential reduction, so results are
// bit-identical for any thread count. NEUROFRAME_THREADS caps the pool size.
class ThreadPool {
 public:
  static ThreadPool& instance() {
    static ThreadPool pool;
    return pool;
  }

  int size() const { return num_threads_; }

  // fn(begin, end) is invoked on disjoint contiguous ranges covering [0, n).
  void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    const int parts = static_cast<int>(std::min<std::int64_t>(num_threads_, n));
    if (parts <= 1) {
      fn(0, n);
      return;
    }
    std::unique_lock<std::mutex> lock(mutex_);
    job_ = &fn;
    job_n_ = n;
    job_parts_ = parts;
    next_part_ = 1;  // part 0 runs on the caller
    pending_ = parts - 1;
    ++generation_;
    lock.unlock();
    wake_.notify_all();

    run_part(fn, n, parts, 0);

    lock.lock();
    done_.wait(lock, [this] { return pending_ == 0; });
    job_ = nullptr;
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

 private:
  ThreadPool() {
    num_threads_ = default_threads();
    for (int i = 0; i + 1 < num_threads_; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  ~ThreadPool() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      stop_ = true;
    }
    wake_.notify_all();
    for (auto& w : workers_) w.join();
  }

  static int default_threads() {
    if (const char* env = std::getenv("NEUROFRAME_THREADS")) {
      const int v = std::atoi(env);
      if (v >= 1) return std::min(v, 64);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::clamp(hw, 1u, 8u));
  }

  static void run_part(const std::function<void(std::int64_t, std::int64_t)>& fn,
                       std::int64_t n, int parts, int part) {
    const std::int64_t chunk = (n + parts - 1) / parts;
    const std::int64_t begin = part * chunk;
    const std::int64_t end = std::min<std::int64_t>(n, begin + chunk);
    if (begin < end) fn(begin, end);
  }

  void worker_loop() {
    std::uint64_t seen = 0;
    for (;;) {
      std::unique_lock<std::mutex> lock(mutex_);
      wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      const auto* fn = job_;
      const std::int64_t n = job_n_;
      const int parts = job_parts_;
      while (next_part_ < parts) {
        const int part = next_part_++;
        lock.unlock();
        run_part(*fn, n, parts, part);
        lock.lock();
        if (--pending_ == 0) done_.notify_one();
      }
    }
  }

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::int64_t, std::int64_t)>* job_ = nullptr;
  std::int64_t job_n_ = 0;
  int job_parts_ = 0;
  int next_part_ = 0;
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  int num_threads_ = 1;
  bool stop_ = false;
};

inline void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
  ThreadPool::instance().parallel_for(n, fn);
}

}  // namespace neuroframe
