#include "s2cr/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace s2cr {
namespace {

class WorkerPool {
 public:
  explicit WorkerPool(int workers) {
    for (int i = 0; i < workers; ++i) {
      threads_.emplace_back([this](std::stop_token st) { run(st); });
    }
  }

  ~WorkerPool() {
    for (auto& t : threads_) t.request_stop();
    cv_.notify_all();
  }

  int size() const { return static_cast<int>(threads_.size()); }

  void submit(std::function<void()> task) {
    {
      std::lock_guard lock(mutex_);
      queue_.push_back(std::move(task));
    }
    cv_.notify_one();
  }

 private:
  void run(std::stop_token st) {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return st.stop_requested() || !queue_.empty(); });
        if (queue_.empty()) return;
        task = std::move(queue_.front());
        queue_.pop_front();
      }
      task();
    }
  }

  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> queue_;
  std::vector<std::jthread> threads_;
};

WorkerPool& global_pool() {
  static WorkerPool pool(std::max(0, default_thread_count() - 1));
  return pool;
}

struct ForState {
  const std::function<void(int, int)>* fn = nullptr;
  int n = 0;
  int chunks = 0;
  std::atomic<int> next{0};
  std::mutex mutex;
  std::condition_variable cv;
  int done = 0;
  std::exception_ptr error;

  void drain() {
    for (;;) {
      const int c = next.fetch_add(1);
      if (c >= chunks) return;
      const int begin = static_cast<int>(static_cast<long long>(n) * c / chunks);
      const int end = static_cast<int>(static_cast<long long>(n) * (c + 1) / chunks);
      std::exception_ptr err;
      try {
        (*fn)(begin, end);
      } catch (...) {
        err = std::current_exception();
      }
      std::lock_guard lock(mutex);
      if (err && !error) error = err;
      if (++done == chunks) cv.notify_all();
    }
  }
};

}  // namespace

int default_thread_count() {
  if (const char* env = std::getenv("S2CR_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, int threads, const std::function<void(int, int)>& fn) {
  if (n <= 0) return;
  threads = std::min(threads, n);
  if (threads <= 1) {
    fn(0, n);
    return;
  }
  auto state = std::make_shared<ForState>();
  state->fn = &fn;
  state->n = n;
  state->chunks = threads;
  WorkerPool& pool = global_pool();
  const int helpers = std::min(threads - 1, pool.size());
  for (int i = 0; i < helpers; ++i) {
    pool.submit([state] { state->drain(); });
  }
  state->drain();
  std::unique_lock lock(state->mutex);
  state->cv.wait(lock, [&] { return state->done == state->chunks; });
  if (state->error) std::rethrow_exception(state->error);
}

}  // namespace s2cr
