#include "itolab/parallel.hpp"

#include "itolab/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace itolab {
namespace {

int initial_threads() {
  if (const char* env = std::getenv("ITO_LAB_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw ConfigurationError(std::string("ITO_LAB_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

std::atomic<int>& thread_setting() {
  static std::atomic<int> n{initial_threads()};
  return n;
}

}  // namespace

int default_threads() { return thread_setting().load(); }

void set_default_threads(int n) {
  if (n < 1) throw ConfigurationError("thread count must be >= 1, got " + std::to_string(n));
  thread_setting().store(n);
}

void parallel_for(std::size_t n, std::size_t block,
                  const std::function<void(std::size_t, std::size_t)>& fn, int threads) {
  if (n == 0) return;
  block = std::max<std::size_t>(block, 1);
  const std::size_t n_blocks = (n + block - 1) / block;
  const int want = threads > 0 ? threads : default_threads();
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(want), n_blocks);

  if (workers <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) fn(b * block, std::min(n, (b + 1) * block));
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= n_blocks) return;
      try {
        fn(b * block, std::min(n, (b + 1) * block));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n_blocks);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t i = 1; i < workers; ++i) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace itolab
