#include "maskfix/threading.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace maskfix {

int worker_count() {
  if (const char* env = std::getenv("MASKFIX_THREADS")) {
    try {
      int n = std::stoi(env);
      return n < 1 ? 1 : n;
    } catch (...) {
      // Unparseable values fall through to the hardware default.
    }
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_shards(int shard_count, const std::function<void(int)>& fn) {
  if (shard_count <= 0) return;
  int workers = worker_count();
  if (workers > shard_count) workers = shard_count;

  if (workers == 1) {
    for (int s = 0; s < shard_count; ++s) fn(s);
    return;
  }

  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};

  auto run = [&]() {
    while (true) {
      int s = next.fetch_add(1);
      if (s >= shard_count) break;
      try {
        fn(s);
      } catch (...) {
        // Keep only the first exception; remaining shards still drain so all
        // threads join cleanly.
        bool expected = false;
        if (failed.compare_exchange_strong(expected, true)) {
          first_error = std::current_exception();
        }
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers) - 1);
  for (int t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();

  if (failed.load()) std::rethrow_exception(first_error);
}

}  // namespace maskfix
