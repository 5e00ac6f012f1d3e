#include "cyclelife/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cyclelife::parallel {
namespace {

std::atomic<unsigned> g_max_jobs{1};
thread_local bool t_in_worker = false;

}  // namespace

void set_max_jobs(unsigned jobs) { g_max_jobs.store(std::max(1u, jobs)); }

unsigned max_jobs() { return g_max_jobs.load(); }

void for_each_index(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(max_jobs(), n);
  if (workers <= 1 || t_in_worker) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::size_t first_error_index = n;
  std::mutex error_mutex;

  auto run = [&] {
    t_in_worker = true;
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        // Keep the lowest-index failure so the rethrown error is schedule independent.
        if (i < first_error_index) {
          first_error_index = i;
          first_error = std::current_exception();
        }
      }
    }
    t_in_worker = false;
  };

  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
  pool.clear();

  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace cyclelife::parallel
