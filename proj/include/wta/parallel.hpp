#pragma once

#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace wta {

// Static block partition over [0, count). Workers write results indexed by i,
// so the merged output is independent of the job count; any first exception
// is rethrown after join.
inline void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
  if (count <= 0) return;
  if (jobs < 1) jobs = 1;
  if (jobs == 1 || count == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  const int workers = std::min(jobs, count);
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  for (int t = 0; t < workers; ++t) {
    threads.emplace_back([&, t]() {
      try {
        for (int i = t; i < count; i += workers) body(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace wta
