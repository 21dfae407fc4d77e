#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <type_traits>
#include <vector>

#include "unravel/common.hpp"

namespace unravel {

// Evaluates fn(i) for i in [0, n) on up to n_workers threads and returns the
// results ordered by index. Jobs are assigned by static index striding
// (worker w runs i = w, w + n_workers, ...). Because each job is seeded from
// its index alone and results are collected by index, the returned vector is
// identical for every worker count. If jobs throw, the exception from the
// smallest failing index is rethrown.
template <typename Fn>
auto run_indexed(int n, int n_workers, Fn&& fn)
    -> std::vector<std::invoke_result_t<Fn&, int>> {
  using R = std::invoke_result_t<Fn&, int>;
  require(n >= 0, "run_indexed: negative job count");
  std::vector<R> results(static_cast<std::size_t>(n));
  if (n == 0) return results;
  n_workers = std::clamp(n_workers, 1, n);

  if (n_workers == 1) {
    for (int i = 0; i < n; ++i) results[static_cast<std::size_t>(i)] = fn(i);
    return results;
  }

  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_workers));
  std::vector<int> error_index(static_cast<std::size_t>(n_workers), -1);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += n_workers) {
        try {
          results[static_cast<std::size_t>(i)] = fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
          error_index[static_cast<std::size_t>(w)] = i;
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();

  int first = -1;
  for (int w = 0; w < n_workers; ++w) {
    if (error_index[static_cast<std::size_t>(w)] < 0) continue;
    if (first < 0 || error_index[static_cast<std::size_t>(w)] <
                         error_index[static_cast<std::size_t>(first)])
      first = w;
  }
  if (first >= 0) std::rethrow_exception(errors[static_cast<std::size_t>(first)]);
  return results;
}

}  // namespace unravel
