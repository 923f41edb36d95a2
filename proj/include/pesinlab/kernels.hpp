#pragma once

// Execution policy shared by the data-parallel sweeps. Every parallel loop
// writes into a slot owned by its index and reductions run afterwards in
// index order, so results never depend on the thread count.

#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <vector>

namespace pesinlab {

enum class Execution { serial, parallel };

/// splitmix64 finalizer; used to derive per-task seeds from (root, index).
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t task_seed(std::uint64_t root, std::uint64_t index) {
  return mix64(mix64(root) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Runs fn(i) for i in [0, n). Exceptions thrown by a task are captured and
/// the one with the smallest index is rethrown after the loop.
template <class Fn>
void for_each_index(std::size_t n, Fn&& fn, Execution exec = Execution::parallel) {
  std::optional<std::size_t> failed_at;
  std::exception_ptr failure;
  std::mutex guard;
  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 16) if (exec == Execution::parallel)
  for (long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(guard);
      if (!failed_at || static_cast<std::size_t>(i) < *failed_at) {
        failed_at = static_cast<std::size_t>(i);
        failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

/// Maps fn over [0, n) into a vector ordered by index.
template <class T, class Fn>
std::vector<T> map_indices(std::size_t n, Fn&& fn, Execution exec = Execution::parallel) {
  std::vector<T> out(n);
  for_each_index(n, [&](std::size_t i) { out[i] = fn(i); }, exec);
  return out;
}

void set_thread_count(int threads);
int thread_count();

}  // namespace pesinlab
