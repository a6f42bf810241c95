#pragma once

#include <cstddef>
#include <exception>
#include <span>

namespace scorematch {

/// Execution path for row and replicate loops. `serial` is the reference
/// implementation; `parallel` distributes the same per-item work over OpenMP
/// threads and must produce bit-identical results.
enum class Exec { serial, parallel };

/// Tree summation with a fixed shape that depends only on the length.
double pairwise_sum(std::span<const double> values) noexcept;

/// Number of OpenMP threads a parallel region would use.
int max_threads() noexcept;
void set_max_threads(int n) noexcept;

/// Runs fn(i) for i in [0, n). Under `Exec::parallel` iterations are spread
/// over OpenMP threads; if any iteration throws, the exception from the
/// lowest index is rethrown, matching the serial path.
template <typename Fn>
void for_each_index(std::size_t n, Exec exec, Fn&& fn, bool dynamic_schedule = false) {
  if (exec == Exec::serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::size_t first_index = n;
  const auto count = static_cast<long long>(n);
  if (dynamic_schedule) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < count; ++i) {
      try {
        fn(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical(scorematch_for_each_index)
        if (static_cast<std::size_t>(i) < first_index) {
          first_index = static_cast<std::size_t>(i);
          first_error = std::current_exception();
        }
      }
    }
  } else {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < count; ++i) {
      try {
        fn(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical(scorematch_for_each_index)
        if (static_cast<std::size_t>(i) < first_index) {
          first_index = static_cast<std::size_t>(i);
          first_error = std::current_exception();
        }
      }
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace scorematch
