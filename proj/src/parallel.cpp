#include "scorematch/parallel.hpp"

#include <omp.h>

namespace scorematch {

double pairwise_sum(std::span<const double> values) noexcept {
  constexpr std::size_t kLeaf = 8;
  if (values.size() <= kLeaf) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

int max_threads() noexcept { return omp_get_max_threads(); }

void set_max_threads(int n) noexcept {
  if (n >= 1) omp_set_num_threads(n);
}

}  // namespace scorematch
