#pragma once

#include <cstddef>
#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "bvsmiss/search.hpp"

namespace bvsmiss::detail {

/// Runs fn(i) for i in [0, n). Parallel execution uses an OpenMP dynamic
/// schedule; each index writes only its own output slot, so both policies
/// produce identical results. The first exception (lowest index) is
/// rethrown after the loop.
template <class Fn>
void for_each_index(std::size_t n, ExecPolicy policy, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  const long count = static_cast<long>(n);
  if (policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < count; ++i) {
      try {
        fn(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  } else {
    for (long i = 0; i < count; ++i) {
      try {
        fn(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace bvsmiss::detail
