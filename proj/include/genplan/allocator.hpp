#pragma once

#include <cstddef>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace genplan {

// Training allocates and frees many multi-megabyte activations per step.
// Keeping them on the heap instead of fresh zeroed mappings avoids most of
// the page-fault cost. Call once from main(); a no-op off glibc.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace genplan
