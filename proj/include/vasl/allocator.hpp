#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace vasl {

/// Training allocates and frees many multi-megabyte activation buffers per
/// step. glibc serves those with fresh mmap()s by default, so every step
/// pays page faults on memory it just released. Raising the mmap and trim
/// thresholds keeps freed buffers in the heap for reuse. No-op elsewhere.
inline void configure_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 256 << 20);
#endif
}

}  // namespace vasl
