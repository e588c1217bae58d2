// Process-wide allocator tuning. Training graphs allocate and free the
// same large activation buffers every step; with default glibc settings
// those blocks are mmap'd and returned to the kernel on free, so every
// step pays the page-fault cost again. Raising the thresholds keeps the
// blocks on the heap for reuse.

#ifdef __GLIBC__
#include <malloc.h>

namespace {

struct MallocTuning {
    MallocTuning() {
        mallopt(M_MMAP_THRESHOLD, 1 << 30);
        mallopt(M_TRIM_THRESHOLD, 1 << 30);
    }
};

const MallocTuning tuning_applied;

} // namespace
#endif
