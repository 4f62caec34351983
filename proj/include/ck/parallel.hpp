#ifndef CK_PARALLEL_HPP
#define CK_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace ck {

// Thread cap: CHOICEKIT_THREADS env var, else hardware concurrency.
int default_thread_cap();

// requested <= 0 means "use the default cap"; never below 1.
int resolve_threads(int requested);

// Runs fn(worker, begin, end) over static index blocks of [0, n).
// Workers get contiguous ranges; `worker` indexes per-worker scratch.
// Results must be written to per-index storage; reductions happen afterwards
// in index order so totals do not depend on the thread count.
void parallel_ranges(int threads, std::size_t n,
                     const std::function<void(int, std::size_t, std::size_t)>& fn);

void parallel_for(int threads, std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ck

#endif
