#pragma once

#include <cstddef>
#include <functional>

namespace gclrec {

// Runs body(begin, end) over contiguous chunks of [0, n) on up to `threads`
// threads. Chunks are disjoint, so bodies that only write their own rows
// stay deterministic.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace gclrec
