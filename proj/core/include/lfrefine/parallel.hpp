#pragma once

#include <cstddef>
#include <functional>

namespace lfrefine {

// Process-wide worker count for internal parallel loops. Results never depend
// on this value: every parallel loop writes disjoint, index-addressed outputs.
void set_thread_count(std::size_t threads);
std::size_t thread_count();

// Runs body(i) for i in [0, count), split into contiguous chunks.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace lfrefine
