#pragma once

#include <cstddef>
#include <functional>

namespace cyclelife::parallel {

/// Process-wide cap on worker threads (the CLI's `--jobs`). Defaults to 1.
void set_max_jobs(unsigned jobs);
unsigned max_jobs();

/// Runs body(i) for i in [0, n). Work items must write only to their own
/// output slots; callers reduce in index order afterwards so results never
/// depend on scheduling. Calls made from inside a worker run serially.
void for_each_index(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace cyclelife::parallel
