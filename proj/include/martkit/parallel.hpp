#pragma once

#include <cstddef>
#include <functional>

namespace martkit {

/// Runs body(i) for i in [0, count) on up to `threads` workers. Items are
/// handed out dynamically; callers write results into per-item slots so the
/// outcome does not depend on scheduling. The first exception is rethrown.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

/// Worker count used when a caller passes threads <= 0.
int default_threads() noexcept;

}  // namespace martkit
