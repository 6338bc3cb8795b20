#pragma once

#include <cstddef>
#include <functional>

namespace scert {

// Worker count: SCHATTEN_CERT_THREADS if set and positive, else hardware concurrency.
unsigned thread_count();

// Runs body(i) for i in [0, n) across worker threads. Exceptions propagate (first one wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace scert
