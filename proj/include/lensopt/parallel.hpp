#pragma once

#include <cstddef>
#include <functional>

namespace lensopt
{
	/// Caps module-internal parallelism (element loops, independent solves).
	/// Results never depend on the value: work is split into index ranges and
	/// every reduction happens afterwards in index order.
	void set_thread_count(int n);
	int thread_count();

	/// Calls `body(begin, end)` on disjoint contiguous chunks covering [0, n).
	void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)> &body);
} // namespace lensopt
