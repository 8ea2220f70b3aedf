#include <lensopt/parallel.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace lensopt
{
	namespace
	{
		std::atomic<int> g_threads{1};
		// nested calls from inside a worker run serially
		thread_local bool t_in_worker = false;
	}

	void set_thread_count(int n) { g_threads = std::max(1, n); }

	int thread_count() { return g_threads; }

	void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)> &body)
	{
		const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(g_threads.load()), n);
		if (workers <= 1 || t_in_worker)
		{
			if (n > 0)
				body(0, n);
			return;
		}

		const std::size_t chunk = (n + workers - 1) / workers;
		std::vector<std::exception_ptr> errors(workers);
		std::vector<std::thread> pool;
		pool.reserve(workers);
		for (std::size_t w = 0; w < workers; ++w)
		{
			const std::size_t begin = w * chunk;
			const std::size_t end = std::min(n, begin + chunk);
			if (begin >= end)
				break;
			pool.emplace_back([&, w, begin, end] {
				t_in_worker = true;
				try
				{
					body(begin, end);
				}
				catch (...)
				{
					errors[w] = std::current_exception();
				}
			});
		}
		for (auto &t : pool)
			t.join();
		for (auto &e : errors)
			if (e)
				std::rethrow_exception(e);
	}
} // namespace lensopt
