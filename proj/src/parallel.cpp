#include "brainid/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace brainid {

namespace {

std::atomic<std::size_t> g_limit{0};
thread_local bool t_in_worker = false;

std::size_t env_threads()
{
    if (const char* env = std::getenv("BRAINID_THREADS")) {
        try {
            const long n = std::stol(env);
            if (n > 0)
                return static_cast<std::size_t>(n);
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace

std::size_t thread_count()
{
    const std::size_t limit = g_limit.load();
    return limit > 0 ? limit : env_threads();
}

void set_thread_limit(std::size_t n) { g_limit.store(n); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body)
{
    if (n == 0)
        return;
    const std::size_t workers = std::min(thread_count(), n);
    if (workers <= 1 || t_in_worker) {
        body(0, n);
        return;
    }

    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t step = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * step;
        const std::size_t end = std::min(n, begin + step);
        if (begin >= end)
            break;
        pool.emplace_back([&, w, begin, end] {
            t_in_worker = true;
            try {
                body(begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
            t_in_worker = false;
        });
    }
    for (auto& t : pool)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

} // namespace brainid
