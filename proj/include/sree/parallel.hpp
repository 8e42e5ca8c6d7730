// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace sree
{
    /// Worker count: SR_EE_THREADS if set and positive, else hardware concurrency.
    inline unsigned default_threads()
    {
        if (const char *env = std::getenv("SR_EE_THREADS"))
        {
            try
            {
                const int v = std::stoi(env);
                if (v > 0)
                    return unsigned(v);
            }
            catch (...)
            {
            }
        }
        return std::max(1u, std::thread::hardware_concurrency());
    }

    /// Runs body(i) for i in [0, n) on a bounded pool. Work items must write to disjoint slots;
    /// the first exception thrown is rethrown after all workers join.
    template <class Body>
    void parallel_for(std::size_t n, unsigned threads, Body &&body)
    {
        threads = std::max(1u, std::min<unsigned>(threads, unsigned(std::max<std::size_t>(n, 1))));
        if (threads == 1)
        {
            for (std::size_t i = 0; i < n; ++i)
                body(i);
            return;
        }
        std::atomic<std::size_t> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&]
                              {
                                  for (std::size_t i = next++; i < n; i = next++)
                                  {
                                      try
                                      {
                                          body(i);
                                      }
                                      catch (...)
                                      {
                                          std::lock_guard lock(error_mutex);
                                          if (!error)
                                              error = std::current_exception();
                                      }
                                  } });
        for (auto &th : pool)
            th.join();
        if (error)
            std::rethrow_exception(error);
    }
}
