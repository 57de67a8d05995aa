// SPDX-License-Identifier: Apache-2.0
//
// nfloc: near-field MIMO radar localization toolkit
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef NFLOC_PARALLEL_HPP
#define NFLOC_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nfloc
{
    // 0 means "all hardware threads".
    inline unsigned resolve_threads(unsigned requested)
    {
        if (requested > 0)
            return requested;
        const unsigned hw = std::thread::hardware_concurrency();
        return hw > 0 ? hw : 1;
    }

    // Calls fn(i) for i in [0, n). Work is handed out dynamically, so fn must
    // write its result to slot i only; callers reduce in index order afterwards.
    // The first exception thrown by any worker is rethrown on the caller.
    template <class Fn>
    void parallel_for(std::size_t n, unsigned threads, Fn &&fn)
    {
        const unsigned t = std::min<std::size_t>(resolve_threads(threads), std::max<std::size_t>(n, 1));
        if (t <= 1)
        {
            for (std::size_t i = 0; i < n; ++i)
                fn(i);
            return;
        }
        std::atomic<std::size_t> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        auto worker = [&]() {
            for (;;)
            {
                const std::size_t i = next.fetch_add(1);
                if (i >= n)
                    return;
                try
                {
                    fn(i);
                }
                catch (...)
                {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error)
                        error = std::current_exception();
                    next.store(n);
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(t - 1);
        for (unsigned k = 1; k < t; ++k)
            pool.emplace_back(worker);
        worker();
        for (auto &th : pool)
            th.join();
        if (error)
            std::rethrow_exception(error);
    }

} // namespace nfloc

#endif
