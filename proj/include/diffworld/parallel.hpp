/*
 * Copyright 2026 The DiffWorld Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DIFFWORLD_PARALLEL_HPP_
#define DIFFWORLD_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace diffworld {

// Worker cap: DIFFWORLD_THREADS when set to a positive integer, otherwise the
// hardware concurrency.
std::size_t worker_count();

// Runs fn over contiguous sub-ranges of [0, n). Ranges are disjoint, so any
// writes keyed by index are deterministic regardless of scheduling.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t min_grain = 16);

}  // namespace diffworld

#endif  // DIFFWORLD_PARALLEL_HPP_
