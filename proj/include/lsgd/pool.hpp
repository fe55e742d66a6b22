// Copyright 2026 The lsgd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace lsgd {

/// Persistent fork-join pool for per-client fan-out. Index i is always
/// processed by worker (i mod threads), and every task writes only its own
/// slot, so results never depend on the thread count. Idle workers block on a
/// condition variable rather than spinning.
class ClientPool {
 public:
  explicit ClientPool(std::size_t threads);
  ~ClientPool();

  ClientPool(const ClientPool&) = delete;
  ClientPool& operator=(const ClientPool&) = delete;

  std::size_t threads() const { return threads_; }

  /// Runs fn(i) for i in [0, n) and returns once all calls have finished.
  /// The first exception thrown by any call is rethrown here.
  void run(std::size_t n, const std::function<void(std::size_t)>& fn);

 private:
  void worker_loop(std::size_t t);
  void run_share(std::size_t t);

  std::size_t threads_;
  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  std::size_t generation_ = 0;
  std::size_t pending_ = 0;
  bool stop_ = false;
  std::size_t n_ = 0;
  const std::function<void(std::size_t)>* fn_ = nullptr;
  std::exception_ptr error_;
};

}  // namespace lsgd
