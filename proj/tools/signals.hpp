#pragma once

#include <csignal>
#include <functional>
#include <pthread.h>
#include <thread>

namespace hprm::tools {

/// Blocks SIGINT/SIGTERM in every thread and runs `on_signal` from a
/// dedicated waiter thread when one arrives. Call before starting any other
/// thread.
inline void watch_termination(std::function<void()> on_signal) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::thread t([set, on_signal = std::move(on_signal)] {
    int sig = 0;
    if (sigwait(&set, &sig) == 0) on_signal();
  });
  t.detach();
}

}  // namespace hprm::tools
