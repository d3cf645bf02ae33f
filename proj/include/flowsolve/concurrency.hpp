#pragma once

#include <condition_variable>
#include <mutex>

namespace flowsolve {

// Counting semaphore with a runtime-configured capacity.
class Semaphore {
 public:
  explicit Semaphore(int slots) : slots_(slots) {}

  void acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return slots_ > 0; });
    --slots_;
  }

  void release() {
    {
      std::lock_guard lock(mutex_);
      ++slots_;
    }
    cv_.notify_one();
  }

  class Slot {
   public:
    explicit Slot(Semaphore& sem) : sem_(sem) { sem_.acquire(); }
    ~Slot() { sem_.release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    Semaphore& sem_;
  };

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int slots_;
};

}  // namespace flowsolve
