#include "perturbopt/parallel.hpp"

#include <atomic>

namespace perturbopt {
namespace {

unsigned default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

std::atomic<unsigned>& configured() {
  static std::atomic<unsigned> n{default_threads()};
  return n;
}

}  // namespace

void set_thread_count(unsigned n) { configured().store(n == 0 ? default_threads() : n); }

unsigned thread_count() { return configured().load(); }

}  // namespace perturbopt
