#include "dlimit/parallel.hpp"

#include <cstdlib>
#include <string>

namespace dlimit::kernel {

int resolve_threads() {
  if (const char* env = std::getenv("DLIMIT_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (...) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

}  // namespace dlimit::kernel
