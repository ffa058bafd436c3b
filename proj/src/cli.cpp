#include "dlimit/cli.hpp"

#include <cstdio>

namespace dlimit::cli {

int run(int, char**) {
  std::puts("dlimit: command-line interface not assembled yet");
  return 1;
}

}  // namespace dlimit::cli
