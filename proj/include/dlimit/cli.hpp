#pragma once

// ============================================================================
// Command-line front end. run() is the real main: tests call it in-process.
// Exit codes: 0 success, 1 input error (usage printed), 2 numerical failure
// (failure mode named on stderr).
// ============================================================================

namespace dlimit::cli {

int run(int argc, char** argv);

}  // namespace dlimit::cli
