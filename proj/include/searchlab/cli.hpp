#pragma once

// CLI entry point (exposed for tests; tools/main.cpp is a thin wrapper).
// Exit codes: 0 success, 1 usage error, 2 data error, 3 analysis error.

namespace searchlab {

int cli_main(int argc, const char* const* argv);

}  // namespace searchlab
