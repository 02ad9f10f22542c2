#pragma once

namespace ecg {

// Entry point for the `ecgkit` binary; also callable in-process from tests.
// Exit codes: 0 success, 1 runtime error, 2 usage error.
int cli_run(int argc, const char* const* argv);

}  // namespace ecg
