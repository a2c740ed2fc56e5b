#pragma once

namespace gravis {

// Entry point behind the `gravis` binary; exposed so tests can drive the
// command surface in-process. Returns the process exit code: 0 on success,
// 1 on runtime failure (the error name is printed to stderr), 2 on bad
// usage.
int cli_main(int argc, const char* const* argv);

}  // namespace gravis
