#pragma once

namespace nimh {

// argv-style entry point shared by the installed binary and the tests.
// Returns 0 on success, 1 on domain/input failures, 2 on usage errors.
int run_cli(int argc, const char* const* argv);

} // namespace nimh
