#pragma once

namespace pufkit {

// Exit codes: 0 success/accept, 1 reject/mismatch, 2 usage/validation/transport
// error.
int run_cli(int argc, const char* const* argv);

}  // namespace pufkit
