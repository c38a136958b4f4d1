#pragma once

#include <atomic>
#include <iosfwd>

namespace vpa {

/// 0 success, 1 user error (config, manifest, arguments), 2 environment
/// error (unreachable endpoint, unreadable video, I/O), 130 interrupted.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_dispatch(int argc, const char* const* argv);

/// Set by SIGINT; long-running commands checkpoint and return 130.
std::atomic<bool>& cli_stop_flag();

}  // namespace vpa
