#pragma once
// Command-line front end. Exit codes: 0 ok, 2 config, 3 data, 4 backend.

#include <ostream>

#include "eventnav/error.hpp"

namespace eventnav {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitBackend = 4;

int exit_code_for(Errc code) noexcept;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace eventnav
