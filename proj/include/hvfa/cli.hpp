#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hvfa::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumeric = 2;

// Runs one subcommand (args[0] is the program name). Subcommands:
// sac-plan, hvfa-demo, gradcheck, collapse-demo, rtpp-gen, cost.
// Every subcommand accepts --config FILE (a JSON object whose keys are the
// subcommand's long option names); explicit flags override file values.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hvfa::cli
