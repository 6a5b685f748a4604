#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace metarenewal {

enum exit_code { exit_ok = 0, exit_failure = 1, exit_input_error = 2 };

// runs `<command> <config.json> [options]`; args excludes the program name
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace metarenewal
