#pragma once

namespace scert {

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_data = 2, exit_verify = 3 };

int run_cli(int argc, char** argv);

}  // namespace scert
