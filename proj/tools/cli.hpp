#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dal::cli {

// args[0] is the program name. Returns the process exit status: 0 on
// success, nonzero with a diagnostic on `err` otherwise.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// The `dal-pipeline` entry point: the `pipeline` subcommand's flags.
int run_pipeline_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dal::cli
