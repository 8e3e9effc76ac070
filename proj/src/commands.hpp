#pragma once

namespace strategem::cli {

/// Parse arguments and dispatch to a verb. Returns the process exit code.
int run(int argc, char** argv);

}  // namespace strategem::cli
