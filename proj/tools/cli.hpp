#pragma once

namespace pourbench::cli {

/// Entry point of the pourbench command line. Returns the process exit code.
int run(int argc, char** argv);

}  // namespace pourbench::cli
