// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DKWS_CLI_HPP_
#define DKWS_CLI_HPP_

namespace dkws {

// Full command-line entry point: subcommand dispatch, config handling, and
// reproducibility metadata. Returns the process exit status (2 on usage or
// config errors, with a single machine-parsable line on stderr).
int cli_main(int argc, char** argv);

}  // namespace dkws

#endif  // DKWS_CLI_HPP_
