// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dkws/cli.hpp"

int main(int argc, char** argv) { return dkws::cli_main(argc, argv); }
