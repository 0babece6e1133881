// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "spgs/cli.hpp"

int main(int argc, char** argv) { return spgs::run_cli(argc, argv); }
