// SPDX-License-Identifier: Apache-2.0
#include <kumo/cli.hpp>

int main(int argc, char** argv)
{
    return kumo::cli_main(argc, argv);
}
