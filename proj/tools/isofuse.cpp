#include <iostream>

#include "isofuse/cli/commands.hpp"

int main(int argc, char** argv)
{
    return isofuse::cli::run(argc, argv, std::cout, std::cerr);
}
