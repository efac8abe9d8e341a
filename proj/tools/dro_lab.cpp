#include <iostream>

#include "dro_lab_cli.hpp"

int main(int argc, char** argv) { return dro_lab::dro_lab_main(argc, argv, std::cout, std::cerr); }
