#include <iostream>

#include "pricer_app.hpp"

int main(int argc, char** argv) { return dirac::app::run(argc, argv, std::cout, std::cerr); }
