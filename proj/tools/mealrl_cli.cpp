#include <mealrl/cli.hpp>

int main(int argc, char** argv) { return mealrl::cli_dispatch(argc, argv); }
