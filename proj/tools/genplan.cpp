#include "genplan/allocator.hpp"
#include "genplan/cli.hpp"

int main(int argc, char** argv) {
  genplan::tune_allocator();
  return genplan::cli::run(argc, argv);
}
