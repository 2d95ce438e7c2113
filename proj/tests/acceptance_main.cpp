// Acceptance suite: runs every experiment at its pinned parameters and prints
// one pass/fail line per criterion. Exit status is the number of failures.

#include <iostream>

#include "lieflow/experiments.hpp"

int main() {
  int failed = lieflow::experiments::run_acceptance_suite(std::cout, "out/acceptance", 42);
  if (failed == 0)
    std::cout << "acceptance: all criteria passed\n";
  else
    std::cout << "acceptance: " << failed << " criteria FAILED\n";
  return failed;
}
