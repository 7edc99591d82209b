// Regenerates data/fixtures/separable_pairs.jsonl.
#include <iostream>

#include "prefalign/corpus.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures OUT.jsonl\n";
    return 2;
  }
  try {
    const auto pairs = prefalign::corpus::make_separable_pairs(384, 2024);
    prefalign::corpus::write_pairs(argv[1], pairs);
    std::cout << pairs.size() << " pairs -> " << argv[1] << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
