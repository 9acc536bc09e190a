#include "itolab/parallel.hpp"

#include <doctest.h>

#include <atomic>
#include <stdexcept>
#include <vector>

using namespace itolab;

TEST_CASE("every index is visited once in fixed blocks") {
  for (int threads : {1, 2, 8}) {
    std::vector<int> hits(1000, 0);
    std::vector<std::pair<std::size_t, std::size_t>> blocks(16);
    parallel_for(
        1000, 64,
        [&](std::size_t b, std::size_t e) {
          blocks[b / 64] = {b, e};
          for (std::size_t i = b; i < e; ++i) ++hits[i];
        },
        threads);
    for (int h : hits) CHECK(h == 1);
    CHECK(blocks[15] == std::make_pair(std::size_t{960}, std::size_t{1000}));
  }
}

TEST_CASE("exceptions propagate to the caller") {
  CHECK_THROWS_AS(parallel_for(
                      100, 10,
                      [](std::size_t b, std::size_t) {
                        if (b == 50) throw std::runtime_error("boom");
                      },
                      4),
                  std::runtime_error);
}

TEST_CASE("default thread count can be overridden") {
  const int before = default_threads();
  set_default_threads(3);
  CHECK(default_threads() == 3);
  set_default_threads(before);
}
