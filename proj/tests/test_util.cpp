#include <doctest.h>

#include <atomic>
#include <cmath>
#include <vector>

#include "flsa/util.hpp"

using namespace flsa;

TEST_CASE("compensated sum survives catastrophic cancellation") {
  CompensatedSum s;
  s.add(1.0);
  for (int i = 0; i < 10000; ++i) s.add(1e-16);
  s.add(-1.0);
  CHECK(s.value() == doctest::Approx(1e-12).epsilon(1e-6));
}

TEST_CASE("chi-square survival function hits table values") {
  // 0.99 quantiles: df=1 -> 6.6349, df=4 -> 13.2767.
  CHECK(chi_square_sf(6.6349, 1) == doctest::Approx(0.01).epsilon(1e-3));
  CHECK(chi_square_sf(13.2767, 4) == doctest::Approx(0.01).epsilon(1e-3));
  // Median of chi-square(2) is 2 ln 2.
  CHECK(chi_square_sf(2.0 * std::log(2.0), 2) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(chi_square_sf(0.0, 3) == 1.0);
}

TEST_CASE("wilson interval brackets the point estimate") {
  auto iv = wilson_interval(50, 100);
  CHECK(iv.lo < 0.5);
  CHECK(iv.hi > 0.5);
  CHECK(iv.lo > 0.40);
  CHECK(iv.hi < 0.60);
  auto all = wilson_interval(100, 100);
  CHECK(all.hi <= 1.0 + 1e-12);
  CHECK(all.lo > 0.95);
  auto none = wilson_interval(0, 100);
  CHECK(none.lo >= -1e-12);
  CHECK(none.hi < 0.05);
}

TEST_CASE("fnv1a64 matches reference digests") {
  // Published FNV-1a test vectors.
  CHECK(fnv1a64("", 0) == 0xCBF29CE484222325ULL);
  CHECK(fnv1a64("a", 1) == 0xAF63DC4C8601EC8CULL);
  CHECK(fnv1a64_hex("", 0) == "cbf29ce484222325");
}

TEST_CASE("shortest_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.123456789, -0.0, 2.5}) {
    std::string s = shortest_double(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("parallel_for covers every index exactly once") {
  for (int threads : {1, 2, 7}) {
    std::vector<std::atomic<int>> hits(257);
    for (auto& h : hits) h.store(0);
    parallel_for(257, threads, [&](int i) { hits[static_cast<std::size_t>(i)]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
}
