#include "doctest.h"

#include "bdlab/suites.hpp"

using namespace bdlab;

TEST_CASE("catalog selftest passes at the default seed") {
  const auto results = catalog_selftest();
  REQUIRE(results.size() == 5);
  for (const auto& r : results) {
    INFO(r.name << ": " << r.witness);
    CHECK(r.passed());
    CHECK(r.witness.empty());
  }
  CHECK(results[0].samples == 5 * 100000);
}

TEST_CASE("flipped V lower bound is caught with a witness") {
  SuiteOptions opts;
  opts.v_samples = 1000;
  opts.flip_v_lower_bound = true;
  const auto r = v_function_suite(opts);
  CHECK(!r.passed());
  CHECK(r.failures == 1000);
  CHECK(r.witness.find("(sqrt2-1)min{|z|,|z|^2} <= V(z) fails at z=[") == 0);
}

TEST_CASE("verdicts do not depend on the seed") {
  for (std::uint64_t seed : {1ULL, 2ULL, 77ULL, 1234567ULL, 0xdeadbeefULL}) {
    SuiteOptions opts;
    opts.seed = seed;
    opts.v_samples = 20000;
    opts.shifted_samples = 1000;
    opts.recession_points = 3;
    for (const auto& r : catalog_selftest(opts)) {
      INFO(seed << " " << r.name << ": " << r.witness);
      CHECK(r.passed());
    }
  }
}
