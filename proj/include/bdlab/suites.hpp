#pragma once
// Randomized inequality suites over the V-function and the integrand catalog.
// Every suite runs from a fixed seed and keeps the first failing sample.

#include <cstdint>
#include <string>
#include <vector>

namespace bdlab {

struct SuiteResult {
  std::string name;
  long samples = 0;
  long failures = 0;
  std::string witness;  ///< first failing sample, empty when none
  std::string detail;   ///< fitted constants or other context

  bool passed() const { return samples > 0 && failures == 0; }
};

struct SuiteOptions {
  std::uint64_t seed = 20240607;
  long v_samples = 100000;
  long shifted_samples = 10000;
  int recession_points = 10;
  /// Test hook: reverses the lower V-bound check, which must then fail.
  bool flip_v_lower_bound = false;
};

/// The four V-function estimates, checked as exact floating-point inequalities:
/// V(tz) ≤ 4max{t,t²}V(z), V(z+z′) ≤ 2(V(z)+V(z′)),
/// (√2−1)min{|z|,|z|²} ≤ V(z) ≤ min{|z|,|z|²}, and |z|²/c(ℓ) ≤ V(z) ≤ c(ℓ)|z|² for |z| ≤ ℓ.
SuiteResult v_function_suite(const SuiteOptions& opts = {});

/// Two-sided bounds m(ϱ/2)² V(ξ) ≤ f_a(ξ) ≤ (c(ϱ/2) sup|f″| + 16 Lip f/((√2−1)ϱ)) V(ξ)
/// for the area integrand and Φ_{1.5} over a fixed set of (a, ξ₀, ϱ) triples.
SuiteResult shifted_suite(const SuiteOptions& opts = {});

/// Φ_a certifies at a and fails at a − 0.3 for a ∈ {1.3, 1.5, 2, 3}; M₂ certifies at 3.
SuiteResult ellipticity_suite(const SuiteOptions& opts = {});

/// Numerical recession limit against the hard-wired f^∞ for every catalog member,
/// plus m_p^∞ = |·|, to 1e−5 relative.
SuiteResult recession_suite(const SuiteOptions& opts = {});

/// Midpoint convexity, linear growth and Lipschitz bounds over the catalog.
SuiteResult catalog_property_suite(const SuiteOptions& opts = {});

/// All suites in a fixed order.
std::vector<SuiteResult> catalog_selftest(const SuiteOptions& opts = {});

}  // namespace bdlab
