#include "bdlab/suites.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "bdlab/integrands.hpp"
#include "bdlab/symcalc.hpp"

namespace bdlab {

namespace {

using Sym2 = SymMatrix<double, 2>;
using Sym3 = SymMatrix<double, 3>;

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }

  template <int Dim>
  SymMatrix<double, Dim> direction() {
    typename SymMatrix<double, Dim>::Packed p;
    for (int k = 0; k < SymMatrix<double, Dim>::kSize; ++k) p(k) = normal_(rng_);
    SymMatrix<double, Dim> z(p);
    return z / z.norm();
  }

  template <int Dim>
  SymMatrix<double, Dim> matrix(double lo, double hi) {
    return log_uniform(lo, hi) * direction<Dim>();
  }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
};

template <int Dim>
std::string describe(const SymMatrix<double, Dim>& z) {
  std::ostringstream os;
  os.precision(17);
  os << "[";
  for (int i = 0; i < Dim; ++i) {
    os << (i ? "; " : "");
    for (int j = 0; j < Dim; ++j) os << (j ? ", " : "") << z(i, j);
  }
  os << "]";
  return os.str();
}

std::string number(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

struct Recorder {
  SuiteResult& r;
  void check(bool ok, const std::string& witness) {
    ++r.samples;
    if (ok) return;
    if (r.failures++ == 0) r.witness = witness;
  }
};

template <int Dim>
void v_samples(Sampler& s, long count, bool flip, Recorder& rec) {
  const double c3 = std::sqrt(2.0) - 1.0;
  for (long i = 0; i < count; ++i) {
    const auto z = s.matrix<Dim>(1e-4, 1e4);
    const auto zp = s.matrix<Dim>(1e-4, 1e4);
    const double t = s.uniform(0.0, 10.0);
    const double vz = v_function(z);
    const double n = z.norm();

    const double lhs1 = v_function(SymMatrix<double, Dim>(t * z));
    rec.check(lhs1 <= 4.0 * std::max(t, t * t) * vz,
              "V(tz) <= 4max{t,t^2}V(z) fails at z=" + describe(z) + " t=" + number(t));

    rec.check(v_function(SymMatrix<double, Dim>(z + zp)) <= 2.0 * (vz + v_function(zp)),
              "V(z+z') <= 2(V(z)+V(z')) fails at z=" + describe(z) + " z'=" + describe(zp));

    const double m = std::min(n, n * n);
    const double gap = vz - c3 * m;
    rec.check(flip ? -gap >= 0.0 : gap >= 0.0,
              "(sqrt2-1)min{|z|,|z|^2} <= V(z) fails at z=" + describe(z) + " V=" + number(vz) +
                  " bound=" + number(c3 * m));
    rec.check(vz <= m, "V(z) <= min{|z|,|z|^2} fails at z=" + describe(z));

    const double ell = s.log_uniform(1e-2, 1e2);
    const auto w = (ell * s.uniform(0.0, 1.0)) * s.direction<Dim>();
    const double c = v_quadratic_constant(ell);
    const double vw = v_function(w), w2 = w.squaredNorm();
    rec.check(w2 / c <= vw && vw <= c * w2,
              "quadratic comparability fails at z=" + describe(w) + " l=" + number(ell));
  }
}

std::vector<IntegrandSpec> linear_growth_catalog() {
  return {phi_a(1.3), phi_a(1.5), phi_a(2.0), phi_a(3.0), m_big_p(1.0), m_big_p(2.0),
          m_big_p(3.0), m_small_p(1.5), m_small_p(2.0), m_small_p(3.0), area_integrand()};
}

}  // namespace

SuiteResult v_function_suite(const SuiteOptions& opts) {
  SuiteResult r;
  r.name = "v_function";
  Recorder rec{r};
  Sampler s(opts.seed);
  v_samples<2>(s, opts.v_samples / 2, opts.flip_v_lower_bound, rec);
  v_samples<3>(s, opts.v_samples - opts.v_samples / 2, opts.flip_v_lower_bound, rec);
  r.detail = std::to_string(opts.v_samples) + " (z, z', t) draws";
  return r;
}

SuiteResult shifted_suite(const SuiteOptions& opts) {
  SuiteResult r;
  r.name = "shifted_integrand";
  Recorder rec{r};
  Sampler s(opts.seed + 1);
  struct Triple {
    Sym2 xi0;
    double rho;
  };
  Sym2 diag, mixed;
  diag(0, 0) = 1.0;
  mixed(0, 0) = 0.5;
  mixed(0, 1) = 0.8;
  mixed(1, 1) = -0.7;
  const std::vector<Triple> triples = {{Sym2::Zero(), 0.5}, {Sym2::Zero(), 0.9}, {diag, 0.5}, {mixed, 0.8}};
  std::ostringstream detail;
  detail.precision(6);
  for (const IntegrandSpec& f : {area_integrand(), phi_a(1.5)}) {
    for (const Triple& tr : triples) {
      // a = ξ₀ and a point strictly inside the admissible ball B(ξ₀, ϱ/2).
      for (int k = 0; k < 2; ++k) {
        const Sym2 a = k == 0 ? tr.xi0 : Sym2(tr.xi0 + (0.45 * tr.rho * s.uniform(0.0, 1.0)) * s.direction<2>());
        const ShiftedIntegrand<2> fa(f, a, tr.xi0, tr.rho);
        const double lo = fa.lower_constant(), hi = fa.upper_constant();
        if (k == 0) {
          detail << f.name() << " |xi0|=" << tr.xi0.norm() << " rho=" << tr.rho << " lower=" << lo
                 << " upper=" << hi << "; ";
        }
        for (long i = 0; i < opts.shifted_samples; ++i) {
          const Sym2 xi = s.matrix<2>(1e-3, 1e3);
          const double v = v_function(xi), val = fa.value(xi);
          rec.check(lo * v <= val && val <= hi * v,
                    f.name() + ": shifted bound fails at a=" + describe(a) + " xi=" + describe(xi) +
                        " f_a=" + number(val) + " V=" + number(v));
        }
      }
    }
  }
  r.detail = detail.str();
  return r;
}

SuiteResult ellipticity_suite(const SuiteOptions& opts) {
  SuiteResult r;
  r.name = "ellipticity";
  Recorder rec{r};
  EllipticitySampling sampling;
  sampling.seed = opts.seed;
  std::ostringstream detail;
  detail.precision(6);
  for (double a : {1.3, 1.5, 2.0, 3.0}) {
    const IntegrandSpec f = phi_a(a);
    const auto own = certify_ellipticity<2>(f, a, sampling);
    const auto below = certify_ellipticity<2>(f, a - 0.3, sampling);
    rec.check(own.has_value(), f.name() + " does not certify at a=" + number(a));
    rec.check(!below.has_value(), f.name() + " wrongly certifies at a=" + number(a - 0.3));
    if (own) detail << f.name() << " lambda=" << own->lambda << " Lambda=" << own->Lambda << "; ";
  }
  const auto m2 = certify_ellipticity<2>(m_big_p(2.0), 3.0, sampling);
  rec.check(m2.has_value(), "M_2 does not certify at a=3");
  if (m2) detail << "M_2 lambda=" << m2->lambda << " Lambda=" << m2->Lambda;
  r.detail = detail.str();
  return r;
}

SuiteResult recession_suite(const SuiteOptions& opts) {
  SuiteResult r;
  r.name = "recession";
  Recorder rec{r};
  Sampler s(opts.seed + 2);
  double worst = 0.0;
  for (const IntegrandSpec& f : linear_growth_catalog()) {
    for (int i = 0; i < opts.recession_points; ++i) {
      const Sym2 z = s.matrix<2>(0.1, 10.0);
      const double exact = f.recession(z);
      double numeric = 0.0;
      try {
        numeric = recession_limit(f, z);
      } catch (const NoConvergence& e) {
        rec.check(false, f.name() + ": " + e.what() + " at z=" + describe(z));
        continue;
      }
      const double rel = std::abs(numeric - exact) / exact;
      worst = std::max(worst, rel);
      rec.check(rel <= 1e-5, f.name() + ": recession limit " + number(numeric) + " vs " + number(exact) +
                                 " at z=" + describe(z));
      if (f.kind() == IntegrandKind::MSmallP) {
        rec.check(std::abs(numeric - z.norm()) <= 1e-5 * z.norm(),
                  f.name() + ": recession differs from |z| at z=" + describe(z));
      }
    }
  }
  r.detail = "max relative error " + number(worst);
  return r;
}

SuiteResult catalog_property_suite(const SuiteOptions& opts) {
  SuiteResult r;
  r.name = "catalog_properties";
  Recorder rec{r};
  Sampler s(opts.seed + 3);
  for (const IntegrandSpec& f : linear_growth_catalog()) {
    const GrowthConstants gc = *f.growth();
    for (int i = 0; i < 2000; ++i) {
      const Sym3 z = s.matrix<3>(1e-2, 1e2), w = s.matrix<3>(1e-2, 1e2);
      const double fz = f.value(z), fw = f.value(w);
      rec.check(f.value(Sym3(0.5 * (z + w))) <= 0.5 * (fz + fw),
                f.name() + ": midpoint convexity fails at z=" + describe(z) + " w=" + describe(w));
      rec.check(gc.c1 * z.norm() - gc.gamma <= fz && fz <= gc.c2 * (1.0 + z.norm()),
                f.name() + ": linear growth fails at z=" + describe(z));
      rec.check(std::abs(fz - fw) <= gc.c2 * (z - w).norm(),
                f.name() + ": Lipschitz bound fails at z=" + describe(z) + " w=" + describe(w));
      rec.check(f.recession(Sym3(z + w)) <= f.recession(z) + f.recession(w),
                f.name() + ": recession subadditivity fails at z=" + describe(z));
    }
    for (int i = 0; i < 200; ++i) {
      // Jensen for a discrete probability measure with five atoms.
      Sym3 mean;
      double fmean = 0.0, total = 0.0;
      std::vector<std::pair<double, Sym3>> atoms;
      for (int k = 0; k < 5; ++k) atoms.emplace_back(s.uniform(0.1, 1.0), s.matrix<3>(1e-2, 1e2));
      for (const auto& [wt, z] : atoms) total += wt;
      for (const auto& [wt, z] : atoms) {
        mean += (wt / total) * z;
        fmean += (wt / total) * f.value(z);
      }
      rec.check(f.value(mean) <= fmean, f.name() + ": Jensen fails at mean=" + describe(mean));
    }
  }
  return r;
}

std::vector<SuiteResult> catalog_selftest(const SuiteOptions& opts) {
  return {v_function_suite(opts), shifted_suite(opts), ellipticity_suite(opts), recession_suite(opts),
          catalog_property_suite(opts)};
}

}  // namespace bdlab
