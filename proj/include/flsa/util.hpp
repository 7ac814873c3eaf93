#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace flsa {

// Neumaier variant of Kahan summation. Used everywhere cumulative sums feed
// a certificate, so that box/terminal residuals reflect the optimizer and not
// the accumulator.
class CompensatedSum {
 public:
  void add(double v) {
    double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }
  void reset() { sum_ = comp_ = 0.0; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_total(const std::vector<double>& v) {
  CompensatedSum s;
  for (double x : v) s.add(x);
  return s.value();
}

inline int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

// Survival function of the chi-square distribution with df degrees of
// freedom, via the regularized incomplete gamma function (series +
// continued-fraction split).
double chi_square_sf(double stat, int df);

struct WilsonInterval {
  double lo;
  double hi;
};

// 95% by default (z = Phi^{-1}(0.975)).
WilsonInterval wilson_interval(long successes, long trials,
                               double z = 1.959963984540054);

// FNV-1a 64-bit, used for input provenance digests (not cryptographic).
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::string fnv1a64_hex(const void* data, std::size_t len);

// Shortest decimal string that round-trips the double (std::to_chars).
std::string shortest_double(double v);

// Runs fn(0..n_items-1) across a fixed-size thread pool. Work is claimed via
// an atomic counter; callers keep determinism by writing to per-item slots.
void parallel_for(int n_items, int threads, const std::function<void(int)>& fn);

// Geometric grid of `points` values strictly inside (1e-3 * top, top),
// ascending. Standard sweep used wherever a tuning parameter must exist
// somewhere rather than be known in advance.
std::vector<double> geometric_lambda_grid(double top, int points);

}  // namespace flsa
