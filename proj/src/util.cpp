#include "flsa/util.hpp"

#include <atomic>
#include <charconv>
#include <cstring>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace flsa {

namespace {

// Regularized lower incomplete gamma P(a,x) by power series.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a,x) by modified Lentz continued
// fraction.
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chi_square_sf(double stat, int df) {
  if (df <= 0) throw std::invalid_argument("chi_square_sf: df must be positive");
  if (!(stat >= 0.0)) return 1.0;
  if (stat == 0.0) return 1.0;
  double a = 0.5 * df;
  double x = 0.5 * stat;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

WilsonInterval wilson_interval(long successes, long trials, double z) {
  if (trials <= 0) throw std::invalid_argument("wilson_interval: trials must be positive");
  double n = static_cast<double>(trials);
  double p = static_cast<double>(successes) / n;
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = (p + z2 / (2.0 * n)) / denom;
  double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {center - half, center + half};
}

std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string fnv1a64_hex(const void* data, std::size_t len) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a64(data, len);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::string shortest_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<double> geometric_lambda_grid(double top, int points) {
  if (!(top > 0.0)) throw std::invalid_argument("lambda grid: top must be positive");
  if (points < 1) throw std::invalid_argument("lambda grid: need at least one point");
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int g = 1; g <= points; ++g)
    grid[static_cast<std::size_t>(g) - 1] =
        top * std::pow(10.0, -3.0 * (points + 1 - g) / (points + 1));
  return grid;
}

void parallel_for(int n_items, int threads, const std::function<void(int)>& fn) {
  if (n_items <= 0) return;
  if (threads < 1) threads = 1;
  if (threads == 1 || n_items == 1) {
    for (int i = 0; i < n_items; ++i) fn(i);
    return;
  }
  threads = std::min(threads, n_items);
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        int i = next.fetch_add(1);
        if (i >= n_items || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> g(err_mutex);
          if (!failed.exchange(true)) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace flsa
