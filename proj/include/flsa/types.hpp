#pragma once

#include <vector>

#include "flsa/errors.hpp"

namespace flsa {

// Fixed-length observed sequence y_0..y_{n-1}. Values must be finite.
class Signal {
 public:
  explicit Signal(std::vector<double> values);
  int size() const { return static_cast<int>(values_.size()); }
  const std::vector<double>& values() const { return values_; }
  double operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }

 private:
  std::vector<double> values_;
};

// Piecewise-constant fit. change_points[k] is the first index of segment
// k+1 (0-based, so every position lies in 1..n-1); levels has one entry per
// segment and adjacent levels always differ (zero jumps are never stored).
struct Segmentation {
  int n = 0;
  std::vector<int> change_points;
  std::vector<double> levels;
  double lambda = 0.0;

  int num_segments() const { return static_cast<int>(levels.size()); }
  // Sign of the jump entering segment k+1 (+1 or -1).
  int jump_sign(int k) const;
  std::vector<int> jump_signs() const;
  // Throws InputError when a structural invariant is broken.
  void check() const;
};

struct SignChange {
  int position = 0;
  int sign = 0;  // +1 or -1
};

// Ground-truth generator: step function plus i.i.d. Gaussian noise.
struct StepModel {
  int n = 0;
  std::vector<int> change_points;
  std::vector<double> levels;
  double noise_sd = 0.0;

  std::vector<int> jump_signs() const;
  void check() const;
};

std::vector<double> expand(const Segmentation& seg);
std::vector<double> expand(const StepModel& model);

// Inverse of expand: detects exact level changes. expand(compress(v))
// reproduces v for any finite sequence.
Segmentation compress(const std::vector<double>& step_values, double lambda = 0.0);

// Two-sided Hausdorff distance between change-point index sets.
// Both empty -> 0; exactly one empty -> +infinity.
double set_distance(const std::vector<int>& a, const std::vector<int>& b);

// Recovery criterion with localization window eps*n: the change-point sets
// must lie within eps*n of each other (strict), and every true change point
// must have an estimated one of matching sign within the window. With
// eps*n < 1 this reduces to exact recovery including signs.
bool eps_sign_consistent(const Segmentation& est, const StepModel& truth,
                         double eps);

}  // namespace flsa
