#include "flsa/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flsa/util.hpp"

namespace flsa {

Signal::Signal(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InputError("signal must contain at least one sample");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]))
      throw InputError("signal sample " + std::to_string(i) + " is not finite");
  }
}

int Segmentation::jump_sign(int k) const {
  double d = levels[static_cast<std::size_t>(k) + 1] - levels[static_cast<std::size_t>(k)];
  return sign_of(d);
}

std::vector<int> Segmentation::jump_signs() const {
  std::vector<int> s(change_points.size());
  for (std::size_t k = 0; k < change_points.size(); ++k)
    s[k] = jump_sign(static_cast<int>(k));
  return s;
}

void Segmentation::check() const {
  if (n < 1) throw InputError("segmentation: n must be positive");
  if (levels.size() != change_points.size() + 1)
    throw InputError("segmentation: levels must have one more entry than change points");
  int prev = 0;
  for (int p : change_points) {
    if (p < 1 || p > n - 1)
      throw InputError("segmentation: change point " + std::to_string(p) + " out of range");
    if (p <= prev)
      throw InputError("segmentation: change points must be strictly increasing");
    prev = p;
  }
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (!std::isfinite(levels[k])) throw InputError("segmentation: level not finite");
    if (k > 0 && levels[k] == levels[k - 1])
      throw InputError("segmentation: zero jump stored at change point " +
                       std::to_string(change_points[k - 1]));
  }
  if (!(lambda >= 0.0)) throw InputError("segmentation: lambda must be nonnegative");
}

std::vector<int> StepModel::jump_signs() const {
  std::vector<int> s(change_points.size());
  for (std::size_t k = 0; k < change_points.size(); ++k)
    s[k] = sign_of(levels[k + 1] - levels[k]);
  return s;
}

void StepModel::check() const {
  Segmentation tmp{n, change_points, levels, 0.0};
  tmp.check();
  if (!(noise_sd >= 0.0)) throw InputError("step model: noise sd must be nonnegative");
}

namespace {

std::vector<double> expand_impl(int n, const std::vector<int>& cps,
                                const std::vector<double>& levels) {
  std::vector<double> out(static_cast<std::size_t>(n));
  std::size_t seg = 0;
  for (int t = 0; t < n; ++t) {
    if (seg < cps.size() && t == cps[seg]) ++seg;
    out[static_cast<std::size_t>(t)] = levels[seg];
  }
  return out;
}

}  // namespace

std::vector<double> expand(const Segmentation& seg) {
  seg.check();
  return expand_impl(seg.n, seg.change_points, seg.levels);
}

std::vector<double> expand(const StepModel& model) {
  model.check();
  return expand_impl(model.n, model.change_points, model.levels);
}

Segmentation compress(const std::vector<double>& step_values, double lambda) {
  if (step_values.empty()) throw InputError("compress: empty sequence");
  Segmentation seg;
  seg.n = static_cast<int>(step_values.size());
  seg.lambda = lambda;
  seg.levels.push_back(step_values[0]);
  for (int t = 1; t < seg.n; ++t) {
    double v = step_values[static_cast<std::size_t>(t)];
    if (v != seg.levels.back()) {
      seg.change_points.push_back(t);
      seg.levels.push_back(v);
    }
  }
  seg.check();
  return seg;
}

double set_distance(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  std::vector<int> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  auto directed = [](const std::vector<int>& from, const std::vector<int>& to) {
    int worst = 0;
    for (int x : from) {
      auto it = std::lower_bound(to.begin(), to.end(), x);
      int best = std::numeric_limits<int>::max();
      if (it != to.end()) best = std::min(best, std::abs(*it - x));
      if (it != to.begin()) best = std::min(best, std::abs(*(it - 1) - x));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return static_cast<double>(std::max(directed(sa, sb), directed(sb, sa)));
}

bool eps_sign_consistent(const Segmentation& est, const StepModel& truth,
                         double eps) {
  if (est.n != truth.n)
    throw InputError("eps_sign_consistent: estimate and truth lengths differ");
  if (!(eps > 0.0 && eps < 1.0))
    throw InputError("eps_sign_consistent: eps must lie in (0,1)");
  double window = eps * static_cast<double>(truth.n);
  if (!(set_distance(est.change_points, truth.change_points) < window))
    return false;
  std::vector<int> est_signs = est.jump_signs();
  std::vector<int> true_signs = truth.jump_signs();
  for (std::size_t i = 0; i < truth.change_points.size(); ++i) {
    bool matched = false;
    for (std::size_t k = 0; k < est.change_points.size(); ++k) {
      if (std::abs(est.change_points[k] - truth.change_points[i]) < window &&
          est_signs[k] == true_signs[i]) {
        matched = true;
        break;
      }
    }
    if (!matched) return false;
  }
  return true;
}

}  // namespace flsa
