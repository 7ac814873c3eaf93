#include "flsa/path.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "flsa/util.hpp"

namespace flsa {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Linked-list segment pool. Levels at a given lambda follow the closed form
//   level = sum/len + lambda * (right_sign - left_sign) / len,
// where the signs are those of the (frozen) boundary jumps, zero at the
// sequence ends. left_sign of a segment equals right_sign of its neighbor.
struct SegPool {
  std::vector<int> start, len;
  std::vector<double> sum;
  std::vector<int> prev, next;     // -1 at the ends
  std::vector<int> right_sign;     // 0 for the last segment
  std::vector<long> version;       // bumped on every merge touching the segment

  int left_sign(int i) const { return prev[i] < 0 ? 0 : right_sign[prev[i]]; }
  double slope(int i) const {
    return (right_sign[i] - left_sign(i)) / static_cast<double>(len[i]);
  }
  double level_at(int i, double lambda) const {
    return sum[i] / len[i] + lambda * slope(i);
  }
  // Lambda at which segment i meets its right neighbor. The level gap is
  // affine in lambda, so the meeting point is a ratio; parallel drift
  // (staircase interiors) and gaps that open with lambda never meet and
  // report +inf. A crossing computed just below `current` is rounding noise
  // from a chain merge and is clamped into the running event.
  double fuse_lambda(int i, double current) const {
    int j = next[i];
    double ds = slope(i) - slope(j);
    if (ds == 0.0) return kInf;
    double lam = (sum[j] / len[j] - sum[i] / len[i]) / ds;
    if (lam < current - 1e-9 * std::max(1.0, current)) return kInf;
    return std::max(lam, current);
  }
};

struct HeapEntry {
  double lambda;
  int left_id;
  long vl, vr;
  bool operator>(const HeapEntry& o) const {
    if (lambda != o.lambda) return lambda > o.lambda;
    return left_id > o.left_id;  // position order inside ties
  }
};

}  // namespace

LambdaPath trace_path(const Signal& y) {
  const int n = y.size();
  LambdaPath path;

  // Initial event: the data itself (exact-equality compression at lambda 0).
  Segmentation base = compress(y.values(), 0.0);
  path.events.push_back({0.0, base});
  int m = base.num_segments();
  if (m == 1) return path;

  SegPool pool;
  pool.start.resize(static_cast<std::size_t>(m));
  pool.len.resize(static_cast<std::size_t>(m));
  pool.sum.resize(static_cast<std::size_t>(m));
  pool.prev.resize(static_cast<std::size_t>(m));
  pool.next.resize(static_cast<std::size_t>(m));
  pool.right_sign.resize(static_cast<std::size_t>(m));
  pool.version.assign(static_cast<std::size_t>(m), 0);
  for (int k = 0; k < m; ++k) {
    int lo = (k == 0) ? 0 : base.change_points[static_cast<std::size_t>(k) - 1];
    int hi = (k == m - 1) ? n : base.change_points[static_cast<std::size_t>(k)];
    CompensatedSum s;
    for (int t = lo; t < hi; ++t) s.add(y[t]);
    pool.start[static_cast<std::size_t>(k)] = lo;
    pool.len[static_cast<std::size_t>(k)] = hi - lo;
    pool.sum[static_cast<std::size_t>(k)] = s.value();
    pool.prev[static_cast<std::size_t>(k)] = k - 1;
    pool.next[static_cast<std::size_t>(k)] = (k == m - 1) ? -1 : k + 1;
    pool.right_sign[static_cast<std::size_t>(k)] =
        (k == m - 1) ? 0 : base.jump_sign(k);
  }

  std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<HeapEntry>> heap;
  auto push_pair = [&](int i, double current) {
    int j = pool.next[static_cast<std::size_t>(i)];
    if (j < 0) return;
    double lam = pool.fuse_lambda(i, current);
    if (lam < kInf)
      heap.push({lam, i, pool.version[static_cast<std::size_t>(i)],
                 pool.version[static_cast<std::size_t>(j)]});
  };
  for (int k = 0; k < m - 1; ++k) push_pair(k, 0.0);

  int alive = m;
  double current = 0.0;
  auto entry_valid = [&](const HeapEntry& e) {
    int j = pool.next[static_cast<std::size_t>(e.left_id)];
    return j >= 0 && pool.version[static_cast<std::size_t>(e.left_id)] == e.vl &&
           pool.version[static_cast<std::size_t>(j)] == e.vr;
  };

  while (alive > 1) {
    // Find the next valid fusion.
    while (!heap.empty() && !entry_valid(heap.top())) heap.pop();
    if (heap.empty())
      throw CertificateError("trace_path: fusion queue exhausted before one segment");
    double event_lambda = heap.top().lambda;
    double tie = event_lambda + 1e-12 * std::max(1.0, event_lambda);
    current = event_lambda;

    // Process every fusion that lands inside this event, position order.
    for (;;) {
      while (!heap.empty() && !entry_valid(heap.top())) heap.pop();
      if (heap.empty() || heap.top().lambda > tie) break;
      HeapEntry e = heap.top();
      heap.pop();
      int i = e.left_id;
      int j = pool.next[static_cast<std::size_t>(i)];
      pool.sum[static_cast<std::size_t>(i)] += pool.sum[static_cast<std::size_t>(j)];
      pool.len[static_cast<std::size_t>(i)] += pool.len[static_cast<std::size_t>(j)];
      pool.right_sign[static_cast<std::size_t>(i)] =
          pool.right_sign[static_cast<std::size_t>(j)];
      pool.next[static_cast<std::size_t>(i)] = pool.next[static_cast<std::size_t>(j)];
      if (pool.next[static_cast<std::size_t>(i)] >= 0)
        pool.prev[static_cast<std::size_t>(pool.next[static_cast<std::size_t>(i)])] = i;
      pool.version[static_cast<std::size_t>(i)]++;
      pool.version[static_cast<std::size_t>(j)]++;
      --alive;
      if (pool.prev[static_cast<std::size_t>(i)] >= 0)
        push_pair(pool.prev[static_cast<std::size_t>(i)], current);
      push_pair(i, current);
    }

    // Snapshot the configuration that holds just above event_lambda.
    Segmentation seg;
    seg.n = n;
    seg.lambda = event_lambda;
    int first = 0;
    while (pool.prev[static_cast<std::size_t>(first)] >= 0)
      first = pool.prev[static_cast<std::size_t>(first)];
    for (int i = first; i >= 0; i = pool.next[static_cast<std::size_t>(i)]) {
      if (i != first) seg.change_points.push_back(pool.start[static_cast<std::size_t>(i)]);
      seg.levels.push_back(pool.level_at(i, event_lambda));
    }
    seg.check();
    path.events.push_back({event_lambda, seg});
  }
  return path;
}

NestingReport validate_nesting(const LambdaPath& path) {
  NestingReport rep;
  if (path.events.empty()) {
    rep.ok = false;
    rep.reason = "empty path";
    return rep;
  }
  for (std::size_t e = 1; e < path.events.size(); ++e) {
    const PathEvent& lo = path.events[e - 1];
    const PathEvent& hi = path.events[e];
    if (!(hi.lambda > lo.lambda)) {
      rep.ok = false;
      rep.event_index = static_cast<int>(e);
      rep.reason = "breakpoints not strictly increasing";
      return rep;
    }
    std::vector<int> lo_signs = lo.seg.jump_signs();
    std::vector<int> hi_signs = hi.seg.jump_signs();
    for (std::size_t k = 0; k < hi.seg.change_points.size(); ++k) {
      int p = hi.seg.change_points[k];
      auto it = std::lower_bound(lo.seg.change_points.begin(),
                                 lo.seg.change_points.end(), p);
      if (it == lo.seg.change_points.end() || *it != p) {
        rep.ok = false;
        rep.event_index = static_cast<int>(e);
        rep.position = p;
        rep.reason = "change point appears as lambda increases";
        return rep;
      }
      std::size_t idx = static_cast<std::size_t>(it - lo.seg.change_points.begin());
      if (lo_signs[idx] != hi_signs[k]) {
        rep.ok = false;
        rep.event_index = static_cast<int>(e);
        rep.position = p;
        rep.reason = "surviving jump changed sign";
        return rep;
      }
    }
  }
  return rep;
}

}  // namespace flsa
