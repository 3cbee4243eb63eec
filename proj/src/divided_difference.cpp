#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "moilab/error.hpp"
#include "moilab/funcmodel.hpp"

namespace moilab {

namespace {

constexpr int kMaxFactorial = 64;

const std::array<double, kMaxFactorial + 1>& factorials() {
  static const auto table = [] {
    std::array<double, kMaxFactorial + 1> t{};
    t[0] = 1.0;
    for (int i = 1; i <= kMaxFactorial; ++i) t[static_cast<std::size_t>(i)] = t[static_cast<std::size_t>(i) - 1] * i;
    return t;
  }();
  return table;
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Largest scaled span for which the truncated Taylor form of an order-m
// divided difference with derivatives up to `max_order` stays at roundoff.
double taylor_span_limit(int max_order, int m) {
  const int tail = max_order + 1 - m;
  if (tail <= 0) return 0.0;
  const double limit = 2.0 * std::pow(1e-16 / binomial(max_order + 1, m), 1.0 / tail);
  return std::min(limit, 0.5);
}

// Divided difference on the contiguous range z[0..m] (ascending, exact ties
// allowed) by Taylor expansion about the midpoint:
//   f[z] = sum_{k>=m} f^(k)(c)/k! * h_{k-m}(z - c),
// h_r the complete homogeneous symmetric polynomials.
cplx taylor_divided_difference(const FunctionFamily& f, std::span<const double> z) {
  const int m = static_cast<int>(z.size()) - 1;
  const int K = f.max_order();
  const double c = 0.5 * (z.front() + z.back());
  std::vector<cplx> d(static_cast<std::size_t>(K) + 1);
  f.derivatives(c, K, d);
  const int R = K - m;
  std::vector<double> h(static_cast<std::size_t>(R) + 1, 0.0);
  h[0] = 1.0;
  for (double zi : z) {
    const double y = zi - c;
    for (int r = 1; r <= R; ++r) h[static_cast<std::size_t>(r)] += y * h[static_cast<std::size_t>(r) - 1];
  }
  const auto& fact = factorials();
  cplx acc = 0.0;
  for (int r = R; r >= 0; --r) {
    acc += d[static_cast<std::size_t>(m + r)] / fact[static_cast<std::size_t>(m + r)] * h[static_cast<std::size_t>(r)];
  }
  return acc;
}

}  // namespace

double merge_tolerance(std::span<const double> nodes) {
  double m = 0.0;
  for (double x : nodes) m = std::max(m, std::abs(x));
  return 1e-7 * (1.0 + m);
}

MergedNodes merge_nodes(std::span<const double> nodes, double tol) {
  if (nodes.empty()) throw ContractViolation("node list must be nonempty");
  std::vector<double> sorted(nodes.begin(), nodes.end());
  std::sort(sorted.begin(), sorted.end());
  MergedNodes out;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= sorted.size(); ++i) {
    if (i == sorted.size() || sorted[i] - sorted[i - 1] > tol) {
      double sum = 0.0;
      for (std::size_t j = start; j < i; ++j) sum += sorted[j];
      const auto count = static_cast<int>(i - start);
      out.values.push_back(count == 1 ? sorted[start] : sum / count);
      out.multiplicity.push_back(count);
      start = i;
    }
  }
  return out;
}

cplx divided_difference(const FunctionFamily& f, std::span<const double> nodes) {
  if (nodes.empty()) throw ContractViolation("divided difference needs at least one node");
  const int n = static_cast<int>(nodes.size()) - 1;
  if (n > f.max_order()) {
    throw UnsupportedOrderError("divided difference of order " + std::to_string(n) +
                                " exceeds max_order " + std::to_string(f.max_order()) +
                                " of '" + f.id() + "'");
  }
  for (double x : nodes) {
    if (!std::isfinite(x) || !f.domain().contains(x)) {
      throw DomainError("node " + std::to_string(x) + " outside the domain of '" + f.id() + "'");
    }
  }

  const MergedNodes merged = merge_nodes(nodes, merge_tolerance(nodes));
  if (merged.values.size() == 1) {
    return f.eval(n, merged.values.front()) / factorials()[static_cast<std::size_t>(n)];
  }

  // expanded ascending node sequence with exact ties
  std::vector<double> z;
  z.reserve(nodes.size());
  for (std::size_t i = 0; i < merged.values.size(); ++i) {
    z.insert(z.end(), static_cast<std::size_t>(merged.multiplicity[i]), merged.values[i]);
  }

  // confluent derivative values at each distinct node, up to its multiplicity
  std::vector<std::vector<cplx>> derivs(merged.values.size());
  std::vector<std::size_t> group(z.size());
  for (std::size_t i = 0, pos = 0; i < merged.values.size(); ++i) {
    derivs[i].resize(static_cast<std::size_t>(merged.multiplicity[i]));
    f.derivatives(merged.values[i], merged.multiplicity[i] - 1, derivs[i]);
    for (int r = 0; r < merged.multiplicity[i]; ++r) group[pos++] = i;
  }

  const double scale = f.taylor_scale();
  const auto& fact = factorials();
  std::vector<cplx> level(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) level[i] = derivs[group[i]][0];
  for (int m = 1; m <= n; ++m) {
    const double limit = taylor_span_limit(f.max_order(), m);
    for (int i = 0; i + m <= n; ++i) {
      const auto lo = static_cast<std::size_t>(i);
      const auto hi = static_cast<std::size_t>(i + m);
      const double span = z[hi] - z[lo];
      if (span == 0.0) {
        level[lo] = derivs[group[lo]][static_cast<std::size_t>(m)] / fact[static_cast<std::size_t>(m)];
      } else if (span / scale <= limit) {
        level[lo] = taylor_divided_difference(f, std::span<const double>(z).subspan(lo, hi - lo + 1));
      } else {
        level[lo] = (level[lo + 1] - level[lo]) / span;
      }
    }
  }
  return level[0];
}

std::size_t Tensor::offset(std::span<const int> index) const {
  if (index.size() != shape.size()) throw DimensionMismatch("tensor index rank mismatch");
  std::size_t off = 0;
  for (std::size_t a = 0; a < shape.size(); ++a) {
    if (index[a] < 0 || index[a] >= shape[a]) throw DimensionMismatch("tensor index out of range");
    off = off * static_cast<std::size_t>(shape[a]) + static_cast<std::size_t>(index[a]);
  }
  return off;
}

Tensor divided_difference_tensor(const FunctionFamily& f, int order,
                                 const std::vector<std::vector<double>>& lists,
                                 std::size_t* evaluations) {
  if (order < 0 || lists.size() != static_cast<std::size_t>(order) + 1) {
    throw ContractViolation("divided_difference_tensor needs order+1 node lists");
  }
  if (order > f.max_order()) {
    throw UnsupportedOrderError("divided difference of order " + std::to_string(order) +
                                " exceeds max_order of '" + f.id() + "'");
  }
  Tensor t;
  std::size_t total = 1;
  for (const auto& l : lists) {
    if (l.empty()) throw ContractViolation("node lists must be nonempty");
    t.shape.push_back(static_cast<int>(l.size()));
    total *= l.size();
  }
  t.data.resize(total);

  std::map<std::vector<double>, cplx> memo;
  std::vector<int> idx(lists.size(), 0);
  std::vector<double> key(lists.size());
  for (std::size_t flat = 0; flat < total; ++flat) {
    for (std::size_t a = 0; a < lists.size(); ++a) key[a] = lists[a][static_cast<std::size_t>(idx[a])];
    std::sort(key.begin(), key.end());
    auto it = memo.find(key);
    if (it == memo.end()) it = memo.emplace(key, divided_difference(f, key)).first;
    t.data[flat] = it->second;
    for (std::size_t a = lists.size(); a-- > 0;) {
      if (++idx[a] < t.shape[a]) break;
      idx[a] = 0;
    }
  }
  if (evaluations) *evaluations = memo.size();
  return t;
}

}  // namespace moilab
