#include <algorithm>
#include <cmath>
#include <numeric>

#include "dtnarrate/analytics.hpp"

namespace dtnarrate::analytics {

namespace {

constexpr double kZeroTolerance = 1e-12;

}  // namespace

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ValidationError("paired samples differ in length");
  if (x.empty()) throw ValidationError("paired samples are empty");

  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw ValidationError("paired samples must be finite");
    const double diff = x[i] - y[i];
    if (std::abs(diff) > kZeroTolerance) d.push_back(diff);
  }
  WilcoxonResult out;
  out.n_used = d.size();
  if (d.empty()) {
    out.degenerate = true;
    out.exact = true;
    return out;
  }

  // Ranks by |d|, ties averaged. Doubled so every rank is an integer.
  const std::size_t m = d.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<long long> rank2(m);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < m;) {
    std::size_t j = i + 1;
    while (j < m && std::abs(d[order[j]]) - std::abs(d[order[i]]) <= kZeroTolerance) ++j;
    const auto t = static_cast<long long>(j - i);
    const long long r2 = static_cast<long long>(i + 1 + j);  // 2 * mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) rank2[order[k]] = r2;
    tie_term += static_cast<double>(t * t * t - t);
    i = j;
  }

  long long plus2 = 0, total2 = 0;
  for (std::size_t i = 0; i < m; ++i) {
    total2 += rank2[i];
    if (d[i] > 0) plus2 += rank2[i];
  }
  out.w_plus = plus2 / 2.0;
  out.w_minus = (total2 - plus2) / 2.0;
  out.statistic = std::min(out.w_plus, out.w_minus);

  if (m <= kMaxExactWilcoxon) {
    // count[s] = sign assignments whose doubled W+ equals s
    std::vector<double> count(static_cast<std::size_t>(total2) + 1, 0.0);
    count[0] = 1.0;
    long long reach = 0;
    for (std::size_t i = 0; i < m; ++i) {
      for (long long s = reach; s >= 0; --s) {
        if (count[static_cast<std::size_t>(s)] != 0.0) count[static_cast<std::size_t>(s + rank2[i])] += count[static_cast<std::size_t>(s)];
      }
      reach += rank2[i];
    }
    const long long observed = std::llabs(2 * plus2 - total2);
    double extreme = 0.0;
    for (long long s = 0; s <= total2; ++s) {
      if (std::llabs(2 * s - total2) >= observed) extreme += count[static_cast<std::size_t>(s)];
    }
    out.p_value = std::min(1.0, extreme / std::ldexp(1.0, static_cast<int>(m)));
    out.exact = true;
    return out;
  }

  const double n = static_cast<double>(m);
  const double mean = n * (n + 1) / 4.0;
  const double var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term / 48.0;
  const double z = std::max(0.0, std::abs(out.w_plus - mean) - 0.5) / std::sqrt(var);
  out.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return out;
}

Adjusted bonferroni(double p, std::size_t m, double alpha) {
  if (m < 1) throw ValidationError("Bonferroni correction needs at least one comparison");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("p-value must lie in [0, 1]");
  Adjusted a;
  a.p = std::min(1.0, p * static_cast<double>(m));
  a.significant = a.p <= alpha;
  return a;
}

}  // namespace dtnarrate::analytics
