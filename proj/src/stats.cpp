#include "cocreate/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "cocreate/error.hpp"

namespace cocreate::stats {

DiversityReport diversity(const std::vector<std::vector<double>>& vectors) {
  const std::size_t n = vectors.size();
  if (n < 2) throw InsufficientItems("diversity needs at least two items, got " + std::to_string(n));
  const std::size_t dim = vectors.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    if (vectors[i].size() != dim) throw RangeError("embedding dimensions differ");
    const double norm = std::sqrt(std::inner_product(vectors[i].begin(), vectors[i].end(),
                                                     vectors[i].begin(), 0.0));
    if (!(std::abs(norm - 1.0) <= 1e-6)) {
      throw NormalizationError("vector " + std::to_string(i) + " has norm " + std::to_string(norm));
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      total += 1.0 - std::inner_product(vectors[i].begin(), vectors[i].end(), vectors[j].begin(), 0.0);
    }
  }
  const std::size_t pairs = n * (n - 1) / 2;
  return DiversityReport{n, total / static_cast<double>(pairs), pairs};
}

const char* to_string(WilcoxonMethod m) {
  return m == WilcoxonMethod::ExactEnumeration ? "exact" : "normal";
}

std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw RangeError("paired samples differ in length");
  if (a.empty()) throw InsufficientItems("paired samples are empty");

  std::vector<double> abs_diff;
  std::vector<bool> positive;
  WilcoxonResult result;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d == 0.0) {
      ++result.zeros_dropped;
      continue;
    }
    abs_diff.push_back(std::abs(d));
    positive.push_back(d > 0.0);
  }
  const std::size_t n = abs_diff.size();
  if (n == 0) throw DegenerateSample("all paired differences are zero");
  result.n_nonzero = n;

  const auto ranks = midranks(abs_diff);
  // Midranks are multiples of 1/2, so doubled ranks are exact integers.
  std::vector<std::uint32_t> doubled(n);
  std::uint64_t observed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    doubled[i] = static_cast<std::uint32_t>(std::lround(ranks[i] * 2.0));
    if (positive[i]) {
      observed += doubled[i];
      result.w_plus += ranks[i];
    }
  }

  if (n <= kExactLimit) {
    result.method = WilcoxonMethod::ExactEnumeration;
    const std::uint64_t total = n * (n + 1);  // sum of doubled ranks
    // counts[t] = number of sign assignments whose doubled W+ equals t.
    std::vector<std::uint64_t> counts(total + 1, 0);
    counts[0] = 1;
    std::uint64_t reach = 0;
    for (const auto r : doubled) {
      for (std::uint64_t t = reach + 1; t-- > 0;) {
        if (counts[t] != 0) counts[t + r] += counts[t];
      }
      reach += r;
    }
    const std::int64_t centre = static_cast<std::int64_t>(total / 2);
    const std::int64_t observed_dev = std::llabs(static_cast<std::int64_t>(observed) - centre);
    std::uint64_t extreme = 0;
    for (std::uint64_t t = 0; t <= total; ++t) {
      if (std::llabs(static_cast<std::int64_t>(t) - centre) >= observed_dev) extreme += counts[t];
    }
    result.p_two_sided = static_cast<double>(extreme) / std::ldexp(1.0, static_cast<int>(n));
  } else {
    result.method = WilcoxonMethod::NormalApprox;
    const double nn = static_cast<double>(n);
    const double expected = nn * (nn + 1.0) / 4.0;
    double tie_term = 0.0;
    std::vector<double> sorted = abs_diff;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j < n && sorted[j] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i);
      tie_term += t * t * t - t;
      i = j;
    }
    const double variance = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double dev = std::abs(result.w_plus - expected) - 0.5;
    result.p_two_sided = dev <= 0.0 ? 1.0 : std::erfc(dev / std::sqrt(variance) / std::sqrt(2.0));
  }
  result.p_two_sided = std::min(1.0, result.p_two_sided);
  return result;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) throw InsufficientItems("mean of an empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace cocreate::stats
