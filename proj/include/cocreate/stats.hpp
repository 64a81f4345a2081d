#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cocreate::stats {

struct DiversityReport {
  std::size_t n = 0;
  double score = 0.0;  // mean pairwise cosine distance, in [0, 2]
  std::size_t pair_count = 0;
};

// Mean of (1 - <v_i, v_j>) over all i < j. Inputs must be unit vectors
// (within 1e-6) of equal dimension.
DiversityReport diversity(const std::vector<std::vector<double>>& vectors);

enum class WilcoxonMethod { ExactEnumeration, NormalApprox };

const char* to_string(WilcoxonMethod m);

struct WilcoxonResult {
  std::size_t n_nonzero = 0;
  std::size_t zeros_dropped = 0;
  double w_plus = 0.0;
  double p_two_sided = 1.0;
  WilcoxonMethod method = WilcoxonMethod::ExactEnumeration;
};

inline constexpr std::size_t kExactLimit = 20;

// Paired signed-rank test on d = a - b. Zero differences are dropped, tied
// |d| share midranks. The two-sided p is the share of the 2^n equally
// likely sign assignments whose |W+ - n(n+1)/4| is at least the observed
// one; above kExactLimit pairs a tie-corrected normal approximation with
// continuity correction is used instead.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

// Midranks (1-based) of `values`, ties averaged.
std::vector<double> midranks(std::span<const double> values);

double mean(std::span<const double> xs);
double sample_sd(std::span<const double> xs);

}  // namespace cocreate::stats
