#pragma once

// Reference implementations used only by tests. Each one takes a different
// route from the library code it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

/// Dense Gaussian elimination with partial pivoting in long double.
inline std::vector<double> solve(std::vector<std::vector<long double>> a, std::vector<long double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    }
    if (a[pivot][col] == 0) throw std::runtime_error("oracle: singular system");
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const long double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<long double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    long double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return {x.begin(), x.end()};
}

struct Fit {
  std::vector<double> weights;
  double intercept = 0;
};

/// Least squares with an unpenalised intercept from the bordered normal
/// equations [n, 1'X; X'1, X'X + lambda I] [b; w] = [1'y; X'y].
inline Fit normal_equations(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                            double lambda = 0) {
  const std::size_t n = x.size();
  const std::size_t d = x.front().size();
  std::vector<std::vector<long double>> a(d + 1, std::vector<long double>(d + 1, 0));
  std::vector<long double> rhs(d + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<long double> row(d + 1);
    row[0] = 1;
    for (std::size_t j = 0; j < d; ++j) row[j + 1] = x[i][j];
    for (std::size_t p = 0; p <= d; ++p) {
      for (std::size_t q = 0; q <= d; ++q) a[p][q] += row[p] * row[q];
      rhs[p] += row[p] * y[i];
    }
  }
  for (std::size_t j = 1; j <= d; ++j) a[j][j] += lambda;
  const auto sol = solve(a, rhs);
  return {std::vector<double>(sol.begin() + 1, sol.end()), sol[0]};
}

/// Two-tailed Student-t tail by composite Simpson integration of the density
/// over [0, |t|].
inline double t_two_tailed_simpson(double t, int df, int intervals = 200000) {
  const double v = df;
  const double log_c = std::lgamma((v + 1) / 2) - std::lgamma(v / 2) - 0.5 * std::log(v * M_PI);
  auto density = [&](double x) { return std::exp(log_c - (v + 1) / 2 * std::log1p(x * x / v)); };
  const double b = std::fabs(t);
  if (b == 0) return 1.0;
  const double h = b / intervals;
  double s = density(0) + density(b);
  for (int i = 1; i < intervals; ++i) s += density(i * h) * (i % 2 == 1 ? 4 : 2);
  return 1.0 - 2.0 * (s * h / 3.0);
}

inline double loop_mae(const std::vector<double>& a, const std::vector<double>& b) {
  double total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::fabs(a[i] - b[i]);
  return total / static_cast<double>(a.size());
}

/// Pearson r from raw sums: (n Sxy - Sx Sy) / sqrt((n Sxx - Sx^2)(n Syy - Sy^2)).
inline double sums_pcc(const std::vector<double>& a, const std::vector<double>& b) {
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  const long double n = a.size();
  for (std::size_t i = 0; i < a.size(); ++i) {
    sx += a[i];
    sy += b[i];
    sxx += static_cast<long double>(a[i]) * a[i];
    syy += static_cast<long double>(b[i]) * b[i];
    sxy += static_cast<long double>(a[i]) * b[i];
  }
  return static_cast<double>((n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy)));
}

/// Permutation p value for |r|: share of label shuffles reaching the observed
/// magnitude, with the +1 correction.
inline double permutation_p(const std::vector<double>& a, std::vector<double> b, int draws, std::uint64_t seed) {
  const double observed = std::fabs(sums_pcc(a, b));
  std::mt19937_64 rng(seed);
  int hits = 0;
  for (int i = 0; i < draws; ++i) {
    std::shuffle(b.begin(), b.end(), rng);
    if (std::fabs(sums_pcc(a, b)) >= observed - 1e-12) ++hits;
  }
  return (hits + 1.0) / (draws + 1.0);
}

/// All segmentations of a code-point sequence where every piece is either a
/// single code point or a vocabulary entry. Pieces are listed as lengths.
inline void segmentations(const std::vector<std::string>& cps, const std::vector<std::string>& vocab, std::size_t at,
                          std::vector<std::size_t>& current, std::vector<std::vector<std::size_t>>& out) {
  if (at == cps.size()) {
    out.push_back(current);
    return;
  }
  for (std::size_t len = 1; at + len <= cps.size(); ++len) {
    std::string piece;
    for (std::size_t k = at; k < at + len; ++k) piece += cps[k];
    if (len > 1 && std::find(vocab.begin(), vocab.end(), piece) == vocab.end()) continue;
    current.push_back(len);
    segmentations(cps, vocab, at + len, current, out);
    current.pop_back();
  }
}

/// Forward maximum matching picks the lexicographically largest length
/// sequence among all valid segmentations.
inline std::vector<std::string> greedy_by_enumeration(const std::vector<std::string>& cps,
                                                      const std::vector<std::string>& vocab) {
  std::vector<std::vector<std::size_t>> all;
  std::vector<std::size_t> current;
  segmentations(cps, vocab, 0, current, all);
  const auto best = *std::max_element(all.begin(), all.end());
  std::vector<std::string> pieces;
  std::size_t at = 0;
  for (std::size_t len : best) {
    std::string piece;
    for (std::size_t k = at; k < at + len; ++k) piece += cps[k];
    pieces.push_back(piece);
    at += len;
  }
  return pieces;
}

}  // namespace oracle
