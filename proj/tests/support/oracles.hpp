#pragma once
// Brute-force reference implementations. Written independently of the
// library: plain loops over std::vector, no shared helpers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <vector>

namespace oracle {

using Rows = std::vector<std::vector<double>>;

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
  if (na == 0 || nb == 0) return 0;
  return dot(a, b) / (na * nb);
}

// -sum_n log( exp(s_nn) / sum_{m in D(n)} exp(s_nm) ), s = cos / tau.
inline double info_nce(const Rows& z1, const Rows& z2, double tau, bool include_positive) {
  const std::size_t n = z1.size();
  double loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = cosine(z1[i], z2[i]) / tau;
    double denom = 0;
    for (std::size_t m = 0; m < n; ++m) {
      if (m == i && !include_positive) continue;
      denom += std::exp(cosine(z1[i], z2[m]) / tau);
    }
    loss -= pos - std::log(denom);
  }
  return loss;
}

inline double recall(const std::vector<std::uint32_t>& ranked, const std::set<std::uint32_t>& relevant,
                     std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t p = 0; p < ranked.size() && p < k; ++p) hits += relevant.count(ranked[p]);
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

inline double ndcg(const std::vector<std::uint32_t>& ranked, const std::set<std::uint32_t>& relevant,
                   std::size_t k) {
  double dcg = 0, idcg = 0;
  for (std::size_t p = 1; p <= ranked.size() && p <= k; ++p)
    if (relevant.count(ranked[p - 1])) dcg += 1.0 / std::log2(static_cast<double>(p) + 1);
  for (std::size_t p = 1; p <= std::min(k, relevant.size()); ++p)
    idcg += 1.0 / std::log2(static_cast<double>(p) + 1);
  return dcg / idcg;
}

inline double transe(const std::vector<double>& h, const std::vector<double>& r, const std::vector<double>& t) {
  double s = 0;
  for (std::size_t k = 0; k < h.size(); ++k) s += std::fabs(h[k] + r[k] - t[k]);
  return s;
}

inline double phi(double freq, double max_freq) {
  if (max_freq == 0) return 0;
  return std::log(1 + freq) / std::log(1 + max_freq);
}

inline double sigmoid(double x) { return 1 / (1 + std::exp(-x)); }

inline double gate(const std::vector<double>& x_id, const std::vector<double>& x_llm, double ph,
                   const std::vector<double>& w, double b) {
  double z = b;
  std::size_t k = 0;
  for (double v : x_id) z += w[k++] * v;
  for (double v : x_llm) z += w[k++] * v;
  z += w[k] * ph;
  return sigmoid(z);
}

// Normalized fused score and its normalizer.
inline double fused_score(double s_id, double s_llm, double gu, double gi, double* alpha = nullptr) {
  const double a = gu * gi + (1 - gu) * (1 - gi);
  if (alpha) *alpha = a;
  return (gu * gi * s_id + (1 - gu) * (1 - gi) * s_llm) / a;
}

// Full sort with (score desc, id asc) after dropping excluded ids.
inline std::vector<std::uint32_t> rank(const std::vector<double>& scores, const std::set<std::uint32_t>& excluded) {
  std::vector<std::uint32_t> ids;
  for (std::uint32_t i = 0; i < scores.size(); ++i)
    if (!excluded.count(i)) ids.push_back(i);
  std::stable_sort(ids.begin(), ids.end(), [&](std::uint32_t a, std::uint32_t b) { return scores[a] > scores[b]; });
  return ids;
}

inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j] < x[i]) less += 1;
      if (x[j] == x[i]) equal += 1;
    }
    r[i] = less + (equal + 1) / 2;
  }
  return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace oracle
