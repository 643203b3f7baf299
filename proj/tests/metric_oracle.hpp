#pragma once

// Naive enumeration oracle for the ranking metrics, independent of the library
// implementation: ranks are found by pairwise counting instead of sorting.

#include <cstddef>
#include <vector>

#include "sbp/metrics.hpp"
#include "sbp/nn.hpp"

namespace oracle {

struct Result {
  double r_at_k;
  sbp::Vec per_class_recall;
  std::vector<bool> present;
};

inline Result recall_at_k(const sbp::GroupedEval& groups, std::size_t k, std::size_t m) {
  Result res;
  res.per_class_recall.assign(m, 0.0);
  res.present.assign(m, false);
  std::vector<std::size_t> hits(m, 0), totals(m, 0);
  double group_sum = 0.0;
  for (const auto& g : groups) {
    // confidence and prediction recomputed from scratch
    std::vector<double> conf(g.size());
    std::vector<std::size_t> pred(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      sbp::Vec p = sbp::softmax(g[i].first);
      std::size_t best = 0;
      for (std::size_t c = 1; c < p.size(); ++c)
        if (p[c] > p[best]) best = c;
      conf[i] = p[best];
      pred[i] = best;
    }
    std::size_t recalled = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      // rank = 1 + #{j beating i} with ties going to the lower index
      std::size_t rank = 1;
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (j == i) continue;
        if (conf[j] > conf[i] || (conf[j] == conf[i] && j < i)) ++rank;
      }
      bool in_top_k = rank <= k;
      bool correct = pred[i] == g[i].second;
      if (in_top_k && correct) {
        ++recalled;
        ++hits[g[i].second];
      }
      ++totals[g[i].second];
    }
    group_sum += static_cast<double>(recalled) / static_cast<double>(g.size());
  }
  res.r_at_k = groups.empty() ? 0.0 : group_sum / static_cast<double>(groups.size());
  for (std::size_t c = 0; c < m; ++c)
    if (totals[c] > 0) {
      res.present[c] = true;
      res.per_class_recall[c] =
          static_cast<double>(hits[c]) / static_cast<double>(totals[c]);
    }
  return res;
}

inline double mean_recall(const Result& r) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < r.per_class_recall.size(); ++c)
    if (r.present[c]) {
      sum += r.per_class_recall[c];
      ++n;
    }
  return sum / static_cast<double>(n);
}

inline double f_acc(const std::vector<sbp::Vec>& logits,
                    const std::vector<std::size_t>& labels, std::size_t top_t,
                    std::size_t m) {
  std::vector<std::size_t> hits(m, 0), totals(m, 0);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const sbp::Vec& z = logits[i];
    std::size_t label = labels[i];
    std::size_t beaten_by = 0;
    for (std::size_t c = 0; c < z.size(); ++c)
      if (z[c] > z[label] || (z[c] == z[label] && c < label)) ++beaten_by;
    if (beaten_by < top_t) ++hits[label];
    ++totals[label];
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < m; ++c)
    if (totals[c] > 0) {
      sum += static_cast<double>(hits[c]) / static_cast<double>(totals[c]);
      ++n;
    }
  return sum / static_cast<double>(n);
}

}  // namespace oracle
