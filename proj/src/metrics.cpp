#include "sbp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <sstream>

#include "sbp/errors.hpp"

namespace sbp {

std::string to_string(CorrectorKind k) {
  switch (k) {
    case CorrectorKind::Identity: return "identity";
    case CorrectorKind::PosteriorDivide: return "posterior_divide";
    case CorrectorKind::ResistanceSubtract: return "resistance_subtract";
    default: return "sbp";
  }
}

CorrectorKind corrector_kind_from_string(const std::string& s) {
  if (s == "identity") return CorrectorKind::Identity;
  if (s == "posterior_divide") return CorrectorKind::PosteriorDivide;
  if (s == "resistance_subtract") return CorrectorKind::ResistanceSubtract;
  if (s == "sbp") return CorrectorKind::Sbp;
  throw UsageError("unknown corrector '" + s + "'");
}

Corrector Corrector::identity() { return {}; }

Corrector Corrector::posterior_divide(Vec class_freq) {
  Corrector c;
  c.kind = CorrectorKind::PosteriorDivide;
  c.class_freq = std::move(class_freq);
  return c;
}

Corrector Corrector::resistance_subtract(Vec b_res) {
  Corrector c;
  c.kind = CorrectorKind::ResistanceSubtract;
  c.b_res = std::move(b_res);
  return c;
}

Corrector Corrector::sbp(const Generator* gen, Vec b_glo) {
  Corrector c;
  c.kind = CorrectorKind::Sbp;
  c.gen = gen;
  c.b_glo = std::move(b_glo);
  return c;
}

Vec correct(const Corrector& c, const Vec& z, const Vec& ctx) {
  switch (c.kind) {
    case CorrectorKind::Identity:
      return z;
    case CorrectorKind::PosteriorDivide: {
      if (c.class_freq.size() != z.size())
        throw ContractViolation("correct: class frequency length mismatch");
      Vec p = softmax(z);
      double total = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (c.class_freq[i] <= 0.0)
          throw ContractViolation("correct: zero class frequency in posterior_divide");
        p[i] /= c.class_freq[i];
        total += p[i];
      }
      Vec out(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) out[i] = std::log(p[i] / total);
      return out;
    }
    case CorrectorKind::ResistanceSubtract: {
      if (c.b_res.size() != z.size())
        throw ContractViolation("correct: resistance bias length mismatch");
      Vec out = z;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] -= c.b_res[i];
      return out;
    }
    default: {
      if (c.gen == nullptr) throw ContractViolation("correct: sbp corrector has no generator");
      Vec b_pre = c.gen->apply(ctx, c.b_glo, z);
      Vec out = z;
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += b_pre[i];
      return out;
    }
  }
}

namespace {

struct Scored {
  double confidence;
  std::size_t pred;
  std::size_t label;
};

Scored score_sample(const Vec& zc, std::size_t label) {
  Vec p = softmax(zc);
  std::size_t pred = argmax(p);
  return {p[pred], pred, label};
}

// Rank positions of a group by confidence descending, ties by lower index.
std::vector<std::size_t> rank_group(const std::vector<Scored>& group) {
  std::vector<std::size_t> order(group.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return group[a].confidence > group[b].confidence;
  });
  return order;
}

}  // namespace

RecallResult recall_at_k(const GroupedEval& groups, std::size_t k, std::size_t m) {
  if (k < 1) throw ContractViolation("recall_at_k: K must be >= 1");
  RecallResult res;
  res.per_class_recall.assign(m, 0.0);
  res.class_present.assign(m, false);
  std::vector<std::size_t> class_hits(m, 0), class_total(m, 0);

  double group_sum = 0.0;
  for (const auto& g : groups) {
    std::vector<Scored> scored;
    scored.reserve(g.size());
    for (const auto& [zc, label] : g) scored.push_back(score_sample(zc, label));
    std::vector<std::size_t> order = rank_group(scored);
    std::size_t recalled = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const Scored& s = scored[order[rank]];
      bool in_top_k = rank < k;
      bool correct_pred = s.pred == s.label;
      if (in_top_k && correct_pred) {
        ++recalled;
        ++class_hits[s.label];
      }
      ++class_total[s.label];
    }
    group_sum += static_cast<double>(recalled) / static_cast<double>(g.size());
  }
  res.r_at_k = groups.empty() ? 0.0 : group_sum / static_cast<double>(groups.size());
  for (std::size_t c = 0; c < m; ++c) {
    if (class_total[c] > 0) {
      res.class_present[c] = true;
      res.per_class_recall[c] =
          static_cast<double>(class_hits[c]) / static_cast<double>(class_total[c]);
    }
  }
  return res;
}

double mean_recall_at_k(const Vec& per_class_recall, const std::vector<bool>& present) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < per_class_recall.size(); ++c) {
    if (!present[c]) {
      std::cerr << "warning: class " << c << " absent from test set; excluded from mR@K\n";
      continue;
    }
    sum += per_class_recall[c];
    ++count;
  }
  if (count == 0) throw ContractViolation("mean_recall_at_k: no classes present");
  return sum / static_cast<double>(count);
}

double average_at_k(double r, double mr) { return (r + mr) / 2.0; }

double f_acc(const std::vector<Vec>& corrected_logits,
             const std::vector<std::size_t>& labels, std::size_t top_t, std::size_t m) {
  if (top_t < 1) throw ContractViolation("f_acc: top_t must be >= 1");
  if (corrected_logits.size() != labels.size())
    throw ContractViolation("f_acc: logits/label count mismatch");
  std::vector<std::size_t> hits(m, 0), total(m, 0);
  for (std::size_t i = 0; i < corrected_logits.size(); ++i) {
    const Vec& z = corrected_logits[i];
    std::size_t label = labels[i];
    // Rank of the label: classes strictly above it, plus equal-valued classes
    // with a lower index.
    std::size_t rank = 0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      if (z[c] > z[label] || (z[c] == z[label] && c < label)) ++rank;
    }
    if (rank < top_t) ++hits[label];
    ++total[label];
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < m; ++c) {
    if (total[c] == 0) continue;
    sum += static_cast<double>(hits[c]) / static_cast<double>(total[c]);
    ++count;
  }
  if (count == 0) throw ContractViolation("f_acc: no classes present");
  return sum / static_cast<double>(count);
}

MetricsReport evaluate(const Corrector& corrector, const ClassicModel& model,
                       const std::vector<Sample>& test, std::size_t group_size,
                       const std::vector<std::size_t>& k_values,
                       const std::vector<std::size_t>& top_t_values) {
  model.verify_checksum("evaluate");
  if (group_size == 0 || test.size() % group_size != 0)
    throw ContractViolation("evaluate: test size not divisible by group size");
  std::size_t m = model.m_classes();

  std::vector<Vec> corrected;
  std::vector<std::size_t> labels;
  corrected.reserve(test.size());
  labels.reserve(test.size());
  GroupedEval groups(test.size() / group_size);
  for (std::size_t i = 0; i < test.size(); ++i) {
    Vec z = model.logits(test[i].ctx);
    Vec zc = correct(corrector, z, test[i].ctx);
    require_finite(zc, "evaluate");
    groups[i / group_size].emplace_back(zc, test[i].label);
    corrected.push_back(std::move(zc));
    labels.push_back(test[i].label);
  }

  MetricsReport report;
  report.k_values = k_values;
  for (std::size_t k : k_values) {
    RecallResult rr = recall_at_k(groups, k, m);
    double mr = mean_recall_at_k(rr.per_class_recall, rr.class_present);
    report.r_at_k.push_back(rr.r_at_k);
    report.mr_at_k.push_back(mr);
    report.a_at_k.push_back(average_at_k(rr.r_at_k, mr));
    report.per_class_recall.push_back(std::move(rr.per_class_recall));
    report.class_present.push_back(std::move(rr.class_present));
  }
  report.top_t_values = top_t_values;
  for (std::size_t t : top_t_values)
    report.f_acc_values.push_back(f_acc(corrected, labels, t, m));
  return report;
}

namespace {

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string report_csv(const std::vector<std::pair<std::string, MetricsReport>>& reports) {
  std::ostringstream out;
  out << "corrector,k,r_at_k,mr_at_k,a_at_k\n";
  for (const auto& [name, rep] : reports)
    for (std::size_t i = 0; i < rep.k_values.size(); ++i)
      out << name << ',' << rep.k_values[i] << ',' << fmt_full(rep.r_at_k[i]) << ','
          << fmt_full(rep.mr_at_k[i]) << ',' << fmt_full(rep.a_at_k[i]) << '\n';
  return out.str();
}

std::string facc_csv(const std::vector<std::pair<std::string, MetricsReport>>& reports) {
  std::ostringstream out;
  out << "corrector,top_t,f_acc\n";
  for (const auto& [name, rep] : reports)
    for (std::size_t i = 0; i < rep.top_t_values.size(); ++i)
      out << name << ',' << rep.top_t_values[i] << ',' << fmt_full(rep.f_acc_values[i]) << '\n';
  return out.str();
}

std::string per_class_csv(const std::vector<std::pair<std::string, MetricsReport>>& reports) {
  std::ostringstream out;
  out << "corrector,k,class,recall,present\n";
  for (const auto& [name, rep] : reports)
    for (std::size_t i = 0; i < rep.k_values.size(); ++i)
      for (std::size_t c = 0; c < rep.per_class_recall[i].size(); ++c)
        out << name << ',' << rep.k_values[i] << ',' << c << ','
            << fmt_full(rep.per_class_recall[i][c]) << ','
            << (rep.class_present[i][c] ? 1 : 0) << '\n';
  return out.str();
}

std::string report_text(const std::vector<std::pair<std::string, MetricsReport>>& reports) {
  std::ostringstream out;
  if (reports.empty()) return "";
  const MetricsReport& first = reports.front().second;
  out << "corrector              ";
  for (std::size_t k : first.k_values) {
    out << " R@" << k << "     mR@" << k << "    A@" << k << "    ";
  }
  for (std::size_t t : first.top_t_values) out << " F-Acc(" << t << ")";
  out << '\n';
  for (const auto& [name, rep] : reports) {
    char namebuf[64];
    std::snprintf(namebuf, sizeof namebuf, "%-22s", name.c_str());
    out << namebuf;
    for (std::size_t i = 0; i < rep.k_values.size(); ++i)
      out << ' ' << fmt4(rep.r_at_k[i]) << ' ' << fmt4(rep.mr_at_k[i]) << ' '
          << fmt4(rep.a_at_k[i]) << ' ';
    for (std::size_t i = 0; i < rep.top_t_values.size(); ++i)
      out << "  " << fmt4(rep.f_acc_values[i]);
    out << '\n';
  }
  return out.str();
}

}  // namespace sbp
