#pragma once

#include <string>
#include <vector>

#include "sbp/bgan.hpp"
#include "sbp/classic.hpp"
#include "sbp/dataset.hpp"

namespace sbp {

enum class CorrectorKind { Identity, PosteriorDivide, ResistanceSubtract, Sbp };

std::string to_string(CorrectorKind k);
CorrectorKind corrector_kind_from_string(const std::string& s);

struct Corrector {
  CorrectorKind kind = CorrectorKind::Identity;
  Vec class_freq;              // posterior_divide
  Vec b_res;                   // resistance_subtract
  const Generator* gen = nullptr;  // sbp (non-owning)
  Vec b_glo;                   // sbp

  static Corrector identity();
  static Corrector posterior_divide(Vec class_freq);
  static Corrector resistance_subtract(Vec b_res);
  static Corrector sbp(const Generator* gen, Vec b_glo);
};

Vec correct(const Corrector& c, const Vec& z, const Vec& ctx);

// One group = the samples of one synthetic "image": (corrected logits, label).
using GroupedEval = std::vector<std::vector<std::pair<Vec, std::size_t>>>;

struct RecallResult {
  double r_at_k = 0.0;
  Vec per_class_recall;            // 0 for absent classes; see class_present
  std::vector<bool> class_present;
};

// Within each group, predictions are ranked by max softmax confidence
// (ties: lower sample index). A ground truth is recalled iff its sample is in
// the top-K ranks and predicted correctly. Per-class recalls pool samples
// across groups.
RecallResult recall_at_k(const GroupedEval& groups, std::size_t k, std::size_t m);

// Unweighted mean over classes present in the test set; absent classes are
// excluded with a warning on stderr.
double mean_recall_at_k(const Vec& per_class_recall, const std::vector<bool>& present);

double average_at_k(double r, double mr);

// Macro top-t accuracy: per class, the fraction of samples whose label ranks
// within the top_t corrected logits; unweighted mean over present classes.
double f_acc(const std::vector<Vec>& corrected_logits,
             const std::vector<std::size_t>& labels, std::size_t top_t, std::size_t m);

struct MetricsReport {
  std::vector<std::size_t> k_values;
  Vec r_at_k, mr_at_k, a_at_k;                  // one entry per K
  std::vector<Vec> per_class_recall;            // per K
  std::vector<std::vector<bool>> class_present; // per K (K-independent in fact)
  std::vector<std::size_t> top_t_values;
  Vec f_acc_values;                             // one entry per top_t
};

MetricsReport evaluate(const Corrector& corrector, const ClassicModel& model,
                       const std::vector<Sample>& test, std::size_t group_size,
                       const std::vector<std::size_t>& k_values,
                       const std::vector<std::size_t>& top_t_values);

// Report emission: machine CSVs and an aligned-column text summary.
std::string report_csv(const std::vector<std::pair<std::string, MetricsReport>>& reports);
std::string facc_csv(const std::vector<std::pair<std::string, MetricsReport>>& reports);
std::string per_class_csv(const std::vector<std::pair<std::string, MetricsReport>>& reports);
std::string report_text(const std::vector<std::pair<std::string, MetricsReport>>& reports);

}  // namespace sbp
