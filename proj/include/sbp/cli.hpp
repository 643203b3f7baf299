#pragma once

#include <string>
#include <vector>

namespace sbp {

// Entry point shared by the sbp binary and the integration tests. Exit codes:
// 0 success, 1 usage or config error, 2 contract or invariant violation,
// 3 training divergence.
int run_cli(const std::vector<std::string>& args);

// Conventional file names inside the run's output directory.
namespace files {
inline constexpr const char* kDataset = "dataset.json";
inline constexpr const char* kClassicCheckpoint = "classic.json";
inline constexpr const char* kBganCheckpoint = "bgan.json";
inline constexpr const char* kClassicTrace = "classic_loss.csv";
inline constexpr const char* kBganTrace = "bgan_loss.csv";
inline constexpr const char* kReportCsv = "report.csv";
inline constexpr const char* kFaccCsv = "facc.csv";
inline constexpr const char* kPerClassCsv = "per_class.csv";
inline constexpr const char* kReportTxt = "report.txt";
inline constexpr const char* kSummaryCsv = "summary.csv";
inline constexpr const char* kSummaryTxt = "summary.txt";
}  // namespace files

}  // namespace sbp
