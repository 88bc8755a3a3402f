#pragma once

#include "forgetd/data.hpp"
#include "forgetd/ledger.hpp"
#include "forgetd/nn.hpp"

#include <map>
#include <string>
#include <vector>

namespace forgetd {

struct TrajectoryPoint {
    std::size_t epoch = 0;
    double targeted_acc = 0.0;
    double retained_acc = 0.0;
};

struct SweepRow {
    double fraction = 0.0;      // requested affected-batch fraction
    double affected_pct = 0.0;  // realized |B_t| / (E*B)
    std::string method;
    double retained_acc = 0.0;
};

struct MetricsReport {
    std::map<std::string, std::string> config;  // flat dotted keys plus "fingerprint"
    double before_targeted = 0.0;
    double before_retained = 0.0;
    double after_targeted = 0.0;
    double after_retained = 0.0;
    std::map<std::uint32_t, double> per_class;
    std::vector<TrajectoryPoint> trajectory;
    std::uint64_t ledger_bytes_full = 0;
    std::uint64_t ledger_bytes_pruned = 0;
    std::vector<SweepRow> sweep;
};

// Fractions are rounded to 6 decimal places when a report is built, so a
// report parsed back from disk compares equal to the one emitted.
double round6(double x);

double accuracy(const ModelParams& w, const Dataset& ds);
std::map<std::uint32_t, double> per_class_accuracy(const ModelParams& w, const Dataset& ds);

MetricsReport membership_inference_report(const ModelParams& w_before, const ModelParams& w_after,
                                          const SplitPair& split,
                                          const std::vector<TrajectoryPoint>& trajectory,
                                          const Ledger* ledger_full = nullptr,
                                          const Ledger* ledger_pruned = nullptr);

enum class ReportFormat { json, csv };
void emit_report(const MetricsReport& report, const std::string& path, ReportFormat format);
MetricsReport parse_report(const std::string& path);

void emit_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace forgetd
