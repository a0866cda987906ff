#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tsfactor/runtime.hpp"

namespace tsf {

/// Per-bin values in ns: either the mean over tasks of one stage, or the sum
/// over stages of those means (the figure-of-merit used for run breakdowns).
struct BinSummary {
    double task_start_delay = 0.0;
    double scheduler_delay = 0.0;
    double task_overhead = 0.0;
    double compute_time = 0.0;
    double wait_until_stage_end = 0.0;
};

struct StageSummary {
    std::uint64_t stage_id = 0;
    std::size_t tasks = 0;
    BinSummary mean_bins;       // arithmetic mean over the stage's tasks, ns
    TaskBins sum_bins;          // exact integer sums over tasks, ns
};

struct RunReport {
    std::string algo;
    std::size_t rows = 0;
    std::size_t cols = 0;
    RunConfig config;
    std::vector<StageSummary> stages;
    BinSummary aggregate;       // per bin: sum over stages of the stage mean
    std::int64_t wall_time_ns = 0;
};

RunReport build_report(std::string algo, std::size_t rows, std::size_t cols,
                       const RunConfig& config, const std::vector<StageMetrics>& stages,
                       std::int64_t wall_time_ns);

/// Centralized-scheduler delay model: partitions * iterations / rate, in
/// seconds. rate must be positive.
double predict_scheduler_delay(std::size_t partitions, std::size_t iterations, double rate);

/// E(n_i) = (T0 * n0) / (T_i * n_i) with (T0, n0) the smallest node count.
std::vector<double> parallel_efficiency(std::span<const double> times,
                                        std::span<const std::size_t> nodes);

/// Wall-time ratio between two implementations of the same run.
double gap(double time_a, double time_b);

/// Two-significant-figure display, e.g. "4.6x".
std::string format_gap(double ratio);

std::string emit_report_json(const RunReport& report);
std::string emit_report_csv(const RunReport& report);
RunReport parse_report_json(const std::string& text);

}  // namespace tsf
