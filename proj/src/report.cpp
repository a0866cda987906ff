#include "tsfactor/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "tsfactor/errors.hpp"

namespace tsf {

RunReport build_report(std::string algo, std::size_t rows, std::size_t cols,
                       const RunConfig& config, const std::vector<StageMetrics>& stages,
                       std::int64_t wall_time_ns) {
    RunReport report;
    report.algo = std::move(algo);
    report.rows = rows;
    report.cols = cols;
    report.config = config;
    report.wall_time_ns = wall_time_ns;
    report.stages.reserve(stages.size());

    for (const StageMetrics& s : stages) {
        StageSummary summary;
        summary.stage_id = s.stage_id;
        summary.tasks = s.tasks.size();
        for (const TaskBins& b : s.bins) {
            summary.sum_bins.task_start_delay += b.task_start_delay;
            summary.sum_bins.scheduler_delay += b.scheduler_delay;
            summary.sum_bins.task_overhead += b.task_overhead;
            summary.sum_bins.compute_time += b.compute_time;
            summary.sum_bins.wait_until_stage_end += b.wait_until_stage_end;
        }
        const double nt = summary.tasks > 0 ? static_cast<double>(summary.tasks) : 1.0;
        summary.mean_bins.task_start_delay = summary.sum_bins.task_start_delay / nt;
        summary.mean_bins.scheduler_delay = summary.sum_bins.scheduler_delay / nt;
        summary.mean_bins.task_overhead = summary.sum_bins.task_overhead / nt;
        summary.mean_bins.compute_time = summary.sum_bins.compute_time / nt;
        summary.mean_bins.wait_until_stage_end = summary.sum_bins.wait_until_stage_end / nt;

        report.aggregate.task_start_delay += summary.mean_bins.task_start_delay;
        report.aggregate.scheduler_delay += summary.mean_bins.scheduler_delay;
        report.aggregate.task_overhead += summary.mean_bins.task_overhead;
        report.aggregate.compute_time += summary.mean_bins.compute_time;
        report.aggregate.wait_until_stage_end += summary.mean_bins.wait_until_stage_end;
        report.stages.push_back(summary);
    }
    return report;
}

double predict_scheduler_delay(std::size_t partitions, std::size_t iterations, double rate) {
    if (!(rate > 0.0)) throw ConfigError("predict_scheduler_delay: rate must be > 0");
    return static_cast<double>(partitions) * static_cast<double>(iterations) / rate;
}

std::vector<double> parallel_efficiency(std::span<const double> times,
                                        std::span<const std::size_t> nodes) {
    if (times.size() != nodes.size() || times.empty()) {
        throw DimensionError("parallel_efficiency: times and nodes must have equal length >= 1");
    }
    for (double t : times) {
        if (!(t > 0.0)) throw DataError("parallel_efficiency: times must be positive");
    }
    std::size_t base = 0;
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        if (nodes[i] < nodes[base]) base = i;
    }
    const double ref = times[base] * static_cast<double>(nodes[base]);
    std::vector<double> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        out[i] = ref / (times[i] * static_cast<double>(nodes[i]));
    }
    return out;
}

double gap(double time_a, double time_b) {
    if (!(time_b > 0.0)) throw DataError("gap: denominator must be > 0");
    return time_a / time_b;
}

std::string format_gap(double ratio) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2g", ratio);
    return std::string(buf) + "x";
}

namespace {

nlohmann::ordered_json bins_to_json(const BinSummary& b) {
    nlohmann::ordered_json j;
    j["task_start_delay"] = b.task_start_delay;
    j["scheduler_delay"] = b.scheduler_delay;
    j["task_overhead"] = b.task_overhead;
    j["compute_time"] = b.compute_time;
    j["wait_until_stage_end"] = b.wait_until_stage_end;
    return j;
}

BinSummary bins_from_json(const nlohmann::json& j) {
    BinSummary b;
    b.task_start_delay = j.at("task_start_delay").get<double>();
    b.scheduler_delay = j.at("scheduler_delay").get<double>();
    b.task_overhead = j.at("task_overhead").get<double>();
    b.compute_time = j.at("compute_time").get<double>();
    b.wait_until_stage_end = j.at("wait_until_stage_end").get<double>();
    return b;
}

}  // namespace

std::string emit_report_json(const RunReport& report) {
    nlohmann::ordered_json j;
    j["version"] = 1;
    j["algo"] = report.algo;
    j["matrix"]["rows"] = report.rows;
    j["matrix"]["cols"] = report.cols;
    j["config"]["executors"] = report.config.executors;
    j["config"]["slots_per_executor"] = report.config.slots_per_executor;
    j["config"]["partitions"] = report.config.partitions;
    j["config"]["tree_fanout"] = report.config.tree_fanout;
    j["config"]["seed"] = report.config.seed;
    if (report.config.delay) {
        j["config"]["delay"]["dispatch_latency_ns"] = report.config.delay->dispatch_latency_ns;
        j["config"]["delay"]["straggler_prob"] = report.config.delay->straggler_prob;
        j["config"]["delay"]["straggler_duration_ns"] =
            report.config.delay->straggler_duration_ns;
    } else {
        j["config"]["delay"] = nullptr;
    }
    j["stages"] = nlohmann::ordered_json::array();
    for (const StageSummary& s : report.stages) {
        nlohmann::ordered_json js;
        js["stage_id"] = s.stage_id;
        js["tasks"] = s.tasks;
        js["mean_bins_ns"] = bins_to_json(s.mean_bins);
        js["sum_bins_ns"]["task_start_delay"] = s.sum_bins.task_start_delay;
        js["sum_bins_ns"]["scheduler_delay"] = s.sum_bins.scheduler_delay;
        js["sum_bins_ns"]["task_overhead"] = s.sum_bins.task_overhead;
        js["sum_bins_ns"]["compute_time"] = s.sum_bins.compute_time;
        js["sum_bins_ns"]["wait_until_stage_end"] = s.sum_bins.wait_until_stage_end;
        j["stages"].push_back(js);
    }
    j["aggregate_bins_ns"] = bins_to_json(report.aggregate);
    j["wall_time_ns"] = report.wall_time_ns;
    return j.dump(2) + "\n";
}

std::string emit_report_csv(const RunReport& report) {
    std::ostringstream out;
    out << "stage_id,tasks,task_start_delay_ns,scheduler_delay_ns,task_overhead_ns,"
           "compute_time_ns,wait_until_stage_end_ns\n";
    char buf[64];
    for (const StageSummary& s : report.stages) {
        out << s.stage_id << ',' << s.tasks;
        const double bins[5] = {s.mean_bins.task_start_delay, s.mean_bins.scheduler_delay,
                                s.mean_bins.task_overhead, s.mean_bins.compute_time,
                                s.mean_bins.wait_until_stage_end};
        for (double b : bins) {
            std::snprintf(buf, sizeof(buf), "%.17g", b);
            out << ',' << buf;
        }
        out << '\n';
    }
    return out.str();
}

RunReport parse_report_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("report parse failed: ") + e.what());
    }
    RunReport report;
    try {
        report.algo = j.at("algo").get<std::string>();
        report.rows = j.at("matrix").at("rows").get<std::size_t>();
        report.cols = j.at("matrix").at("cols").get<std::size_t>();
        const auto& c = j.at("config");
        report.config.executors = c.at("executors").get<std::size_t>();
        report.config.slots_per_executor = c.at("slots_per_executor").get<std::size_t>();
        report.config.partitions = c.at("partitions").get<std::size_t>();
        report.config.tree_fanout = c.at("tree_fanout").get<std::size_t>();
        report.config.seed = c.at("seed").get<std::uint64_t>();
        if (!c.at("delay").is_null()) {
            DelaySpec d;
            d.dispatch_latency_ns = c.at("delay").at("dispatch_latency_ns").get<std::int64_t>();
            d.straggler_prob = c.at("delay").at("straggler_prob").get<double>();
            d.straggler_duration_ns =
                c.at("delay").at("straggler_duration_ns").get<std::int64_t>();
            report.config.delay = d;
        }
        for (const auto& js : j.at("stages")) {
            StageSummary s;
            s.stage_id = js.at("stage_id").get<std::uint64_t>();
            s.tasks = js.at("tasks").get<std::size_t>();
            s.mean_bins = bins_from_json(js.at("mean_bins_ns"));
            const auto& sums = js.at("sum_bins_ns");
            s.sum_bins.task_start_delay = sums.at("task_start_delay").get<std::int64_t>();
            s.sum_bins.scheduler_delay = sums.at("scheduler_delay").get<std::int64_t>();
            s.sum_bins.task_overhead = sums.at("task_overhead").get<std::int64_t>();
            s.sum_bins.compute_time = sums.at("compute_time").get<std::int64_t>();
            s.sum_bins.wait_until_stage_end =
                sums.at("wait_until_stage_end").get<std::int64_t>();
            report.stages.push_back(s);
        }
        report.aggregate = bins_from_json(j.at("aggregate_bins_ns"));
        report.wall_time_ns = j.at("wall_time_ns").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("report schema mismatch: ") + e.what());
    }
    return report;
}

}  // namespace tsf
