#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "tsfactor/dense_matrix.hpp"
#include "tsfactor/errors.hpp"
#include "tsfactor/rng.hpp"

namespace tsf {

/// Optional per-task delay injection: a fixed latency paid by the driver
/// before each dispatch, and a seeded straggler lottery per task.
struct DelaySpec {
    std::int64_t dispatch_latency_ns = 0;
    double straggler_prob = 0.0;
    std::int64_t straggler_duration_ns = 0;

    bool straggler_hit(std::uint64_t seed, std::uint64_t stage_id, std::uint64_t task_id) const {
        if (straggler_prob <= 0.0 || straggler_duration_ns <= 0) return false;
        const std::uint64_t counter = (stage_id << 32) | (task_id & 0xffffffffull);
        return rng::uniform(seed, rng::kStragglerInjection, counter) < straggler_prob;
    }
};

struct RunConfig {
    std::size_t executors = 1;
    std::size_t slots_per_executor = 1;
    std::size_t partitions = 1;
    std::size_t tree_fanout = 2;
    std::uint64_t seed = 0;
    std::optional<DelaySpec> delay;

    std::size_t total_slots() const { return executors * slots_per_executor; }
};

/// One contiguous run of rows of the global matrix.
struct RowBlock {
    std::size_t row_offset = 0;
    DenseMatrix data;
};

/// Row-block-partitioned matrix. Blocks are immutable once constructed and
/// cover [0, global_rows) contiguously.
class DistMatrix {
public:
    DistMatrix() = default;
    DistMatrix(std::size_t global_rows, std::size_t cols, std::vector<RowBlock> blocks);

    std::size_t global_rows() const { return global_rows_; }
    std::size_t cols() const { return cols_; }
    const std::vector<RowBlock>& blocks() const { return blocks_; }

private:
    std::size_t global_rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<RowBlock> blocks_;
};

/// Splits M into near-equal row blocks (sizes differ by at most one row).
DistMatrix partition(const DenseMatrix& m, std::size_t partitions);

/// Concatenates the blocks back into one dense matrix, bitwise.
DenseMatrix gather(const DistMatrix& a);

/// Timestamps (monotonic clock, ns) for one task's life cycle, in
/// chronological order.
struct TaskRecord {
    std::uint64_t stage_id = 0;
    std::uint64_t task_id = 0;
    std::uint64_t partition_id = 0;
    std::int64_t t_stage_start = 0;
    std::int64_t t_task_sent = 0;
    std::int64_t t_exec_received = 0;
    std::int64_t t_deser_done = 0;
    std::int64_t t_compute_done = 0;
    std::int64_t t_result_ser_done = 0;
    std::int64_t t_driver_ack = 0;
};

/// The overhead bins one task's wall interval decomposes into. All ns.
struct TaskBins {
    std::int64_t task_start_delay = 0;
    std::int64_t scheduler_delay = 0;
    std::int64_t task_overhead = 0;
    std::int64_t compute_time = 0;
    std::int64_t wait_until_stage_end = 0;

    std::int64_t total() const {
        return task_start_delay + scheduler_delay + task_overhead + compute_time +
               wait_until_stage_end;
    }
};

/// Splits one task's interval into the overhead bins:
///   task_start_delay      = t_task_sent - t_stage_start
///   scheduler_delay       = (t_exec_received - t_task_sent)
///                         + (t_driver_ack - t_result_ser_done)
///   task_overhead         = (t_deser_done - t_exec_received)
///                         + (t_result_ser_done - t_compute_done)
///   compute_time          = t_compute_done - t_deser_done
///   wait_until_stage_end  = stage_end - t_driver_ack
/// Throws DataError on non-monotone timestamps.
TaskBins bin_task(const TaskRecord& rec, std::int64_t stage_end);

struct StageMetrics {
    std::uint64_t stage_id = 0;
    std::int64_t t_stage_start = 0;
    std::int64_t stage_end = 0;
    std::vector<TaskRecord> tasks;
    std::vector<TaskBins> bins;
};

/// One JSON object per task, one line each.
std::string metrics_to_jsonl(const std::vector<StageMetrics>& stages);

/// One row per task; columns are the bins in ns.
std::string metrics_to_csv(const std::vector<StageMetrics>& stages);

namespace detail {

/// Fixed-order combine tree over the partition results: consecutive groups of
/// `fanout` are folded left-to-right, level by level. Reduction order depends
/// only on the partition count, never on completion timing.
template <typename T, typename Combine>
T tree_combine(std::vector<T> level, std::size_t fanout, Combine&& combine) {
    while (level.size() > 1) {
        std::vector<T> next;
        next.reserve((level.size() + fanout - 1) / fanout);
        for (std::size_t i = 0; i < level.size(); i += fanout) {
            T acc = std::move(level[i]);
            for (std::size_t j = i + 1; j < std::min(i + fanout, level.size()); ++j) {
                acc = combine(std::move(acc), std::move(level[j]));
            }
            next.push_back(std::move(acc));
        }
        level = std::move(next);
    }
    return std::move(level.front());
}

}  // namespace detail

/// Driver/executor execution harness. The constructor spawns
/// executors x slots worker threads; the driver (the thread calling
/// execute_stage) dispatches one task per partition serially, collects
/// acknowledgements, and folds the results in a fixed tree order.
/// One stage runs at a time; driver logic is single-threaded by contract.
class ExecContext {
public:
    explicit ExecContext(RunConfig config);
    ~ExecContext();

    ExecContext(const ExecContext&) = delete;
    ExecContext& operator=(const ExecContext&) = delete;

    const RunConfig& config() const { return config_; }
    std::uint64_t stages_executed() const { return next_stage_id_; }
    const std::vector<StageMetrics>& stage_log() const { return stage_log_; }

    template <typename Map, typename Combine>
    auto execute_stage(const DistMatrix& a, Map&& map, Combine&& combine)
        -> std::pair<std::invoke_result_t<Map&, const RowBlock&>, StageMetrics> {
        using T = std::invoke_result_t<Map&, const RowBlock&>;
        const std::size_t nparts = a.blocks().size();
        std::vector<std::optional<T>> results(nparts);
        std::vector<std::exception_ptr> errors(nparts);

        StageMetrics metrics =
            run_stage(nparts, [&](std::size_t t, TaskRecord& rec) {
                try {
                    maybe_straggle(rec);
                    results[t].emplace(map(a.blocks()[t]));
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });

        for (std::size_t t = 0; t < nparts; ++t) {
            if (errors[t]) {
                try {
                    std::rethrow_exception(errors[t]);
                } catch (const std::exception& e) {
                    throw StageError(t, e.what());
                } catch (...) {
                    throw StageError(t, "unknown error");
                }
            }
        }

        std::vector<T> level;
        level.reserve(nparts);
        for (auto& r : results) level.push_back(std::move(*r));
        T out = detail::tree_combine(std::move(level), config_.tree_fanout, combine);
        return {std::move(out), std::move(metrics)};
    }

private:
    // Runs `body(task_index, record)` once per task on the worker pool,
    // stamping every record; returns the completed stage metrics.
    StageMetrics run_stage(std::size_t ntasks,
                           const std::function<void(std::size_t, TaskRecord&)>& body);

    // Sleeps out an injected straggler, charging the time to the compute bin.
    void maybe_straggle(const TaskRecord& rec) const;

    RunConfig config_;
    std::uint64_t next_stage_id_ = 0;
    std::vector<StageMetrics> stage_log_;

    struct Pool;
    std::unique_ptr<Pool> pool_;
};

}  // namespace tsf
