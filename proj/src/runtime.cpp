#include "tsfactor/runtime.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace tsf {
namespace {

std::int64_t now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

DistMatrix::DistMatrix(std::size_t global_rows, std::size_t cols, std::vector<RowBlock> blocks)
    : global_rows_(global_rows), cols_(cols), blocks_(std::move(blocks)) {
    std::size_t expected_offset = 0;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const RowBlock& b = blocks_[i];
        if (b.row_offset != expected_offset) {
            throw DimensionError("DistMatrix: block " + std::to_string(i) +
                                 " offset " + std::to_string(b.row_offset) +
                                 ", expected " + std::to_string(expected_offset));
        }
        if (b.data.cols() != cols_) {
            throw DimensionError("DistMatrix: block " + std::to_string(i) + " has " +
                                 std::to_string(b.data.cols()) + " cols, expected " +
                                 std::to_string(cols_));
        }
        expected_offset += b.data.rows();
    }
    if (expected_offset != global_rows_) {
        throw DimensionError("DistMatrix: blocks cover " + std::to_string(expected_offset) +
                             " rows, expected " + std::to_string(global_rows_));
    }
}

DistMatrix partition(const DenseMatrix& m, std::size_t partitions) {
    if (partitions == 0) throw ConfigError("partition: partition count must be >= 1");
    if (partitions > m.rows()) {
        throw DimensionError("partition: " + std::to_string(partitions) +
                             " partitions exceed " + std::to_string(m.rows()) + " rows");
    }
    const std::size_t base = m.rows() / partitions;
    const std::size_t extra = m.rows() % partitions;
    std::vector<RowBlock> blocks;
    blocks.reserve(partitions);
    std::size_t offset = 0;
    for (std::size_t p = 0; p < partitions; ++p) {
        const std::size_t rows = base + (p < extra ? 1 : 0);
        DenseMatrix block(rows, m.cols());
        for (std::size_t r = 0; r < rows; ++r) {
            const double* src = m.row(offset + r);
            std::copy(src, src + m.cols(), block.row(r));
        }
        blocks.push_back({offset, std::move(block)});
        offset += rows;
    }
    return DistMatrix(m.rows(), m.cols(), std::move(blocks));
}

DenseMatrix gather(const DistMatrix& a) {
    DenseMatrix out(a.global_rows(), a.cols());
    for (const RowBlock& b : a.blocks()) {
        std::copy(b.data.data(), b.data.data() + b.data.size(), out.row(b.row_offset));
    }
    return out;
}

TaskBins bin_task(const TaskRecord& rec, std::int64_t stage_end) {
    const std::int64_t ts[] = {rec.t_stage_start, rec.t_task_sent,       rec.t_exec_received,
                               rec.t_deser_done,  rec.t_compute_done,    rec.t_result_ser_done,
                               rec.t_driver_ack,  stage_end};
    for (std::size_t i = 1; i < sizeof(ts) / sizeof(ts[0]); ++i) {
        if (ts[i] < ts[i - 1]) {
            throw DataError("bin_task: non-monotone timestamps at position " +
                            std::to_string(i) + " (task " + std::to_string(rec.task_id) +
                            ", stage " + std::to_string(rec.stage_id) + ")");
        }
    }
    TaskBins bins;
    bins.task_start_delay = rec.t_task_sent - rec.t_stage_start;
    bins.scheduler_delay =
        (rec.t_exec_received - rec.t_task_sent) + (rec.t_driver_ack - rec.t_result_ser_done);
    bins.task_overhead =
        (rec.t_deser_done - rec.t_exec_received) + (rec.t_result_ser_done - rec.t_compute_done);
    bins.compute_time = rec.t_compute_done - rec.t_deser_done;
    bins.wait_until_stage_end = stage_end - rec.t_driver_ack;
    return bins;
}

// ---------------------------------------------------------------------------
// Worker pool: one shared FIFO of jobs, executors x slots threads.
// ---------------------------------------------------------------------------

struct ExecContext::Pool {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::function<void()>> jobs;
    bool shutdown = false;
    std::vector<std::thread> workers;

    explicit Pool(std::size_t n) {
        workers.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            workers.emplace_back([this] { loop(); });
        }
    }

    ~Pool() {
        {
            std::lock_guard<std::mutex> lock(mu);
            shutdown = true;
        }
        cv.notify_all();
        for (auto& w : workers) w.join();
    }

    void loop() {
        for (;;) {
            std::function<void()> job;
            {
                std::unique_lock<std::mutex> lock(mu);
                cv.wait(lock, [&] { return shutdown || !jobs.empty(); });
                if (jobs.empty()) return;
                job = std::move(jobs.front());
                jobs.pop_front();
            }
            job();
        }
    }

    void push(std::function<void()> job) {
        {
            std::lock_guard<std::mutex> lock(mu);
            jobs.push_back(std::move(job));
        }
        cv.notify_one();
    }
};

ExecContext::ExecContext(RunConfig config) : config_(config) {
    if (config_.executors < 1) throw ConfigError("ExecContext: executors must be >= 1");
    if (config_.slots_per_executor < 1) throw ConfigError("ExecContext: slots must be >= 1");
    if (config_.partitions < 1) throw ConfigError("ExecContext: partitions must be >= 1");
    if (config_.tree_fanout < 2) throw ConfigError("ExecContext: tree fan-out must be >= 2");
    pool_ = std::make_unique<Pool>(config_.total_slots());
}

ExecContext::~ExecContext() = default;

void ExecContext::maybe_straggle(const TaskRecord& rec) const {
    if (!config_.delay) return;
    if (config_.delay->straggler_hit(config_.seed, rec.stage_id, rec.task_id)) {
        std::this_thread::sleep_for(
            std::chrono::nanoseconds(config_.delay->straggler_duration_ns));
    }
}

StageMetrics ExecContext::run_stage(
    std::size_t ntasks, const std::function<void(std::size_t, TaskRecord&)>& body) {
    if (ntasks == 0) throw DimensionError("execute_stage: no partitions to run");

    StageMetrics metrics;
    metrics.stage_id = next_stage_id_++;
    metrics.tasks.resize(ntasks);

    struct DoneQueue {
        std::mutex mu;
        std::condition_variable cv;
        std::deque<std::size_t> order;
    };
    // Shared with the task closures: a worker may still be inside its final
    // notify when the driver has already popped the last completion, so the
    // queue must outlive both sides.
    auto done = std::make_shared<DoneQueue>();

    const std::int64_t dispatch_latency =
        config_.delay ? config_.delay->dispatch_latency_ns : 0;

    metrics.t_stage_start = now_ns();
    // One task handed out per dispatch-loop tick: the driver is a serial,
    // centralized scheduler on purpose.
    for (std::size_t t = 0; t < ntasks; ++t) {
        if (dispatch_latency > 0) {
            std::this_thread::sleep_for(std::chrono::nanoseconds(dispatch_latency));
        }
        TaskRecord& rec = metrics.tasks[t];
        rec.stage_id = metrics.stage_id;
        rec.task_id = t;
        rec.partition_id = t;
        rec.t_stage_start = metrics.t_stage_start;
        rec.t_task_sent = now_ns();
        TaskRecord* rp = &rec;
        const auto* bp = &body;
        pool_->push([rp, dq = done, bp, t] {
            rp->t_exec_received = now_ns();
            rp->t_deser_done = now_ns();  // in-process task unpack is immediate
            (*bp)(t, *rp);
            rp->t_compute_done = now_ns();
            rp->t_result_ser_done = now_ns();  // results move by value, no encoding
            {
                std::lock_guard<std::mutex> lock(dq->mu);
                dq->order.push_back(t);
            }
            dq->cv.notify_one();
        });
    }

    // Acknowledge completions serially in arrival order; queued completions
    // wait for the driver, exactly like a busy centralized scheduler.
    for (std::size_t i = 0; i < ntasks; ++i) {
        std::size_t t;
        {
            std::unique_lock<std::mutex> lock(done->mu);
            done->cv.wait(lock, [&] { return !done->order.empty(); });
            t = done->order.front();
            done->order.pop_front();
        }
        metrics.tasks[t].t_driver_ack = now_ns();
    }

    metrics.stage_end = metrics.t_stage_start;
    for (const TaskRecord& rec : metrics.tasks) {
        metrics.stage_end = std::max(metrics.stage_end, rec.t_driver_ack);
    }
    metrics.bins.reserve(ntasks);
    for (const TaskRecord& rec : metrics.tasks) {
        metrics.bins.push_back(bin_task(rec, metrics.stage_end));
    }
    stage_log_.push_back(metrics);
    return metrics;
}

// ---------------------------------------------------------------------------
// Serialization of per-task metrics.
// ---------------------------------------------------------------------------

std::string metrics_to_jsonl(const std::vector<StageMetrics>& stages) {
    std::string out;
    for (const StageMetrics& s : stages) {
        for (std::size_t t = 0; t < s.tasks.size(); ++t) {
            nlohmann::ordered_json line;
            line["stage_id"] = s.tasks[t].stage_id;
            line["task_id"] = s.tasks[t].task_id;
            line["partition_id"] = s.tasks[t].partition_id;
            line["task_start_delay_ns"] = s.bins[t].task_start_delay;
            line["scheduler_delay_ns"] = s.bins[t].scheduler_delay;
            line["task_overhead_ns"] = s.bins[t].task_overhead;
            line["compute_time_ns"] = s.bins[t].compute_time;
            line["wait_until_stage_end_ns"] = s.bins[t].wait_until_stage_end;
            out += line.dump();
            out += '\n';
        }
    }
    return out;
}

std::string metrics_to_csv(const std::vector<StageMetrics>& stages) {
    std::ostringstream out;
    out << "stage_id,task_id,partition_id,task_start_delay_ns,scheduler_delay_ns,"
           "task_overhead_ns,compute_time_ns,wait_until_stage_end_ns\n";
    for (const StageMetrics& s : stages) {
        for (std::size_t t = 0; t < s.tasks.size(); ++t) {
            out << s.tasks[t].stage_id << ',' << s.tasks[t].task_id << ','
                << s.tasks[t].partition_id << ',' << s.bins[t].task_start_delay << ','
                << s.bins[t].scheduler_delay << ',' << s.bins[t].task_overhead << ','
                << s.bins[t].compute_time << ',' << s.bins[t].wait_until_stage_end << '\n';
        }
    }
    return out.str();
}

}  // namespace tsf
