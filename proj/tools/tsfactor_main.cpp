// tsfactor: factorizations of tall-and-skinny matrices on an instrumented
// driver/executor runtime.
//
//   tsfactor pca     --input a.tsma --k 5 ...
//   tsfactor svd     --input a.tsma --k 5 ...
//   tsfactor nmf     --input a.tsma --k 10 ...
//   tsfactor cx      --input a.tsma --k 5 --slack 5 --power-iters 2 ...
//   tsfactor bench   [--input a.tsma | --rows R --cols C] --iterations N ...
//   tsfactor convert --input a.csv --output a.tsma
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <limits>
#include <vector>

#include "tsfactor/errors.hpp"
#include "tsfactor/factorization.hpp"
#include "tsfactor/io.hpp"
#include "tsfactor/report.hpp"
#include "tsfactor/rng.hpp"

namespace {

const CLI::Validator kAtLeastOne =
    CLI::Range(std::size_t{1}, std::numeric_limits<std::size_t>::max())
        .description("INT>=1");

struct CommonOpts {
    std::string input;
    std::string out_prefix;
    std::string report_out;
    std::string format = "json";
    std::size_t partitions = 8;
    std::size_t executors = 2;
    std::size_t slots = 2;
    std::size_t tree_fanout = 2;
    std::uint64_t seed = 42;  // fixed default: runs are reproducible by default
};

void add_common_flags(CLI::App* cmd, CommonOpts& opts, bool needs_input) {
    auto* input =
        cmd->add_option("--input", opts.input, "input matrix (TSMA container)");
    if (needs_input) input->required();
    cmd->add_option("--out-prefix", opts.out_prefix,
                    "prefix for output files (default: input path without extension)");
    cmd->add_option("--report-out", opts.report_out,
                    "report path (default: <prefix>.report.<format>)");
    cmd->add_option("--format", opts.format, "report/task-log format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    cmd->add_option("--partitions", opts.partitions, "row blocks")
        ->check(kAtLeastOne)
        ->capture_default_str();
    cmd->add_option("--executors", opts.executors, "executor count")
        ->check(kAtLeastOne)
        ->capture_default_str();
    cmd->add_option("--slots", opts.slots, "task slots per executor")
        ->check(kAtLeastOne)
        ->capture_default_str();
    cmd->add_option("--tree-fanout", opts.tree_fanout, "reduction tree fan-out")
        ->check(CLI::Range(std::size_t{2}, std::size_t{1024}))
        ->capture_default_str();
    cmd->add_option("--seed", opts.seed, "seed for all randomness")->capture_default_str();
}

std::string default_prefix(const CommonOpts& opts) {
    if (!opts.out_prefix.empty()) return opts.out_prefix;
    const std::string& in = opts.input;
    const std::size_t dot = in.rfind('.');
    if (dot == std::string::npos || dot == 0) return in + ".out";
    return in.substr(0, dot);
}

tsf::RunConfig make_config(const CommonOpts& opts) {
    tsf::RunConfig cfg;
    cfg.executors = opts.executors;
    cfg.slots_per_executor = opts.slots;
    cfg.partitions = opts.partitions;
    cfg.tree_fanout = opts.tree_fanout;
    cfg.seed = opts.seed;
    return cfg;
}

std::int64_t elapsed_ns(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now() - t0)
        .count();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw tsf::IoError(path + ": cannot open for writing");
    out << text;
    if (!out) throw tsf::IoError(path + ": write failed");
}

void write_run_artifacts(const CommonOpts& opts, const std::string& algo,
                         const tsf::ExecContext& ctx, std::size_t rows, std::size_t cols,
                         std::int64_t wall_ns) {
    const std::string prefix = default_prefix(opts);
    tsf::RunReport report =
        tsf::build_report(algo, rows, cols, ctx.config(), ctx.stage_log(), wall_ns);
    const std::string report_path =
        !opts.report_out.empty() ? opts.report_out : prefix + ".report." + opts.format;
    if (opts.format == "json") {
        write_text_file(report_path, tsf::emit_report_json(report));
        write_text_file(prefix + ".tasks.jsonl", tsf::metrics_to_jsonl(ctx.stage_log()));
    } else {
        write_text_file(report_path, tsf::emit_report_csv(report));
        write_text_file(prefix + ".tasks.csv", tsf::metrics_to_csv(ctx.stage_log()));
    }
    std::printf("%s: %zux%zu, %llu stages, wall %.3f s, report %s\n", algo.c_str(), rows,
                cols, static_cast<unsigned long long>(ctx.stages_executed()),
                static_cast<double>(wall_ns) * 1e-9, report_path.c_str());
}

tsf::DenseMatrix column_vector(const std::vector<double>& values) {
    return tsf::DenseMatrix(values.size(), 1, std::vector<double>(values));
}

int run_pca(const CommonOpts& opts, std::size_t k, double tol, std::size_t max_iters,
            bool center, const std::string& algo) {
    tsf::DistMatrix a = tsf::read_matrix_partitioned(opts.input, opts.partitions);
    tsf::ExecContext ctx(make_config(opts));
    const auto t0 = std::chrono::steady_clock::now();
    tsf::PcaResult r = tsf::pca(ctx, a, k, center, tol, max_iters);
    const std::int64_t wall = elapsed_ns(t0);

    const std::string prefix = default_prefix(opts);
    tsf::write_matrix(prefix + ".u.tsma", r.factors.u);
    tsf::write_matrix(prefix + ".s.tsma", column_vector(r.factors.sigma));
    tsf::write_matrix(prefix + ".v.tsma", r.factors.v);
    if (center) tsf::write_matrix(prefix + ".means.tsma", column_vector(r.column_means));

    std::string iters;
    for (const tsf::EigsRestartLog& log : r.eig_history) {
        nlohmann::ordered_json line;
        line["ops"] = log.ops;
        line["residuals"] = log.residuals;
        iters += line.dump();
        iters += '\n';
    }
    write_text_file(prefix + ".iters.jsonl", iters);
    write_run_artifacts(opts, algo, ctx, a.global_rows(), a.cols(), wall);
    std::printf("  sigma[0]=%.6g iterations=%zu\n",
                r.factors.sigma.empty() ? 0.0 : r.factors.sigma[0], r.iterations_used);
    return 0;
}

int run_nmf(const CommonOpts& opts, std::size_t k, double clamp_eps) {
    tsf::DistMatrix a = tsf::read_matrix_partitioned(opts.input, opts.partitions);
    tsf::ExecContext ctx(make_config(opts));
    const auto t0 = std::chrono::steady_clock::now();
    tsf::NmfResult r = tsf::nmf(ctx, a, k, clamp_eps);
    const std::int64_t wall = elapsed_ns(t0);

    const std::string prefix = default_prefix(opts);
    tsf::write_matrix(prefix + ".w.tsma", r.w);
    tsf::write_matrix(prefix + ".h.tsma", r.h);
    write_text_file(prefix + ".k.json", nlohmann::json(r.selected).dump() + "\n");
    write_run_artifacts(opts, "nmf", ctx, a.global_rows(), a.cols(), wall);
    std::printf("  relative_residual=%.6g selected=%zu columns\n", r.relative_residual,
                r.selected.size());
    return 0;
}

int run_cx(const CommonOpts& opts, std::size_t k, std::size_t slack,
           std::size_t power_iters) {
    tsf::DistMatrix a = tsf::read_matrix_partitioned(opts.input, opts.partitions);
    tsf::ExecContext ctx(make_config(opts));
    const auto t0 = std::chrono::steady_clock::now();
    tsf::CxResult r = tsf::cx(ctx, a, k, slack, power_iters, opts.seed);
    const std::int64_t wall = elapsed_ns(t0);

    const std::string prefix = default_prefix(opts);
    tsf::write_matrix(prefix + ".c.tsma", r.c);
    tsf::write_matrix(prefix + ".x.tsma", r.x);
    nlohmann::ordered_json j;
    j["indices"] = r.indices;
    j["leverage"] = r.leverage;
    j["probabilities"] = r.probabilities;
    j["seed"] = r.seed;
    write_text_file(prefix + ".cx.json", j.dump(2) + "\n");
    write_run_artifacts(opts, "cx", ctx, a.global_rows(), a.cols(), wall);
    return 0;
}

int run_bench(const CommonOpts& opts, std::size_t rows, std::size_t cols,
              std::size_t iterations, const std::string& straggler_spec,
              double dispatch_latency_ms, double tasks_per_second) {
    tsf::DistMatrix a;
    if (!opts.input.empty()) {
        a = tsf::read_matrix_partitioned(opts.input, opts.partitions);
    } else {
        // Synthetic uniform matrix, built block by block from the counter
        // generator so no second full-size copy ever exists.
        const std::size_t base = rows / opts.partitions;
        const std::size_t extra = rows % opts.partitions;
        std::vector<tsf::RowBlock> blocks;
        std::size_t offset = 0;
        for (std::size_t p = 0; p < opts.partitions; ++p) {
            const std::size_t r = base + (p < extra ? 1 : 0);
            tsf::DenseMatrix block(r, cols);
            for (std::size_t i = 0; i < block.size(); ++i) {
                block.data()[i] =
                    tsf::rng::uniform(opts.seed, tsf::rng::kSyntheticData, offset * cols + i);
            }
            blocks.push_back({offset, std::move(block)});
            offset += r;
        }
        a = tsf::DistMatrix(rows, cols, std::move(blocks));
    }

    tsf::RunConfig cfg = make_config(opts);
    tsf::DelaySpec delay;
    bool have_delay = false;
    if (!straggler_spec.empty()) {
        const std::size_t colon = straggler_spec.find(':');
        if (colon == std::string::npos) {
            throw tsf::ConfigError("--inject-straggler expects PROB:MILLIS");
        }
        delay.straggler_prob = std::stod(straggler_spec.substr(0, colon));
        delay.straggler_duration_ns =
            static_cast<std::int64_t>(std::stod(straggler_spec.substr(colon + 1)) * 1e6);
        have_delay = true;
    }
    if (dispatch_latency_ms > 0.0) {
        delay.dispatch_latency_ns = static_cast<std::int64_t>(dispatch_latency_ms * 1e6);
        have_delay = true;
    } else if (tasks_per_second > 0.0) {
        delay.dispatch_latency_ns = static_cast<std::int64_t>(1e9 / tasks_per_second);
        have_delay = true;
    }
    if (have_delay) cfg.delay = delay;

    tsf::ExecContext ctx(cfg);
    // Power-iteration-shaped workload: one Gramian stage per iteration, the
    // same pattern as the eigensolver inner loop.
    tsf::DenseMatrix b(a.cols(), 1);
    for (std::size_t i = 0; i < b.size(); ++i) {
        b.data()[i] = tsf::rng::gaussian(opts.seed, tsf::rng::kGaussianSketch, i);
    }
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t it = 0; it < iterations; ++it) {
        b = tsf::multiply_gramian(ctx, a, b);
        double norm = 0.0;
        for (std::size_t i = 0; i < b.size(); ++i) norm += b.data()[i] * b.data()[i];
        norm = std::sqrt(norm);
        if (norm > 0.0) {
            for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] /= norm;
        }
    }
    const std::int64_t wall = elapsed_ns(t0);

    CommonOpts bench_opts = opts;
    if (bench_opts.out_prefix.empty() && bench_opts.input.empty()) {
        bench_opts.out_prefix = "bench";
    }
    write_run_artifacts(bench_opts, "bench", ctx, a.global_rows(), a.cols(), wall);

    double measured_start_delay = 0.0;
    for (const tsf::StageMetrics& s : ctx.stage_log()) {
        std::int64_t worst = 0;
        for (const tsf::TaskBins& tb : s.bins) worst = std::max(worst, tb.task_start_delay);
        measured_start_delay += static_cast<double>(worst);
    }
    const double rate = tasks_per_second > 0.0 ? tasks_per_second : 2000.0;
    const double predicted = tsf::predict_scheduler_delay(opts.partitions, iterations, rate);
    std::printf("  measured task start delay (sum of per-stage max): %.3f s\n",
                measured_start_delay * 1e-9);
    std::printf("  predicted scheduler delay at %.0f tasks/s: %.3f s\n", rate, predicted);
    return 0;
}

int run_convert(const std::string& input, const std::string& output, char delimiter) {
    auto ends_with = [](const std::string& s, const std::string& suffix) {
        return s.size() >= suffix.size() &&
               s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(input, ".csv") && ends_with(output, ".tsma")) {
        tsf::write_matrix(output, tsf::read_csv(input, delimiter));
    } else if (ends_with(input, ".tsma") && ends_with(output, ".csv")) {
        tsf::write_csv(output, tsf::read_matrix(input), delimiter);
    } else {
        throw tsf::ConfigError("convert: expected .csv -> .tsma or .tsma -> .csv (got '" +
                               input + "' -> '" + output + "')");
    }
    std::printf("converted %s -> %s\n", input.c_str(), output.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tall-and-skinny matrix factorizations on an instrumented runtime"};
    app.require_subcommand(1);

    CommonOpts pca_opts, svd_opts, nmf_opts, cx_opts, bench_opts;
    std::size_t k = 0;
    double tol = 1e-8;
    std::size_t max_iters = 300;
    bool no_center = false;
    bool svd_center = false;

    CLI::App* pca_cmd = app.add_subcommand("pca", "rank-k PCA (centered by default)");
    add_common_flags(pca_cmd, pca_opts, true);
    pca_cmd->add_option("--k", k, "target rank")->required()->check(kAtLeastOne);
    pca_cmd->add_option("--tol", tol, "eigensolver tolerance (<= 0: fixed iteration budget)")
        ->capture_default_str();
    pca_cmd->add_option("--max-iters", max_iters, "operator application budget")
        ->capture_default_str();
    pca_cmd->add_flag("--no-center", no_center, "skip column centering");

    CLI::App* svd_cmd = app.add_subcommand("svd", "rank-k truncated SVD (no centering)");
    add_common_flags(svd_cmd, svd_opts, true);
    svd_cmd->add_option("--k", k, "target rank")->required()->check(kAtLeastOne);
    svd_cmd->add_option("--tol", tol, "eigensolver tolerance (<= 0: fixed iteration budget)")
        ->capture_default_str();
    svd_cmd->add_option("--max-iters", max_iters, "operator application budget")
        ->capture_default_str();
    svd_cmd->add_flag("--center", svd_center, "center columns first");

    double clamp_eps = 1e-9;
    CLI::App* nmf_cmd = app.add_subcommand("nmf", "separable NMF via TSQR + Xray");
    add_common_flags(nmf_cmd, nmf_opts, true);
    nmf_cmd->add_option("--k", k, "number of columns to select")
        ->required()
        ->check(kAtLeastOne);
    nmf_cmd->add_option("--clamp-eps", clamp_eps,
                        "negative entries above -eps are clamped to zero")
        ->capture_default_str();

    std::size_t slack = 5;
    std::size_t power_iters = 2;
    CLI::App* cx_cmd = app.add_subcommand("cx", "CX decomposition via leverage sampling");
    add_common_flags(cx_cmd, cx_opts, true);
    cx_cmd->add_option("--k", k, "columns to sample")->required()->check(kAtLeastOne);
    cx_cmd->add_option("--slack", slack, "sketch oversampling")->capture_default_str();
    cx_cmd->add_option("--power-iters", power_iters, "power iterations (>= 1)")
        ->check(kAtLeastOne)
        ->capture_default_str();

    std::size_t bench_rows = 100000, bench_cols = 64, iterations = 10;
    std::string straggler_spec;
    double dispatch_latency_ms = 0.0, tasks_per_second = 0.0;
    CLI::App* bench_cmd =
        app.add_subcommand("bench", "instrumented Gramian workload with delay injection");
    add_common_flags(bench_cmd, bench_opts, false);
    bench_cmd->add_option("--rows", bench_rows, "synthetic matrix rows")
        ->capture_default_str();
    bench_cmd->add_option("--cols", bench_cols, "synthetic matrix cols")
        ->capture_default_str();
    bench_cmd->add_option("--iterations", iterations, "number of Gramian stages")
        ->capture_default_str();
    bench_cmd->add_option("--inject-straggler", straggler_spec,
                          "per-task straggler lottery, PROB:MILLIS");
    bench_cmd->add_option("--inject-dispatch-latency", dispatch_latency_ms,
                          "driver-side per-task dispatch latency, ms");
    bench_cmd->add_option("--tasks-per-second", tasks_per_second,
                          "dispatch rate; also used for the predicted delay");

    std::string conv_input, conv_output;
    std::string delimiter = ",";
    CLI::App* conv_cmd = app.add_subcommand("convert", "convert between CSV and TSMA");
    conv_cmd->add_option("--input", conv_input, "source file")->required();
    conv_cmd->add_option("--output", conv_output, "destination file")->required();
    conv_cmd->add_option("--delimiter", delimiter, "CSV delimiter")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        std::cerr << "error: " << e.what() << "\n";
        std::cerr << "run with --help for usage\n";
        return 2;
    }

    try {
        if (pca_cmd->parsed()) {
            return run_pca(pca_opts, k, tol, max_iters, !no_center, "pca");
        }
        if (svd_cmd->parsed()) {
            return run_pca(svd_opts, k, tol, max_iters, svd_center, "svd");
        }
        if (nmf_cmd->parsed()) return run_nmf(nmf_opts, k, clamp_eps);
        if (cx_cmd->parsed()) return run_cx(cx_opts, k, slack, power_iters);
        if (bench_cmd->parsed()) {
            return run_bench(bench_opts, bench_rows, bench_cols, iterations, straggler_spec,
                             dispatch_latency_ms, tasks_per_second);
        }
        if (conv_cmd->parsed()) {
            return run_convert(conv_input, conv_output,
                               delimiter.empty() ? ',' : delimiter[0]);
        }
    } catch (const tsf::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
