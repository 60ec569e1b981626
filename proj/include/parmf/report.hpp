#ifndef PARMF_REPORT_HPP
#define PARMF_REPORT_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "parmf/runtime.hpp"
#include "parmf/types.hpp"

namespace parmf {

/// One training iteration: wall seconds spent in solver stages, the full
/// objective, and the probe RMSE (NaN when no probe set was given).
struct IterationRow {
    int iteration = 0;
    double seconds = 0.0;
    double objective = 0.0;
    double rmse = std::numeric_limits<double>::quiet_NaN();
};

/// Everything a training run reports: the run configuration, one row per
/// iteration, aggregate stage timings, and totals. `train_seconds` counts
/// solver stages only; `wall_seconds` additionally includes metric
/// evaluation between iterations.
struct TrainReport {
    std::string algorithm;
    std::string precision;
    int workers = 1;
    int k = 0;
    double lambda = 0.0;
    int outer_iters = 0;
    int inner_iters = 0;
    std::uint64_t seed = 0;
    std::int64_t users = 0;
    std::int64_t items = 0;
    std::int64_t nnz = 0;

    std::vector<IterationRow> rows;
    std::vector<StageTiming> stage_totals;  // aggregated by stage name

    double train_seconds = 0.0;
    double wall_seconds = 0.0;
    double final_objective = 0.0;
    double final_rmse = std::numeric_limits<double>::quiet_NaN();

    void add_stage_timings(std::span<const StageTiming> ts) {
        for (const auto& t : ts) {
            auto it = std::find_if(stage_totals.begin(), stage_totals.end(),
                                   [&](const StageTiming& s) { return s.name == t.name; });
            if (it == stage_totals.end()) {
                stage_totals.push_back(t);
            } else {
                it->seconds += t.seconds;
                it->bytes_in += t.bytes_in;
                it->bytes_out += t.bytes_out;
            }
        }
    }
};

/// t_seq / t_par over the solver-stage totals of two runs of the same workload.
inline double speedup(const TrainReport& base, const TrainReport& par) {
    return speedup(base.train_seconds, par.train_seconds);
}

/// Machine-readable per-iteration records: one JSON object per line with the
/// fixed fields iteration, seconds, objective, rmse (null without a probe).
inline void write_report_jsonl(const std::filesystem::path& path,
                               const TrainReport& report) {
    std::ofstream os(path);
    if (!os) throw data_error("cannot open " + path.string() + " for writing");
    for (const auto& row : report.rows) {
        nlohmann::json j;
        j["iteration"] = row.iteration;
        j["seconds"] = row.seconds;
        j["objective"] = row.objective;
        if (std::isnan(row.rmse)) j["rmse"] = nullptr;
        else j["rmse"] = row.rmse;
        os << j.dump() << '\n';
    }
}

/// Run configuration and totals as a single JSON document.
inline void write_run_json(const std::filesystem::path& path,
                           const TrainReport& report) {
    nlohmann::json j;
    j["algorithm"] = report.algorithm;
    j["precision"] = report.precision;
    j["workers"] = report.workers;
    j["k"] = report.k;
    j["lambda"] = report.lambda;
    j["outer_iters"] = report.outer_iters;
    j["inner_iters"] = report.inner_iters;
    j["seed"] = report.seed;
    j["users"] = report.users;
    j["items"] = report.items;
    j["nnz"] = report.nnz;
    j["train_seconds"] = report.train_seconds;
    j["wall_seconds"] = report.wall_seconds;
    j["final_objective"] = report.final_objective;
    if (std::isnan(report.final_rmse)) j["final_rmse"] = nullptr;
    else j["final_rmse"] = report.final_rmse;
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : report.stage_totals) {
        stages.push_back({{"name", s.name},
                          {"seconds", s.seconds},
                          {"bytes_in", s.bytes_in},
                          {"bytes_out", s.bytes_out}});
    }
    j["stages"] = stages;
    std::ofstream os(path);
    if (!os) throw data_error("cannot open " + path.string() + " for writing");
    os << j.dump(2) << '\n';
}

inline std::string format_report_table(const TrainReport& report) {
    std::ostringstream os;
    os << report.algorithm << " k=" << report.k << " lambda=" << report.lambda
       << " workers=" << report.workers << " precision=" << report.precision
       << " (" << report.users << " users, " << report.items << " items, "
       << report.nnz << " ratings)\n";
    os << "iter |    seconds |       objective |     rmse\n";
    char buf[160];
    for (const auto& row : report.rows) {
        if (std::isnan(row.rmse))
            std::snprintf(buf, sizeof(buf), "%4d | %10.4f | %15.8g |        -\n",
                          row.iteration, row.seconds, row.objective);
        else
            std::snprintf(buf, sizeof(buf), "%4d | %10.4f | %15.8g | %8.6f\n",
                          row.iteration, row.seconds, row.objective, row.rmse);
        os << buf;
    }
    return os.str();
}

/// One row of a speedup table: worker count, solver seconds, speedup against
/// the 1-worker run, and the final probe RMSE of that run.
struct BenchRow {
    int workers = 0;
    double seconds = 0.0;
    double speedup_vs_one = 1.0;
    double final_rmse = std::numeric_limits<double>::quiet_NaN();
};

/// Speedup table in the shape "<n> threads | <seconds>s | <speedup>".
inline std::string format_bench_table(std::span<const BenchRow> rows) {
    std::ostringstream os;
    os << "Test       | Execution time | Speedup | RMSE\n";
    char buf[160];
    for (const auto& r : rows) {
        const char* unit = r.workers == 1 ? "thread " : "threads";
        if (r.workers == 1)
            std::snprintf(buf, sizeof(buf), "%2d %s | %13.4fs |         | %.4f\n",
                          r.workers, unit, r.seconds, r.final_rmse);
        else
            std::snprintf(buf, sizeof(buf), "%2d %s | %13.4fs | %7.1f | %.4f\n",
                          r.workers, unit, r.seconds, r.speedup_vs_one, r.final_rmse);
        os << buf;
    }
    return os.str();
}

inline void write_bench_jsonl(const std::filesystem::path& path,
                              std::span<const BenchRow> rows) {
    std::ofstream os(path);
    if (!os) throw data_error("cannot open " + path.string() + " for writing");
    for (const auto& r : rows) {
        nlohmann::json j;
        j["workers"] = r.workers;
        j["seconds"] = r.seconds;
        j["speedup"] = r.speedup_vs_one;
        if (std::isnan(r.final_rmse)) j["rmse"] = nullptr;
        else j["rmse"] = r.final_rmse;
        os << j.dump() << '\n';
    }
}

}  // namespace parmf

#endif  // PARMF_REPORT_HPP
