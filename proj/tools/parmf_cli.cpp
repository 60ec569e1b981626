// parmf command-line front end: dataset splitting, training, evaluation and
// speedup benchmarks over plain-text rating files.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.
// Every flag can also be set through an environment variable with the PARMF_
// prefix (e.g. PARMF_K, PARMF_WORKERS); command-line values win.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <new>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "parmf/parmf.hpp"

namespace {

using namespace parmf;

std::string env_name(const std::string& flag) {
    std::string out = "PARMF_";
    for (char c : flag) out += c == '-' ? '_' : static_cast<char>(std::toupper(c));
    return out;
}

std::string default_workers() {
    const unsigned n = std::thread::hardware_concurrency();
    return std::to_string(n == 0 ? 1 : n);
}

struct CommonOpts {
    std::string algorithm = "ccdpp";
    int k = 5;
    double lambda = 0.1;
    int outer_iters = 15;
    int inner_iters = 15;
    std::string workers;  // resolved after parsing, per subcommand
    std::string precision = "double";
    std::uint64_t seed = 0;
    std::string train_path;
    std::string probe_path;
    double split_ratio = 0.0;  // 0 = not set
    std::string out_dir;
};

void add_model_flags(CLI::App* cmd, CommonOpts& o, bool bench) {
    cmd->add_option("--algorithm", o.algorithm, "Solver: als, ccd or ccdpp")
        ->check(CLI::IsMember({"als", "ccd", "ccdpp"}))
        ->envname(env_name("algorithm"));
    cmd->add_option("--k", o.k, "Factorization rank")->envname(env_name("k"));
    cmd->add_option("--lambda", o.lambda, "Regularization weight")
        ->envname(env_name("lambda"));
    cmd->add_option("--outer-iters", o.outer_iters, "Outer iterations")
        ->envname(env_name("outer-iters"));
    cmd->add_option("--inner-iters", o.inner_iters,
                    "Inner iterations per factor column (ccd/ccdpp)")
        ->envname(env_name("inner-iters"));
    cmd->add_option("--workers", o.workers,
                    bench ? "Comma-separated worker counts; must include 1 "
                            "(default: 1)"
                          : "Worker count (default: hardware parallelism)")
        ->envname(env_name("workers"));
    cmd->add_option("--precision", o.precision, "Scalar precision: single or double")
        ->check(CLI::IsMember({"single", "double"}))
        ->envname(env_name("precision"));
    cmd->add_option("--seed", o.seed, "Random seed")->envname(env_name("seed"));
}

std::vector<int> parse_worker_list(const std::string& s) {
    std::vector<int> out;
    size_t pos = 0;
    while (pos <= s.size()) {
        const size_t comma = std::min(s.find(',', pos), s.size());
        const std::string tok = s.substr(pos, comma - pos);
        if (!tok.empty()) {
            size_t used = 0;
            int v = 0;
            try {
                v = std::stoi(tok, &used);
            } catch (...) {
                throw CLI::ValidationError("--workers", "bad worker count '" + tok + "'");
            }
            if (used != tok.size() || v < 1)
                throw CLI::ValidationError("--workers", "bad worker count '" + tok + "'");
            out.push_back(v);
        }
        pos = comma + 1;
    }
    if (out.empty()) throw CLI::ValidationError("--workers", "empty worker list");
    return out;
}

RunSpec make_spec(const CommonOpts& o, int workers) {
    RunSpec spec;
    spec.algorithm = o.algorithm == "als"   ? Algorithm::kAls
                     : o.algorithm == "ccd" ? Algorithm::kCcd
                                            : Algorithm::kCcdpp;
    spec.k = o.k;
    spec.lambda = o.lambda;
    spec.outer_iters = o.outer_iters;
    spec.inner_iters = o.inner_iters;
    spec.workers = workers;
    spec.precision =
        o.precision == "single" ? Precision::kSingle : Precision::kDouble;
    spec.seed = o.seed;
    if (spec.k < 1) throw CLI::ValidationError("--k", "k must be >= 1");
    if (spec.lambda < 0) throw CLI::ValidationError("--lambda", "lambda must be >= 0");
    if (spec.algorithm == Algorithm::kAls && !(spec.lambda > 0))
        throw CLI::ValidationError("--lambda", "als requires lambda > 0");
    if (spec.outer_iters < 1 || spec.inner_iters < 1)
        throw CLI::ValidationError("--outer-iters", "iteration counts must be >= 1");
    return spec;
}

struct LoadedData {
    std::vector<RawTriplet> train_raw;
    std::vector<RawTriplet> probe_raw;
};

LoadedData load_train_probe(const CommonOpts& o) {
    LoadedData data;
    auto all = read_triplets(o.train_path);
    if (all.empty()) throw data_error(o.train_path + ": no ratings");
    if (!o.probe_path.empty()) {
        data.train_raw = std::move(all);
        data.probe_raw = read_triplets(o.probe_path);
    } else if (o.split_ratio != 0.0) {
        auto split = split_dataset(all, o.split_ratio, o.seed);
        data.train_raw = std::move(split.train);
        data.probe_raw = std::move(split.probe);
    } else {
        data.train_raw = std::move(all);
    }
    return data;
}

template <class Real>
int run_train(const CommonOpts& o) {
    const RunSpec spec = make_spec(o, [&] {
        auto list = parse_worker_list(o.workers);
        if (list.size() != 1)
            throw CLI::ValidationError("--workers", "train takes a single worker count");
        return list[0];
    }());

    const LoadedData data = load_train_probe(o);
    Dataset<Real> ds = map_dataset<Real>(data.train_raw);
    std::vector<RawTriplet> unmapped;
    const auto probe = map_probe<Real>(ds.users, ds.items, data.probe_raw, &unmapped);
    if (!unmapped.empty())
        std::cerr << "warning: " << unmapped.size()
                  << " probe entries reference users/items unseen in training; "
                     "eval scores them with prediction 0\n";

    const RatingsMatrix<Real> a = ds.to_matrix();
    auto [model, report] = run_training<Real>(spec, a, probe);

    if (!o.out_dir.empty()) {
        const std::filesystem::path out(o.out_dir);
        save_model_dir(out, model, ds.users, ds.items);
        write_report_jsonl(out / "report.jsonl", report);
        write_run_json(out / "run.json", report);
    }
    std::cout << format_report_table(report);
    if (!std::isnan(report.final_rmse))
        std::printf("final RMSE %.6f\n", report.final_rmse);
    std::printf("train seconds %.4f (wall %.4f)\n", report.train_seconds,
                report.wall_seconds);
    return 0;
}

template <class Real>
int run_bench(const CommonOpts& o) {
    const auto workers = parse_worker_list(o.workers);
    if (std::find(workers.begin(), workers.end(), 1) == workers.end())
        throw CLI::ValidationError("--workers", "bench needs the 1-worker baseline");
    const RunSpec spec = make_spec(o, 1);

    const LoadedData data = load_train_probe(o);
    Dataset<Real> ds = map_dataset<Real>(data.train_raw);
    const auto probe = map_probe<Real>(ds.users, ds.items, data.probe_raw, nullptr);
    const RatingsMatrix<Real> a = ds.to_matrix();

    const BenchResult result = bench_run<Real>(spec, a, probe, workers);
    std::cout << format_bench_table(result.rows);
    if (!o.out_dir.empty()) {
        const std::filesystem::path out(o.out_dir);
        std::filesystem::create_directories(out);
        write_bench_jsonl(out / "bench.jsonl", result.rows);
        for (const auto& report : result.reports)
            write_report_jsonl(
                out / ("report-w" + std::to_string(report.workers) + ".jsonl"),
                report);
    }
    return 0;
}

int run_split(const CommonOpts& o) {
    if (!(o.split_ratio > 0.0 && o.split_ratio < 1.0))
        throw CLI::ValidationError("--split-ratio", "ratio must be in (0, 1)");
    const auto all = read_triplets(o.train_path);
    const auto split = split_dataset(all, o.split_ratio, o.seed);
    const std::filesystem::path out(o.out_dir.empty() ? "." : o.out_dir);
    std::filesystem::create_directories(out);
    write_triplets(out / "train.txt", split.train);
    write_triplets(out / "probe.txt", split.probe);
    std::cout << "train " << split.train.size() << " probe " << split.probe.size()
              << " -> " << (out / "train.txt").string() << ", "
              << (out / "probe.txt").string() << "\n";
    return 0;
}

int run_eval(const std::string& model_dir, const std::string& probe_path) {
    const std::filesystem::path dir(model_dir);
    const auto probe = read_triplets(probe_path);
    if (probe.empty()) throw data_error(probe_path + ": no ratings");
    const IdMap users = IdMap::load(dir / "user_map.txt");
    const IdMap items = IdMap::load(dir / "item_map.txt");
    double value = 0.0;
    if (peek_model_precision(dir / "model.bin") == Precision::kSingle) {
        const auto model = load_model<float>(dir / "model.bin");
        value = eval_rmse(model, users, items, probe);
    } else {
        const auto model = load_model<double>(dir / "model.bin");
        value = eval_rmse(model, users, items, probe);
    }
    std::printf("%.6f\n", value);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"parmf: parallel matrix factorization for recommender systems"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string eval_model_dir;

    auto* split = app.add_subcommand("split", "Split a rating file into train/probe");
    split->add_option("--train", opts.train_path, "Input rating file")
        ->required()
        ->envname(env_name("train"));
    split->add_option("--split-ratio", opts.split_ratio, "Probe fraction in (0,1)")
        ->required()
        ->envname(env_name("split-ratio"));
    split->add_option("--seed", opts.seed, "Random seed")->envname(env_name("seed"));
    split->add_option("--out", opts.out_dir, "Output directory")
        ->envname(env_name("out"));

    auto* train = app.add_subcommand("train", "Train a model");
    train->add_option("--train", opts.train_path, "Training rating file")
        ->required()
        ->envname(env_name("train"));
    train->add_option("--probe", opts.probe_path, "Held-out probe rating file")
        ->envname(env_name("probe"));
    train->add_option("--split-ratio", opts.split_ratio,
                      "Split the probe off the training file instead")
        ->envname(env_name("split-ratio"));
    train->add_option("--out", opts.out_dir, "Output directory for model + reports")
        ->required()
        ->envname(env_name("out"));
    add_model_flags(train, opts, false);

    auto* bench = app.add_subcommand(
        "bench", "Run one configuration per worker count and print speedups");
    bench->add_option("--train", opts.train_path, "Training rating file")
        ->required()
        ->envname(env_name("train"));
    bench->add_option("--probe", opts.probe_path, "Held-out probe rating file")
        ->envname(env_name("probe"));
    bench->add_option("--split-ratio", opts.split_ratio,
                      "Split the probe off the training file instead")
        ->envname(env_name("split-ratio"));
    bench->add_option("--out", opts.out_dir, "Output directory for reports")
        ->envname(env_name("out"));
    add_model_flags(bench, opts, true);

    auto* eval = app.add_subcommand("eval", "Evaluate a model directory on a probe file");
    eval->add_option("model_dir", eval_model_dir, "Directory written by train")
        ->required();
    eval->add_option("--probe", opts.probe_path, "Probe rating file")
        ->required()
        ->envname(env_name("probe"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(split)) return run_split(opts);
        if (app.got_subcommand(eval)) return run_eval(eval_model_dir, opts.probe_path);
        if (!opts.probe_path.empty() && opts.split_ratio != 0.0)
            throw CLI::ValidationError("--probe", "give either --probe or --split-ratio");
        if (opts.split_ratio != 0.0 && !(opts.split_ratio > 0.0 && opts.split_ratio < 1.0))
            throw CLI::ValidationError("--split-ratio", "ratio must be in (0, 1)");
        const bool single = opts.precision == "single";
        if (app.got_subcommand(train)) {
            if (opts.workers.empty()) opts.workers = default_workers();
            return single ? run_train<float>(opts) : run_train<double>(opts);
        }
        if (app.got_subcommand(bench)) {
            if (opts.workers.empty()) opts.workers = "1";
            return single ? run_bench<float>(opts) : run_bench<double>(opts);
        }
        return 1;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const data_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::bad_alloc&) {
        std::cerr << "error: out of memory (input too large for this host)\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
