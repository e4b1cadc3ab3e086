#pragma once

// The generate / factorize / evaluate / bench commands behind the csalt
// executable. Each returns a process exit code.

#include "csalt/csalt.hpp"
#include "csalt/eval.hpp"
#include "csalt/io.hpp"
#include "csalt/synthgen.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace csalt::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kFailure = 1, kBadInput = 2, kNonFinite = 3 };

struct GenerateOptions {
    Index n = 0;
    std::vector<Index> m;  // one entry per class, or a single total split evenly
    Index rank = 24;
    int classes = 2;
    double p = 0.1;
    std::uint64_t seed = 0;
    fs::path out;
};

struct FactorizeOptions {
    fs::path data;
    fs::path labels;
    Index delta_r = 10;
    double gamma = 1.00001;
    std::size_t max_iter = 10000;
    std::size_t window = 500;
    double min_decrease = 0.005;
    Index max_rank = 200;
    bool no_alterations = false;
    std::uint64_t seed = 0;
    fs::path out;
};

struct EvaluateOptions {
    fs::path model;
    fs::path truth;
};

struct BenchOptions {
    std::string sweep;
    int repeats = 3;
    std::uint64_t seed = 0;
    fs::path out;
};

/// Maps library errors to exit codes and reports them on err.
template <typename F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const NonFiniteValue& e) {
        err << "error: " << e.what() << '\n';
        return kNonFinite;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
}

inline GeneratorSpec make_spec(const GenerateOptions& o) {
    if (o.m.empty()) throw InvalidInput("--m needs at least one value");
    GeneratorSpec spec;
    if (o.m.size() == 1 && o.classes > 1) {
        spec = default_spec(o.n, o.m.front(), o.classes, o.rank, o.p, o.seed);
    } else {
        if (static_cast<int>(o.m.size()) != o.classes)
            throw InvalidInput("--m lists " + std::to_string(o.m.size()) + " class sizes but --classes is " +
                               std::to_string(o.classes));
        spec.n = o.n;
        spec.class_sizes = o.m;
        spec.rank = o.rank;
        spec.C = default_class_matrix(o.classes, o.rank);
        spec.p = o.p;
        spec.seed = o.seed;
    }
    return spec;
}

inline io::Meta spec_meta(const GeneratorSpec& spec) {
    io::Meta meta;
    meta.emplace_back("kind", "truth");
    meta.emplace_back("n", std::to_string(spec.n));
    meta.emplace_back("m", io::join(spec.class_sizes));
    meta.emplace_back("classes", std::to_string(spec.class_count()));
    meta.emplace_back("rank", std::to_string(spec.rank));
    for (int a = 0; a < spec.class_count(); ++a) {
        std::string row;
        for (Index s = 0; s < spec.C.cols(); ++s) row += spec.C(a, s) ? '1' : '0';
        meta.emplace_back("C_" + std::to_string(a), row);
    }
    meta.emplace_back("p", io::format_double(spec.p));
    meta.emplace_back("seed", std::to_string(spec.seed));
    return meta;
}

/// Writes data.txt, labels.txt and the planted model (a model directory) to out.
inline void write_instance(const fs::path& out, const GroundTruth& gt) {
    const std::vector<int> labels = gt.truth.partition.row_class();
    io::Meta meta = spec_meta(gt.spec);
    meta.emplace_back("nnz", std::to_string(gt.data.nnz()));
    meta.emplace_back("flipped", std::to_string(gt.flipped));
    meta.emplace_back("rss", std::to_string(gt.flipped));
    io::write_model_dir(out, gt.truth, labels, meta);
    io::write_data(out / "data.txt", gt.data);
}

inline int cmd_generate(const GenerateOptions& o, std::ostream& err = std::cerr) {
    return guarded(err, [&] {
        const GroundTruth gt = generate(make_spec(o));
        write_instance(o.out, gt);
        return kOk;
    });
}

/// Data in canonical row order plus what is needed to map results back.
struct LoadedData {
    SparseBinaryMatrix data;   // canonical rows, all columns
    std::vector<int> labels;   // original order
    CanonicalOrder order;
};

inline LoadedData load_labeled(const fs::path& data, const fs::path& labels) {
    LoadedData out;
    const SparseBinaryMatrix raw = io::read_data(data);
    out.labels = io::read_labels(labels);
    if (static_cast<Index>(out.labels.size()) != raw.rows())
        throw ParseError("labels file has " + std::to_string(out.labels.size()) + " entries for " +
                         std::to_string(raw.rows()) + " rows");
    try {
        out.order = canonicalize(out.labels);
    } catch (const InvalidInput& e) {
        throw ParseError(labels.string() + ": " + e.what());
    }
    out.data = raw.permute_rows(out.order.permutation);
    return out;
}

inline CsaltConfig make_config(const FactorizeOptions& o) {
    CsaltConfig cfg;
    cfg.delta_r = o.delta_r;
    cfg.palm.gamma = o.gamma;
    cfg.palm.max_iterations = o.max_iter;
    cfg.palm.window = std::min(o.window, o.max_iter);
    cfg.palm.min_avg_decrease = o.min_decrease;
    cfg.max_rank = o.max_rank;
    cfg.seed = o.seed;
    return cfg;
}

inline int cmd_factorize(const FactorizeOptions& o, std::ostream& err = std::cerr) {
    return guarded(err, [&] {
        const auto t0 = std::chrono::steady_clock::now();
        const LoadedData in = load_labeled(o.data, o.labels);
        const ColumnFilter filter = drop_empty_columns(in.data);
        std::vector<Index> dropped;
        for (Index i = 0, k = 0; i < filter.original_cols; ++i) {
            if (k < static_cast<Index>(filter.kept.size()) && filter.kept[static_cast<std::size_t>(k)] == i) ++k;
            else dropped.push_back(i);
        }
        if (!dropped.empty())
            err << "warning: dropping " << dropped.size() << " of " << filter.original_cols
                << " columns with no ones\n";

        CsaltConfig cfg = make_config(o);
        cfg.log = &err;
        const ObjectiveContext ctx(filter.data, in.order.partition);
        const FactorizeResult res = o.no_alterations ? factorize_unsupervised(ctx, cfg) : factorize(ctx, cfg);
        const FactorModel model = expand_items(res.model, filter);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        io::Meta meta;
        meta.emplace_back("kind", "model");
        meta.emplace_back("n", std::to_string(filter.original_cols));
        meta.emplace_back("classes", std::to_string(model.class_count()));
        meta.emplace_back("rank", std::to_string(model.rank()));
        meta.emplace_back("class_ranks", io::join(res.class_ranks));
        meta.emplace_back("f", io::format_double(res.f));
        meta.emplace_back("rss", std::to_string(res.rss));
        meta.emplace_back("delta_r", std::to_string(o.delta_r));
        meta.emplace_back("gamma", io::format_double(o.gamma));
        meta.emplace_back("max_iter", std::to_string(o.max_iter));
        meta.emplace_back("window", std::to_string(cfg.palm.window));
        meta.emplace_back("min_decrease", io::format_double(o.min_decrease));
        meta.emplace_back("max_rank", std::to_string(o.max_rank));
        meta.emplace_back("alterations", o.no_alterations ? "0" : "1");
        meta.emplace_back("seed", std::to_string(o.seed));
        meta.emplace_back("stages", std::to_string(res.stages.size()));
        meta.emplace_back("dropped_columns", io::join(dropped));
        meta.emplace_back("wall_time_s", io::format_double(wall));
        io::write_model_dir(o.out, model, in.labels, meta);
        return kOk;
    });
}

/// Evaluates the model directory against the truth directory. RSS is taken
/// against the truth's data.txt when present, else from the model's meta.
inline EvalReport evaluate_dirs(const fs::path& model_dir, const fs::path& truth_dir) {
    const io::ModelDir model = io::read_model_dir(model_dir);
    const io::ModelDir truth = io::read_model_dir(truth_dir);
    if (model.labels != truth.labels) throw ParseError("model and truth label files differ");
    if (model.model.items() != truth.model.items()) throw ParseError("model and truth differ in the item count");

    std::size_t rss = 0;
    if (fs::exists(truth_dir / "data.txt")) {
        const LoadedData d = load_labeled(truth_dir / "data.txt", truth_dir / "labels.txt");
        rss = boolean_rss(d.data, model.model);
    } else if (const auto* v = io::find_meta(model.meta, "rss")) {
        rss = io::detail::parse_int<std::size_t>(*v, model_dir.string() + "/meta.txt");
    }
    return evaluate(truth.model, model.model, rss);
}

inline void print_report(std::ostream& out, const EvalReport& rep) {
    out << "F_avg=" << io::format_double(rep.f_avg) << '\n';
    for (std::size_t a = 0; a < rep.f_class.size(); ++a)
        out << "F_class_" << a << '=' << io::format_double(rep.f_class[a]) << '\n';
    out << "recV_avg=" << io::format_double(rep.recv_avg) << '\n';
    for (std::size_t a = 0; a < rep.recv_class.size(); ++a)
        out << "recV_class_" << a << '=' << io::format_double(rep.recv_class[a]) << '\n';
    out << "r_avg=" << io::format_double(rep.rank_avg) << '\n';
    for (std::size_t a = 0; a < rep.rank_class.size(); ++a)
        out << "r_class_" << a << '=' << rep.rank_class[a] << '\n';
    out << "RSS=" << rep.rss << '\n';
}

inline int cmd_evaluate(const EvaluateOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return guarded(err, [&] {
        print_report(out, evaluate_dirs(o.model, o.truth));
        return kOk;
    });
}

/// One benchmark instance: sweep value and the generator spec it maps to.
struct BenchPoint {
    double value = 0.0;
    GeneratorSpec spec;
};

struct BenchRow {
    double sweep_value = 0.0;
    std::uint64_t seed = 0;
    double f = 0.0;
    double recv = 0.0;
    double r = 0.0;
    double runtime_s = 0.0;
};

/// Desk-scale sweeps around n = m = 400, two classes, r* = 12, p = 0.1.
inline std::vector<BenchPoint> bench_points(const std::string& sweep, int repeats, std::uint64_t seed) {
    constexpr Index n = 400;
    constexpr Index m = 400;
    constexpr Index base_rank = 12;
    constexpr double base_p = 0.1;
    std::vector<BenchPoint> out;
    for (int k = 0; k < repeats; ++k) {
        const std::uint64_t s = seed + static_cast<std::uint64_t>(k);
        if (sweep == "noise") {
            for (double p : {0.0, 0.05, 0.10, 0.15, 0.20, 0.25}) out.push_back({p, default_spec(n, m, 2, base_rank, p, s)});
        } else if (sweep == "balance") {
            for (double ratio : {0.1, 0.2, 0.3, 0.4, 0.5}) {
                GeneratorSpec spec = default_spec(n, m, 2, base_rank, base_p, s);
                const auto m1 = static_cast<Index>(std::llround(ratio * static_cast<double>(m)));
                spec.class_sizes = {m1, m - m1};
                out.push_back({ratio, spec});
            }
        } else if (sweep == "rank") {
            for (Index r : {6, 15, 24, 33, 42})
                out.push_back({static_cast<double>(r), default_spec(n, m, 2, r, base_p, s)});
        } else if (sweep == "classes") {
            for (auto [c, r] : {std::pair<int, Index>{2, 12}, {3, 12}, {4, 15}})
                out.push_back({static_cast<double>(c), default_spec(n, m, c, r, base_p, s)});
        } else {
            throw InvalidInput("unknown sweep '" + sweep + "' (noise, balance, rank or classes)");
        }
    }
    return out;
}

/// Generate, factorize with the default configuration, evaluate.
inline BenchRow run_bench_point(const BenchPoint& pt) {
    const auto t0 = std::chrono::steady_clock::now();
    const GroundTruth gt = generate(pt.spec);
    const ColumnFilter filter = drop_empty_columns(gt.data);
    const ObjectiveContext ctx(filter.data, gt.truth.partition);
    CsaltConfig cfg;
    cfg.seed = pt.spec.seed;
    const FactorizeResult res = factorize(ctx, cfg);
    const FactorModel model = expand_items(res.model, filter);
    const EvalReport rep = evaluate(gt.truth, model, res.rss);
    BenchRow row;
    row.sweep_value = pt.value;
    row.seed = pt.spec.seed;
    row.f = rep.f_avg;
    row.recv = rep.recv_avg;
    row.r = rep.rank_avg;
    row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

/// Worker count from CSALT_THREADS, else the hardware concurrency.
inline unsigned bench_threads() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("CSALT_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) n = static_cast<unsigned>(v);
    }
    return n;
}

inline std::vector<BenchRow> run_bench(const std::vector<BenchPoint>& points, unsigned threads) {
    std::vector<BenchRow> rows(points.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t k; (k = next++) < points.size();) {
            try {
                rows[k] = run_bench_point(points[k]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(points.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    std::sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
        return a.sweep_value != b.sweep_value ? a.sweep_value < b.sweep_value : a.seed < b.seed;
    });
    return rows;
}

inline void write_bench_csv(const fs::path& path, const std::vector<BenchRow>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << "sweep_value,seed,F,recV,r,runtime_s\n";
    for (const auto& r : rows)
        out << io::format_double(r.sweep_value) << ',' << r.seed << ',' << io::format_double(r.f) << ','
            << io::format_double(r.recv) << ',' << io::format_double(r.r) << ',' << io::format_double(r.runtime_s)
            << '\n';
}

inline int cmd_bench(const BenchOptions& o, std::ostream& err = std::cerr) {
    return guarded(err, [&] {
        if (o.repeats < 1) throw InvalidInput("--repeats must be at least 1");
        const auto points = bench_points(o.sweep, o.repeats, o.seed);
        write_bench_csv(o.out, run_bench(points, bench_threads()));
        return kOk;
    });
}

} // namespace csalt::cli
