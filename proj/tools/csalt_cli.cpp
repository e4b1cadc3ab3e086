#include "csalt/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace csalt::cli;

    CLI::App app{"Class-aware Boolean matrix factorization with class-specific alterations"};
    app.require_subcommand(1);

    GenerateOptions gen;
    auto* g = app.add_subcommand("generate", "Draw a planted instance and write data, labels and truth");
    g->add_option("--n", gen.n, "Number of items")->required();
    g->add_option("--m", gen.m, "Rows per class (comma list), or one total split evenly")
        ->required()
        ->delimiter(',');
    g->add_option("--rank", gen.rank, "Planted rank")->capture_default_str();
    g->add_option("--classes", gen.classes, "Number of classes (2, 3 or 4)")->capture_default_str();
    g->add_option("--p", gen.p, "Bit flip probability")->capture_default_str();
    g->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
    g->add_option("--out", gen.out, "Output directory")->required();

    FactorizeOptions fac;
    auto* f = app.add_subcommand("factorize", "Factorize a labeled data file");
    f->add_option("--data", fac.data, "Data file")->required();
    f->add_option("--labels", fac.labels, "Labels file")->required();
    f->add_option("--delta-r", fac.delta_r, "Rank increment per stage")->capture_default_str();
    f->add_option("--gamma", fac.gamma, "Step size factor (> 1)")->capture_default_str();
    f->add_option("--max-iter", fac.max_iter, "Sweep budget per stage")->capture_default_str();
    f->add_option("--window", fac.window, "Convergence window")->capture_default_str();
    f->add_option("--min-decrease", fac.min_decrease, "Minimum mean decrease over the window")
        ->capture_default_str();
    f->add_option("--max-rank", fac.max_rank, "Largest rank tried")->capture_default_str();
    f->add_flag("--no-alterations", fac.no_alterations, "Keep every V block at zero");
    f->add_option("--seed", fac.seed, "Random seed")->capture_default_str();
    f->add_option("--out", fac.out, "Output model directory")->required();

    EvaluateOptions ev;
    auto* e = app.add_subcommand("evaluate", "Compare a model directory with a planted truth");
    e->add_option("--model", ev.model, "Model directory")->required();
    e->add_option("--truth", ev.truth, "Truth directory")->required();

    BenchOptions be;
    auto* b = app.add_subcommand("bench", "Run a recovery sweep and write CSV");
    b->add_option("--sweep", be.sweep, "noise, balance, rank or classes")
        ->required()
        ->check(CLI::IsMember({"noise", "balance", "rank", "classes"}));
    b->add_option("--repeats", be.repeats, "Instances per sweep point")->capture_default_str();
    b->add_option("--seed", be.seed, "First seed")->capture_default_str();
    b->add_option("--out", be.out, "CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : kBadInput;
    }

    if (*g) return cmd_generate(gen);
    if (*f) return cmd_factorize(fac);
    if (*e) return cmd_evaluate(ev);
    return cmd_bench(be);
}
