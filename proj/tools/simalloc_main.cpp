#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "simalloc/config.hpp"
#include "simalloc/engine.hpp"
#include "simalloc/error.hpp"
#include "simalloc/report.hpp"
#include "simalloc/trace.hpp"
#include "simalloc/workload.hpp"

namespace fs = std::filesystem;
using namespace simalloc;

namespace {

struct WorkloadFlags {
    std::string kind;
    std::uint32_t threads = 1;
    std::uint64_t ops = 100000;
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> min_size, max_size, gap;
    std::optional<double> shape, cross;
    std::optional<std::uint32_t> window;

    void add(CLI::App& cmd, bool required) {
        auto* w = cmd.add_option("--workload", kind,
                                 "larson, xmalloc, scratch, shbench, mstress, alloctest, "
                                 "producer-consumer or uniform");
        if (required) w->required();
        cmd.add_option("--threads", threads, "logical threads")->check(CLI::Range(1, 64));
        cmd.add_option("--ops", ops, "malloc + free calls to generate");
        cmd.add_option("--seed", seed, "generator seed");
        cmd.add_option("--min-size", min_size);
        cmd.add_option("--max-size", max_size);
        cmd.add_option("--shape", shape, "Pareto shape (alloctest)");
        cmd.add_option("--cross-fraction", cross, "fraction of frees done by another thread");
        cmd.add_option("--window", window);
        cmd.add_option("--gap", gap, "mean compute cycles between calls");
    }

    Trace make() const {
        WorkloadSpec s = WorkloadSpec::defaults(parse_workload_kind(kind), threads, ops, seed);
        if (min_size) s.min_size = *min_size;
        if (max_size) s.max_size = *max_size;
        if (gap) s.compute_gap = *gap;
        if (shape) s.pareto_shape = *shape;
        if (cross) s.cross_free_fraction = *cross;
        if (window) s.window = *window;
        return generate(s);
    }
};

struct RunFlags {
    std::string trace_path;
    std::string config_path;
    std::string allocator;
    std::vector<std::string> settings;
    std::string out;
    WorkloadFlags workload;

    void add(CLI::App& cmd) {
        cmd.add_option("--trace", trace_path, "trace file");
        cmd.add_option("--config", config_path, "key=value config file");
        cmd.add_option("--allocator", allocator, "speedmalloc, tiered, threadlocal or idlecore");
        cmd.add_option("--set", settings, "override one key, e.g. hw.l2_ways=8");
        cmd.add_option("--out", out, "output directory");
        workload.add(cmd, false);
    }

    Trace trace() const {
        if (!trace_path.empty()) {
            if (!workload.kind.empty()) throw ConfigError("give either --trace or --workload");
            return load_trace(trace_path);
        }
        if (workload.kind.empty()) throw ConfigError("one of --trace or --workload is required");
        return workload.make();
    }

    RunConfig config() const {
        RunConfig c = config_path.empty() ? RunConfig{} : load_config(config_path);
        for (const auto& s : settings) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
            apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
        }
        if (!allocator.empty()) c.sim.allocator.kind = parse_allocator_kind(allocator);
        c.check();
        return c;
    }
};

void emit(const std::string& out_dir, const std::string& csv, const std::string& md) {
    if (out_dir.empty()) {
        std::cout << csv;
        return;
    }
    fs::create_directories(out_dir);
    write_file((fs::path(out_dir) / "metrics.csv").string(), csv);
    write_file((fs::path(out_dir) / "report.md").string(), md);
}

int cmd_gen(const WorkloadFlags& w, const std::string& out) {
    const Trace t = w.make();
    if (out.empty())
        write_trace(t, std::cout);
    else
        save_trace(t, out);
    return 0;
}

int cmd_run(const RunFlags& f) {
    const Trace trace = f.trace();
    const RunConfig config = f.config();
    const Metrics m = simulate(trace, config.sim);
    CsvTable table{metrics_header(), {metrics_row(std::string(to_string(m.kind)), m, config.power)}};
    emit(f.out, to_csv(table), markdown_report("Run: " + std::string(to_string(m.kind)), m, config));
    return 0;
}

int cmd_compare(const std::string& a_path, const std::string& b_path, const std::string& out) {
    const CsvTable a = load_csv(a_path);
    const CsvTable b = load_csv(b_path);
    if (a.rows.empty() || b.rows.empty()) throw Error("compare: empty metrics file");
    CsvTable cmp{compare_header(), {}};
    cmp.rows.push_back(compare_row(a, 0, b, 0));
    emit(out, to_csv(cmp), markdown_compare(a, b, cmp));
    return 0;
}

int cmd_sweep(const RunFlags& f, const std::string& key, const std::string& values) {
    const Trace trace = f.trace();
    const RunConfig base = f.config();
    const std::string qualified = resolve_key(key);
    std::vector<std::string> points;
    for (std::size_t start = 0;;) {
        const auto comma = values.find(',', start);
        points.push_back(values.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    CsvTable table{metrics_header(), {}};
    std::string md = "# Sweep of " + qualified + "\n\n";
    for (const auto& v : points) {
        RunConfig c = base;
        apply_setting(c, qualified, v);
        c.check();
        const Metrics m = simulate(trace, c.sim);
        table.rows.push_back(metrics_row(qualified + "=" + v, m, c.power));
    }
    CsvTable summary{{"point", "total_cycles", "server_meta_l1_miss_cycles", "energy"}, {}};
    for (const auto& r : table.rows)
        summary.rows.push_back({r[table.column("label")], r[table.column("total_cycles")],
                                r[table.column("server_meta_l1_miss_cycles")],
                                r[table.column("energy")]});
    md += markdown_table(summary);
    emit(f.out, to_csv(table), md);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trace-driven allocator offload simulator"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen", "generate a synthetic trace");
    WorkloadFlags gen_flags;
    std::string gen_out;
    gen_flags.add(*gen, true);
    gen->add_option("--out", gen_out, "trace file (stdout when omitted)");

    auto* run = app.add_subcommand("run", "simulate one allocator on a trace");
    RunFlags run_flags;
    run_flags.add(*run);

    auto* cmp = app.add_subcommand("compare", "relative report of two metrics files");
    std::string a_path, b_path, cmp_out;
    cmp->add_option("--a", a_path, "candidate metrics.csv")->required();
    cmp->add_option("--b", b_path, "baseline metrics.csv")->required();
    cmp->add_option("--out", cmp_out, "output directory");

    auto* sweep = app.add_subcommand("sweep", "one run per value of a config key");
    RunFlags sweep_flags;
    std::string sweep_key, sweep_values;
    sweep_flags.add(*sweep);
    sweep->add_option("--key", sweep_key, "config key, e.g. sc_l1_size")->required();
    sweep->add_option("--values", sweep_values, "comma separated values")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*gen) return cmd_gen(gen_flags, gen_out);
        if (*run) return cmd_run(run_flags);
        if (*cmp) return cmd_compare(a_path, b_path, cmp_out);
        if (*sweep) return cmd_sweep(sweep_flags, sweep_key, sweep_values);
    } catch (const std::exception& e) {
        std::cerr << "simalloc: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
