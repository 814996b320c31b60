// dechbo: command-line front end for runs, sweeps, the regret table and audits.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "dechbo/dechbo.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitMissingFile = 2;
constexpr int kExitSchema = 3;
constexpr int kExitNumerical = 4;

constexpr const char* kVersion = "0.1.0";
constexpr const char* kOutEnv = "DECHBO_OUT_DIR";

struct MissingFile : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> iterations;
    int jobs = 1;
    bool quiet = false;
};

fs::path output_dir(const Options& o) {
    if (!o.out.empty()) return o.out;
    if (const char* env = std::getenv(kOutEnv); env && *env) return env;
    return "dechbo_out";
}

json read_json_file(const std::string& path) {
    if (path.empty()) throw dechbo::ConfigError("--config is required");
    if (!fs::exists(path)) throw MissingFile("config file not found: " + path);
    return dechbo::config::load_json(path);
}

void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << text;
}

void apply_overrides(dechbo::RunConfig& cfg, const Options& o) {
    if (o.seed) cfg.seed = *o.seed;
    if (o.iterations) cfg.iterations = *o.iterations;
    cfg.validate();
}

json manifest(const dechbo::RunConfig& resolved, const std::string& command) {
    json j = dechbo::config::to_json(resolved);
    const auto dec = dechbo::resolve_decomposition(resolved, dechbo::build_dims(resolved));
    j["meta"] = {{"tool", "dechbo"}, {"version", kVersion}, {"command", command}, {"decomposition", dec.to_json()}};
    return j;
}

struct RunSummary {
    std::optional<double> simple_regret;
    std::optional<double> cumulative_regret;
    double best = 0.0;
};

/// Manifest first, then the trace: the manifest alone reproduces the run.
RunSummary execute(const dechbo::RunConfig& cfg, const fs::path& dir, const std::string& command) {
    const auto resolved = dechbo::resolved_config(cfg);
    write_text(dir / "manifest.json", manifest(resolved, command).dump(2) + "\n");
    const auto trace = dechbo::run(resolved);
    std::ostringstream csv;
    dechbo::write_trace_csv(csv, trace);
    write_text(dir / "trace.csv", csv.str());
    std::string log;
    for (const auto& line : trace.log) log += line + "\n";
    write_text(dir / "log.txt", log);
    RunSummary s;
    s.best = trace.records.back().best;
    if (trace.has_regret) {
        s.simple_regret = trace.final_simple_regret();
        s.cumulative_regret = trace.records.back().R;
    }
    return s;
}

/// Runs `n` jobs on up to `workers` threads. The first exception is rethrown after all workers stop.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& job) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first;
    std::mutex m;
    auto worker = [&] {
        for (std::size_t i; (i = next++) < n;) {
            try {
                job(i);
            } catch (...) {
                std::lock_guard lock(m);
                if (!first) first = std::current_exception();
                next = n;
            }
        }
    };
    const int w = std::max(1, std::min<int>(workers, static_cast<int>(n)));
    std::vector<std::thread> pool;
    for (int k = 1; k < w; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
}

std::string fmt(std::optional<double> v) {
    if (!v) return "";
    std::ostringstream os;
    os.precision(17);
    os << *v;
    return os.str();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_run(const Options& o) {
    auto cfg = dechbo::config::from_json(read_json_file(o.config));
    apply_overrides(cfg, o);
    const fs::path dir = output_dir(o);
    const auto s = execute(cfg, dir, "run");
    if (!o.quiet) {
        std::cout << "wrote " << (dir / "trace.csv").string() << "\n";
        if (s.simple_regret) std::cout << "final simple regret " << *s.simple_regret << ", cumulative regret " << *s.cumulative_regret << "\n";
        else std::cout << "best value " << s.best << "\n";
    }
    return kExitOk;
}

struct Job {
    std::string name;
    std::string group;
    dechbo::RunConfig cfg;
    RunSummary result;
};

void run_jobs(std::vector<Job>& jobs, const fs::path& root, const Options& o, const std::string& command) {
    std::mutex io;
    parallel_for(jobs.size(), o.jobs, [&](std::size_t i) {
        jobs[i].result = execute(jobs[i].cfg, root / jobs[i].name, command);
        if (!o.quiet) {
            std::lock_guard lock(io);
            std::cout << jobs[i].name << ": simple regret " << fmt(jobs[i].result.simple_regret) << "\n";
        }
    });
}

/// Sweep document: {"base": <run config>, "seeds": [...], "algorithms": [...], "max_factor_sizes": [...]}.
int cmd_sweep(const Options& o) {
    const json doc = read_json_file(o.config);
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> algorithms;
    std::vector<int> sizes;
    dechbo::RunConfig base;
    try {
        dechbo::config::detail::check_keys(doc, "sweep", {"base", "seeds", "algorithms", "max_factor_sizes"});
        base = dechbo::config::from_json(doc.at("base"));
        seeds = doc.value("seeds", std::vector<std::uint64_t>{base.seed});
        algorithms = doc.value("algorithms", std::vector<std::string>{dechbo::to_string(base.algorithm)});
        sizes = doc.value("max_factor_sizes", std::vector<int>{base.decomposition.max_factor_size});
    } catch (const json::exception& e) {
        throw dechbo::ConfigError(std::string("sweep: ") + e.what());
    }
    if (o.seed) seeds = {*o.seed};
    std::vector<Job> jobs;
    for (const auto& a : algorithms)
        for (int m : sizes)
            for (auto s : seeds) {
                Job j;
                j.cfg = base;
                j.cfg.algorithm = dechbo::algorithm_from_string(a);
                j.cfg.decomposition.max_factor_size = m;
                j.cfg.seed = s;
                if (o.iterations) j.cfg.iterations = *o.iterations;
                j.cfg.validate();
                j.group = a + "_mf" + std::to_string(m);
                j.name = j.group + "_seed" + std::to_string(s);
                jobs.push_back(std::move(j));
            }
    const fs::path root = output_dir(o);
    run_jobs(jobs, root, o, "sweep");
    std::ostringstream csv;
    csv << "run,algorithm,max_factor_size,seed,final_simple_regret,cumulative_regret,best\n";
    for (const auto& j : jobs)
        csv << j.name << ',' << dechbo::to_string(j.cfg.algorithm) << ',' << j.cfg.decomposition.max_factor_size << ','
            << j.cfg.seed << ',' << fmt(j.result.simple_regret) << ',' << fmt(j.result.cumulative_regret) << ','
            << fmt(j.result.best) << '\n';
    write_text(root / "summary.csv", csv.str());
    if (!o.quiet) std::cout << "wrote " << (root / "summary.csv").string() << "\n";
    return kExitOk;
}

/// Defaults shared by every cell of the regret table.
dechbo::RunConfig table1_base() {
    dechbo::RunConfig c;
    c.iterations = 150;
    c.initial_evaluations = 5;
    c.maxsum.max_rounds = 30;
    c.beta.mode = dechbo::BetaMode::FixedConstant;
    c.beta.fixed_value = 2.0;
    c.grid = {2, 16};
    c.kernel = {1.0, 0.2};
    c.noise_variance = 1e-2;
    c.decomposition.mode = dechbo::DecompositionMode::Random;
    return c;
}

int cmd_table1(const Options& o) {
    dechbo::RunConfig base = table1_base();
    if (!o.config.empty()) base = dechbo::config::from_json(read_json_file(o.config));
    if (o.iterations) base.iterations = *o.iterations;
    const std::uint64_t first_seed = o.seed.value_or(1);
    const std::vector<std::string> objectives{"shekel4", "hartmann6", "michalewicz10"};
    struct Variant {
        std::string name;
        dechbo::Algorithm algorithm;
        int max_factor_size;
    };
    const std::vector<Variant> variants{{"MF2", dechbo::Algorithm::DecHbo, 2},
                                        {"MF3", dechbo::Algorithm::DecHbo, 3},
                                        {"add_gp_ucb", dechbo::Algorithm::AddIndependent, 1}};
    constexpr int kSeeds = 5;
    std::vector<Job> jobs;
    for (const auto& obj : objectives)
        for (const auto& v : variants)
            for (int k = 0; k < kSeeds; ++k) {
                Job j;
                j.cfg = base;
                j.cfg.objective.name = obj;
                j.cfg.algorithm = v.algorithm;
                j.cfg.decomposition.mode = dechbo::DecompositionMode::Random;
                j.cfg.decomposition.subsets.clear();
                j.cfg.decomposition.max_factor_size = v.max_factor_size;
                j.cfg.seed = first_seed + static_cast<std::uint64_t>(k);
                j.cfg.validate();
                j.group = obj + "," + v.name;
                j.name = obj + "_" + v.name + "_seed" + std::to_string(j.cfg.seed);
                jobs.push_back(std::move(j));
            }
    const fs::path root = output_dir(o);
    run_jobs(jobs, root, o, "table1");
    std::ostringstream csv;
    csv << "objective,variant,median_simple_regret,mean_simple_regret";
    for (int k = 0; k < kSeeds; ++k) csv << ",seed_" << first_seed + static_cast<std::uint64_t>(k);
    csv << '\n';
    for (std::size_t g = 0; g < jobs.size(); g += kSeeds) {
        std::vector<double> r;
        for (int k = 0; k < kSeeds; ++k) r.push_back(*jobs[g + static_cast<std::size_t>(k)].result.simple_regret);
        double mean = 0.0;
        for (double v : r) mean += v / kSeeds;
        csv << jobs[g].group << ',' << fmt(median(r)) << ',' << fmt(mean);
        for (double v : r) csv << ',' << fmt(v);
        csv << '\n';
    }
    write_text(root / "table1.csv", csv.str());
    if (!o.quiet) std::cout << csv.str() << "wrote " << (root / "table1.csv").string() << "\n";
    return kExitOk;
}

int cmd_selftest(const Options& o) {
    const auto checks = dechbo::selftest::run();
    if (!o.quiet) dechbo::selftest::print(std::cout, checks);
    const bool ok = dechbo::selftest::all_passed(checks);
    if (!o.quiet) std::cout << (ok ? "all checks passed" : "some checks FAILED") << "\n";
    return ok ? kExitOk : kExitFailure;
}

int cmd_dump_constants(const Options& o) {
    const std::string text = dechbo::bench::dump_constants().dump(2) + "\n";
    const fs::path p = output_dir(o) / "constants.json";
    write_text(p, text);
    if (!o.quiet) std::cout << text;
    return kExitOk;
}

int guarded(const std::function<int()>& fn) {
    try {
        return fn();
    } catch (const MissingFile& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMissingFile;
    } catch (const dechbo::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitSchema;
    } catch (const dechbo::NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << " (jitter " << e.attempted_jitter() << ")\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DEC-HBO: decentralized high-dimensional Bayesian optimization"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    Options o;
    std::uint64_t seed = 0;
    int iterations = 0;
    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", o.config, "configuration file (JSON)");
        if (needs_config) c->required();
        sub->add_option("--out", o.out, std::string("output directory (default: $") + kOutEnv + " or ./dechbo_out)");
        sub->add_option("--seed", seed, "override the seed");
        sub->add_option("--jobs", o.jobs, "worker threads for independent runs")->check(CLI::PositiveNumber);
        sub->add_flag("--quiet", o.quiet, "suppress progress output");
    };

    auto* run = app.add_subcommand("run", "run one configuration and write manifest.json and trace.csv");
    add_common(run, true);
    run->add_option("--iterations", iterations, "override the number of BO iterations");
    auto* sweep = app.add_subcommand("sweep", "run a grid of seeds/algorithms/factor sizes");
    add_common(sweep, true);
    sweep->add_option("--iterations", iterations, "override the number of BO iterations");
    auto* table1 = app.add_subcommand("table1", "regret table: 3 benchmarks x {MF2, MF3, additive baseline} x 5 seeds");
    add_common(table1, false);
    table1->add_option("--iterations", iterations, "override the number of BO iterations");
    auto* self = app.add_subcommand("selftest", "oracle and invariant checks");
    add_common(self, false);
    auto* dump = app.add_subcommand("dump-constants", "write benchmark constant tables");
    add_common(dump, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    for (auto* sub : {run, sweep, table1, self, dump}) {
        if (!sub->parsed()) continue;
        if (sub->count("--seed")) o.seed = seed;
        if (sub->get_option_no_throw("--iterations") && sub->count("--iterations")) o.iterations = iterations;
    }

    if (run->parsed()) return guarded([&] { return cmd_run(o); });
    if (sweep->parsed()) return guarded([&] { return cmd_sweep(o); });
    if (table1->parsed()) return guarded([&] { return cmd_table1(o); });
    if (self->parsed()) return guarded([&] { return cmd_selftest(o); });
    if (dump->parsed()) return guarded([&] { return cmd_dump_constants(o); });
    return kExitFailure;
}
