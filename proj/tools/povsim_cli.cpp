#include <cctype>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include <povsim/config.hpp>
#include <povsim/io.hpp>

namespace fs = std::filesystem;
using namespace povsim;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string preset;
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int workers = 0;
    std::string out;
    bool unsafe = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "Key=value config file");
    cmd->add_option("--preset", o.preset, "Built-in preset: desk or paper");
    cmd->add_option("--set", o.sets, "Override a config key, e.g. --set theta_hi=0.15");
    cmd->add_option("--seed", o.seed, "Master seed")->each([&](const std::string&) {
        o.seed_given = true;
    });
    cmd->add_option("--workers", o.workers, "Worker threads");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_flag("--unsafe", o.unsafe, "Allow values outside the calibrated bounds");
}

RunConfig build_config(const CommonOpts& o, bool need_seed) {
    RunConfig c;
    if (!o.preset.empty()) apply_preset(c, o.preset);
    if (!o.config_path.empty()) {
        std::string text;
        try {
            text = io::read_text_file(o.config_path);
        } catch (const io::DataError& e) {
            throw std::invalid_argument(e.what());
        }
        apply_config_text(c, text, o.config_path);
    }
    for (const std::string& kv : o.sets) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        set_config_key(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.seed_given) c.master_seed = o.seed;
    if (o.workers > 0) c.workers = o.workers;
    if (!o.out.empty()) c.out_dir = o.out;
    if (o.unsafe) c.unsafe = true;
    validate_config(c);
    if (need_seed && !c.master_seed)
        throw std::invalid_argument("this command needs a master seed (--seed or master_seed=)");
    return c;
}

std::string out_path(const RunConfig& c, const std::string& name) {
    std::error_code ec;
    fs::create_directories(c.out_dir, ec);
    if (ec) throw io::DataError("cannot create output directory " + c.out_dir);
    return (fs::path(c.out_dir) / name).string();
}

void write_config_echo(const RunConfig& c) {
    std::string text = "# config_digest=" + config_digest(c) + "\n";
    text += serialize_config(c);
    text += "master_seed=" + (c.master_seed ? std::to_string(*c.master_seed) : "unset") + "\n";
    io::atomic_write(out_path(c, "config_echo.txt"), text);
}

ExperimentDesign design_of(const RunConfig& c) {
    return saltelli_design(c.base_samples, c.fixed.bounds, *c.master_seed, c.rep_count);
}

void check_results_match(const io::ResultsFile& f, const RunConfig& c,
                         const std::string& path) {
    const auto it = f.headers.find("config_digest");
    if (it != f.headers.end() && it->second != config_digest(c))
        throw io::DataError(path + " was produced with a different config (digest " +
                            it->second + ", current " + config_digest(c) + ")");
    const auto ms = f.headers.find("master_seed");
    if (ms != f.headers.end() && c.master_seed &&
        ms->second != std::to_string(*c.master_seed))
        throw io::DataError(path + " was produced with a different master seed (" +
                            ms->second + ", current " + std::to_string(*c.master_seed) + ")");
}

std::string results_path_of(const RunConfig& c, const std::string& explicit_path) {
    if (!explicit_path.empty()) return explicit_path;
    return (fs::path(c.out_dir) / "results.jsonl").string();
}

io::Meta meta_from_headers(const io::ResultsFile& f) {
    auto get = [&](const char* k) {
        const auto it = f.headers.find(k);
        return it == f.headers.end() ? std::string("unknown") : it->second;
    };
    return {{"config_digest", get("config_digest")}, {"master_seed", get("master_seed")}};
}

std::string regime_tag(Regime r) {
    std::string s = regime_name(r);
    for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
}

int cmd_design(const CommonOpts& o) {
    const RunConfig c = build_config(o, true);
    const ExperimentDesign design = design_of(c);
    io::write_design_csv(out_path(c, "design.csv"), design, io::provenance(c));
    write_config_echo(c);
    std::cout << "design.csv: " << design.row_count() << " rows ("
              << c.base_samples << " base samples x 7), " << design.run_count()
              << " runs at rep_count " << c.rep_count << "\n";
    return 0;
}

int cmd_run(const CommonOpts& o, const std::vector<std::string>& dumps) {
    const RunConfig c = build_config(o, true);
    const ExperimentDesign design = design_of(c);
    const std::string results_path = out_path(c, "results.jsonl");
    const io::Meta meta = io::provenance(c);

    std::vector<RunRecord> previous;
    std::set<std::pair<int, int>> done;
    if (io::file_exists(results_path)) {
        io::ResultsFile f = io::read_results_jsonl(results_path);
        check_results_match(f, c, results_path);
        for (const auto& [row, rep] : f.done)
            if (row < 0 || row >= design.row_count() || rep < 0 || rep >= c.rep_count)
                throw io::DataError(results_path + " contains row " + std::to_string(row) +
                                    " rep " + std::to_string(rep) +
                                    " outside the current design");
        previous = std::move(f.records);
        done = std::move(f.done);
    }

    const int total = design.run_count();
    std::cout << "runs: " << total << ", already complete: " << done.size() << "\n";

    EnsembleOptions eopt;
    eopt.workers = c.workers;
    eopt.skip = &done;
    int completed = 0;
    std::vector<RunRecord> fresh;
    eopt.on_complete = [&](const RunRecord& rec) {
        fresh.push_back(rec);
        ++completed;
        if (completed % 32 == 0) {
            std::vector<RunRecord> snapshot = previous;
            snapshot.insert(snapshot.end(), fresh.begin(), fresh.end());
            io::write_results_jsonl(results_path, snapshot, meta);
            std::cout << "progress " << (done.size() + completed) << "/" << total
                      << std::endl;
        }
    };
    std::vector<RunRecord> produced = run_ensemble(design, c.fixed, eopt);

    std::vector<RunRecord> all = std::move(previous);
    all.insert(all.end(), produced.begin(), produced.end());
    io::write_results_jsonl(results_path, all, meta);
    io::write_design_csv(out_path(c, "design.csv"), design, meta);
    write_config_echo(c);

    long ok = 0, failed = 0;
    long by_regime[3] = {};
    for (const auto& rec : all) {
        if (!rec.ok) {
            ++failed;
            continue;
        }
        ++ok;
        ++by_regime[static_cast<int>(rec.individual_regime)];
    }
    std::cout << "complete: " << all.size() << " records (" << ok << " ok, " << failed
              << " failed)\n";
    for (int g = 0; g < 3; ++g)
        std::cout << "  " << regime_name(static_cast<Regime>(g)) << ": " << by_regime[g]
                  << "\n";

    for (const std::string& spec_str : dumps) {
        const std::size_t colon = spec_str.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("--dump-wealth expects ROW:REP, got '" + spec_str + "'");
        int row = 0, rep = 0;
        try {
            row = static_cast<int>(povsim::detail::parse_int(spec_str.substr(0, colon)));
            rep = static_cast<int>(povsim::detail::parse_int(spec_str.substr(colon + 1)));
        } catch (const std::exception&) {
            throw std::invalid_argument("--dump-wealth expects ROW:REP, got '" + spec_str + "'");
        }
        if (row < 0 || row >= design.row_count() || rep < 0 || rep >= c.rep_count)
            throw std::invalid_argument("--dump-wealth " + spec_str + " is outside the design");
        const std::uint64_t seed = run_seed(design, row, rep);
        const SimulationResult res = simulate(design.params_at(row), c.fixed, seed);
        io::Meta wm = meta;
        wm.emplace_back("row_id", std::to_string(row));
        wm.emplace_back("rep", std::to_string(rep));
        wm.emplace_back("run_seed", std::to_string(seed));
        io::write_wealth_csv(
            out_path(c, "wealth_row" + std::to_string(row) + "_rep" + std::to_string(rep) +
                            ".csv"),
            res, wm);
    }
    return 0;
}

int cmd_classify(const CommonOpts& o, const std::string& results_arg) {
    const RunConfig c = build_config(o, false);
    const std::string path = results_path_of(c, results_arg);
    const io::ResultsFile f = io::read_results_jsonl(path);
    io::write_regime_counts_csv(out_path(c, "regime_counts.csv"), f.records,
                                meta_from_headers(f));
    long counts[3][3] = {};
    long failed = 0;
    for (const auto& rec : f.records) {
        if (!rec.ok) {
            ++failed;
            continue;
        }
        ++counts[static_cast<int>(rec.community_regime)][static_cast<int>(rec.individual_regime)];
    }
    std::cout << "records: " << f.records.size() << " (" << failed << " failed)\n";
    for (int cg = 0; cg < 3; ++cg)
        for (int ig = 0; ig < 3; ++ig)
            if (counts[cg][ig] > 0)
                std::cout << "  community " << regime_name(static_cast<Regime>(cg))
                          << ", individual " << regime_name(static_cast<Regime>(ig)) << ": "
                          << counts[cg][ig] << "\n";
    return 0;
}

int cmd_sobol(const CommonOpts& o, const std::string& results_arg, int resamples) {
    const RunConfig c = build_config(o, true);
    const ExperimentDesign design = design_of(c);
    const std::string path = results_path_of(c, results_arg);
    const io::ResultsFile f = io::read_results_jsonl(path);
    check_results_match(f, c, path);

    const int total = design.run_count();
    std::vector<const RunRecord*> by_run(static_cast<std::size_t>(total), nullptr);
    for (const auto& rec : f.records)
        if (rec.ok && rec.row >= 0 && rec.row < design.row_count() && rec.rep >= 0 &&
            rec.rep < c.rep_count)
            by_run[static_cast<std::size_t>(rec.row) * c.rep_count + rec.rep] = &rec;
    int missing = 0;
    for (const auto* p : by_run)
        if (p == nullptr) ++missing;
    if (missing > 0)
        throw io::DataError(path + ": " + std::to_string(missing) + " of " +
                            std::to_string(total) +
                            " runs missing or failed; finish 'run' first");

    struct Qoi {
        const char* name;
        double (*get)(const RunRecord&);
    };
    const Qoi qois[] = {
        {"fraction_richer", [](const RunRecord& r) { return r.fraction_richer; }},
        {"final_gini", [](const RunRecord& r) { return r.final_gini; }},
        {"total_final_wealth", [](const RunRecord& r) { return r.total_final_wealth; }},
    };
    std::vector<std::pair<std::string, SobolIndices>> per_qoi;
    for (std::size_t qi = 0; qi < 3; ++qi) {
        std::vector<double> values(static_cast<std::size_t>(total));
        for (int k = 0; k < total; ++k)
            values[static_cast<std::size_t>(k)] = qois[qi].get(*by_run[static_cast<std::size_t>(k)]);
        const std::uint64_t boot_seed =
            derive_seed(*c.master_seed, streams::bootstrap, static_cast<std::uint64_t>(qi));
        per_qoi.emplace_back(qois[qi].name,
                             sobol_indices(design, values, resamples, boot_seed));
    }

    io::Meta meta = io::provenance(c);
    meta.emplace_back("bootstrap_resamples", std::to_string(resamples));
    io::write_sobol_csv(out_path(c, "sobol_indices.csv"), per_qoi, meta);

    for (const auto& [name, idx] : per_qoi) {
        std::size_t best = 0;
        for (std::size_t p = 1; p < idx.total.size(); ++p)
            if (idx.total[p] > idx.total[best]) best = p;
        std::cout << name << ": max total-order index " << free_param_names[best] << " ("
                  << idx.total[best] << ")" << (idx.degenerate ? " [degenerate]" : "") << "\n";
    }
    return 0;
}

int cmd_intervene(const CommonOpts& o, int row, InterventionSpec spec) {
    const RunConfig c = build_config(o, true);
    const ExperimentDesign design = design_of(c);
    if (row < 0 || row >= design.row_count())
        throw std::invalid_argument("--row " + std::to_string(row) +
                                    " outside the design (rows 0.." +
                                    std::to_string(design.row_count() - 1) + ")");
    spec.validate();
    const InterventionReport report =
        run_intervention(design.params_at(row), c.fixed, spec, *c.master_seed, row);
    io::write_intervention_csv(
        out_path(c, "intervention_row" + std::to_string(row) + ".csv"), report,
        io::provenance(c));
    std::cout << "row " << row << ": mean escape fraction " << report.mean_escape << " (sd "
              << report.sd_escape << ") over " << spec.reps << " reps\n";
    int zero_reps = 0;
    for (const auto& r : report.runs)
        if (*r.record.escape_fraction == 0.0) ++zero_reps;
    std::cout << "reps with zero escape: " << zero_reps << "/" << spec.reps << "\n";
    return 0;
}

int cmd_analyze(const CommonOpts& o, const std::string& results_arg) {
    const RunConfig c = build_config(o, false);
    const std::string path = results_path_of(c, results_arg);
    const io::ResultsFile f = io::read_results_jsonl(path);
    check_results_match(f, c, path);
    const io::Meta meta = meta_from_headers(f);

    const auto individual = regime_parameter_profile(f.records, c.fixed.bounds,
                                                     RegimeLevel::individual);
    const auto community = regime_parameter_profile(f.records, c.fixed.bounds,
                                                    RegimeLevel::community);
    io::write_profile_csv(out_path(c, "profile.csv"), individual, community, meta);
    io::write_correlation_csv(out_path(c, "correlation.csv"),
                              wealth_gini_correlation(f.records), meta);
    io::write_inequality_csv(out_path(c, "inequality.csv"), f.records, meta);
    io::write_project_returns_csv(out_path(c, "project_returns.csv"),
                                  project_return_summary(f.records), meta);

    for (int g = 0; g < 3; ++g) {
        std::vector<const RunRecord*> group;
        for (const auto& rec : f.records)
            if (rec.ok && static_cast<int>(rec.individual_regime) == g)
                group.push_back(&rec);
        if (group.empty()) continue;
        std::vector<double> fr;
        fr.reserve(group.size());
        for (const auto* r : group) fr.push_back(r->fraction_richer);
        std::sort(fr.begin(), fr.end());
        const double med = fr[(fr.size() - 1) / 2];
        const RunRecord* pick = group[0];
        for (const auto* r : group) {
            const double d = std::abs(r->fraction_richer - med);
            const double best = std::abs(pick->fraction_richer - med);
            if (d < best || (d == best && std::pair(r->row, r->rep) <
                                              std::pair(pick->row, pick->rep)))
                pick = r;
        }
        const SimulationResult res = simulate(pick->params, c.fixed, pick->seed);
        io::Meta rm = meta;
        rm.emplace_back("row_id", std::to_string(pick->row));
        rm.emplace_back("rep", std::to_string(pick->rep));
        rm.emplace_back("run_seed", std::to_string(pick->seed));
        const std::string tag = regime_tag(static_cast<Regime>(g));
        io::write_wealth_csv(out_path(c, "rep_" + tag + "_wealth.csv"), res, rm);
        io::write_degree_wealth_csv(out_path(c, "rep_" + tag + "_degree_wealth.csv"), res, rm);
        io::write_access_wealth_csv(out_path(c, "rep_" + tag + "_access_wealth.csv"),
                                    access_wealth_summary(res), rm);

        const SocialGraph graph = build_sda_graph(res.initial_wealth, pick->params.alpha,
                                                  derive_seed(pick->seed, streams::graph));
        io::write_edges_txt(out_path(c, "rep_" + tag + "_edges.txt"), graph, rm);
        io::write_communities_csv(out_path(c, "rep_" + tag + "_communities.csv"),
                                  res.communities, rm);
        std::cout << "representative " << regime_name(static_cast<Regime>(g)) << ": row "
                  << pick->row << " rep " << pick->rep << "\n";
    }
    return 0;
}

int cmd_demo_bimodal(const CommonOpts& o, int k, int bins) {
    const RunConfig c = build_config(o, true);
    const BimodalDemo demo = bimodal_sum_demo(k, *c.master_seed, bins);
    io::write_histogram_csv(out_path(c, "bimodal_histogram.csv"), demo, io::provenance(c));
    std::cout << "pooled " << demo.sample.size() << " draws from " << k
              << " two-peaked samples: mean " << demo.mean << ", range [" << demo.min << ", "
              << demo.max << "]\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Agent-based wealth dynamics on homophilous networks: "
                 "parameter sweeps, regime classification, and interventions"};
    app.require_subcommand(1);

    CommonOpts o;
    int rc = 0;

    CLI::App* design = app.add_subcommand("design", "Write the parameter sweep design CSV");
    add_common(design, o);
    design->callback([&] { rc = cmd_design(o); });

    CLI::App* run = app.add_subcommand("run", "Execute the sweep (resumable)");
    add_common(run, o);
    std::vector<std::string> dumps;
    run->add_option("--dump-wealth", dumps, "Also export the wealth matrix of ROW:REP");
    run->callback([&] { rc = cmd_run(o, dumps); });

    CLI::App* classify = app.add_subcommand("classify", "Tabulate regimes from results");
    add_common(classify, o);
    std::string classify_results;
    classify->add_option("--results", classify_results, "Results JSONL path");
    classify->callback([&] { rc = cmd_classify(o, classify_results); });

    CLI::App* sobol = app.add_subcommand("sobol", "Estimate sensitivity indices from results");
    add_common(sobol, o);
    std::string sobol_results;
    int resamples = 200;
    sobol->add_option("--results", sobol_results, "Results JSONL path");
    sobol->add_option("--resamples", resamples, "Bootstrap resamples (>= 200)");
    sobol->callback([&] { rc = cmd_sobol(o, sobol_results, resamples); });

    CLI::App* intervene = app.add_subcommand("intervene", "Capital-injection experiment on one row");
    add_common(intervene, o);
    int row = -1;
    InterventionSpec ispec;
    intervene->add_option("--row", row, "Design row id")->required();
    intervene->add_option("--reps", ispec.reps, "Repetitions");
    intervene->add_option("--amount", ispec.amount, "Capital granted per targeted agent");
    intervene->add_option("--target-count", ispec.target_count, "How many poorest agents");
    intervene->add_option("--inject-step", ispec.inject_step, "Step after which to inject");
    intervene->add_option("--extra-steps", ispec.extra_steps, "Steps after injection");
    intervene->callback([&] { rc = cmd_intervene(o, row, ispec); });

    CLI::App* analyze = app.add_subcommand("analyze", "Cross-regime reports and representative exports");
    add_common(analyze, o);
    std::string analyze_results;
    analyze->add_option("--results", analyze_results, "Results JSONL path");
    analyze->callback([&] { rc = cmd_analyze(o, analyze_results); });

    CLI::App* demo = app.add_subcommand("demo-bimodal", "Pooled two-peaked sampling demo");
    add_common(demo, o);
    int k = 200, bins = 60;
    demo->add_option("--k", k, "Number of pooled two-peaked samples");
    demo->add_option("--bins", bins, "Histogram bins");
    demo->callback([&] { rc = cmd_demo_bimodal(o, k, bins); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ConvergenceError& e) {
        std::cerr << "convergence failure: " << e.what() << "\n";
        return 3;
    } catch (const io::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return rc;
}
