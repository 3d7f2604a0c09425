#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "povsim/analysis.hpp"
#include "povsim/config.hpp"
#include "povsim/experiments.hpp"
#include "povsim/metrics.hpp"

namespace povsim {
namespace io {

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline bool file_exists(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return static_cast<bool>(in);
}

// Write to a sibling temp file, then rename over the target. A crashed run
// leaves either the old file or the new one, never a torn mix.
inline void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open " + tmp + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw DataError("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("cannot rename " + tmp + " to " + path);
}

// Provenance comments carried at the top of every output file.
using Meta = std::vector<std::pair<std::string, std::string>>;

inline Meta provenance(const RunConfig& config) {
    Meta m;
    m.emplace_back("config_digest", config_digest(config));
    m.emplace_back("master_seed",
                   config.master_seed ? std::to_string(*config.master_seed) : "unset");
    return m;
}

inline std::string meta_block(const Meta& meta) {
    std::string out;
    for (const auto& [k, v] : meta) {
        out += "# ";
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

namespace detail {

using povsim::detail::fmt_double;

inline std::map<std::string, std::string> hash_headers(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] != '#') break;
        std::size_t a = 1;
        while (a < line.size() && line[a] == ' ') ++a;
        const std::size_t eq = line.find('=', a);
        if (eq == std::string::npos) continue;
        out[line.substr(a, eq - a)] = line.substr(eq + 1);
    }
    return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double field_double(const std::string& s, const std::string& where) {
    try {
        return povsim::detail::parse_double(s);
    } catch (const std::exception& e) {
        throw DataError(where + ": " + e.what());
    }
}

inline long long field_int(const std::string& s, const std::string& where) {
    try {
        return povsim::detail::parse_int(s);
    } catch (const std::exception& e) {
        throw DataError(where + ": " + e.what());
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Design CSV

inline std::string design_csv_content(const ExperimentDesign& design, const Meta& meta) {
    std::string out = meta_block(meta);
    out += "row_id,ell,g_upper,beta,theta,alpha\n";
    for (int r = 0; r < design.row_count(); ++r) {
        const FreeParams p = design.params_at(r);
        out += std::to_string(r);
        for (double v : {p.ell, p.g_upper, p.beta, p.theta, p.alpha}) {
            out += ',';
            out += detail::fmt_double(v);
        }
        out += '\n';
    }
    return out;
}

inline void write_design_csv(const std::string& path, const ExperimentDesign& design,
                             const Meta& meta) {
    atomic_write(path, design_csv_content(design, meta));
}

struct DesignFile {
    std::map<std::string, std::string> headers;
    std::vector<FreeParams> rows;
};

inline DesignFile read_design_csv(const std::string& path) {
    const std::string text = read_text_file(path);
    DesignFile out;
    out.headers = detail::hash_headers(text);
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const std::string where = path + " line " + std::to_string(lineno);
        if (!saw_header) {
            if (line != "row_id,ell,g_upper,beta,theta,alpha")
                throw DataError(where + ": unexpected design header '" + line + "'");
            saw_header = true;
            continue;
        }
        const auto f = detail::split_csv_line(line);
        if (f.size() != 6) throw DataError(where + ": expected 6 fields, got " +
                                           std::to_string(f.size()));
        const long long row_id = detail::field_int(f[0], where);
        if (row_id != static_cast<long long>(out.rows.size()))
            throw DataError(where + ": row_id " + std::to_string(row_id) +
                            " out of order (expected " + std::to_string(out.rows.size()) + ")");
        FreeParams p;
        p.ell = detail::field_double(f[1], where);
        p.g_upper = detail::field_double(f[2], where);
        p.beta = detail::field_double(f[3], where);
        p.theta = detail::field_double(f[4], where);
        p.alpha = detail::field_double(f[5], where);
        out.rows.push_back(p);
    }
    if (!saw_header) throw DataError(path + ": missing design header row");
    return out;
}

// ---------------------------------------------------------------------------
// Results JSONL

inline nlohmann::ordered_json record_to_json(const RunRecord& rec) {
    nlohmann::ordered_json j;
    j["row_id"] = rec.row;
    j["rep"] = rec.rep;
    j["seed"] = rec.seed;
    j["individual_regime"] = regime_name(rec.individual_regime);
    j["community_regime"] = regime_name(rec.community_regime);
    j["final_gini"] = rec.final_gini;
    j["total_final_wealth"] = rec.total_final_wealth;
    if (rec.escape_fraction) j["escape_fraction"] = *rec.escape_fraction;
    j["ok"] = rec.ok;
    if (!rec.ok) {
        j["error_kind"] = rec.error_kind;
        j["error"] = rec.error;
    }
    j["steps"] = rec.steps;
    j["params"] = {{"ell", rec.params.ell},
                   {"g_upper", rec.params.g_upper},
                   {"beta", rec.params.beta},
                   {"theta", rec.params.theta},
                   {"alpha", rec.params.alpha}};
    j["fraction_richer"] = rec.fraction_richer;
    j["total_initial_wealth"] = rec.total_initial_wealth;
    j["horizontal_inequality"] = rec.horizontal_inequality;
    j["vertical_inequality"] = rec.vertical_inequality;
    j["n_communities"] = rec.n_communities;
    j["community_sizes"] = rec.community_sizes;
    j["project_avg_factor"] = rec.project_avg_factor;
    j["project_funded_steps"] = rec.project_funded_steps;
    j["project_expected_factor"] = rec.project_expected_factor;
    return j;
}

inline RunRecord json_to_record(const nlohmann::ordered_json& j) {
    RunRecord rec;
    rec.row = j.at("row_id").get<int>();
    rec.rep = j.at("rep").get<int>();
    rec.seed = j.at("seed").get<std::uint64_t>();
    const auto ind = parse_regime(j.at("individual_regime").get<std::string>());
    const auto com = parse_regime(j.at("community_regime").get<std::string>());
    if (!ind || !com) throw std::invalid_argument("unknown regime tag");
    rec.individual_regime = *ind;
    rec.community_regime = *com;
    rec.final_gini = j.at("final_gini").get<double>();
    rec.total_final_wealth = j.at("total_final_wealth").get<double>();
    if (j.contains("escape_fraction")) rec.escape_fraction = j.at("escape_fraction").get<double>();
    rec.ok = j.at("ok").get<bool>();
    if (j.contains("error_kind")) rec.error_kind = j.at("error_kind").get<int>();
    if (j.contains("error")) rec.error = j.at("error").get<std::string>();
    rec.steps = j.at("steps").get<int>();
    const auto& p = j.at("params");
    rec.params.ell = p.at("ell").get<double>();
    rec.params.g_upper = p.at("g_upper").get<double>();
    rec.params.beta = p.at("beta").get<double>();
    rec.params.theta = p.at("theta").get<double>();
    rec.params.alpha = p.at("alpha").get<double>();
    rec.fraction_richer = j.at("fraction_richer").get<double>();
    rec.total_initial_wealth = j.at("total_initial_wealth").get<double>();
    rec.horizontal_inequality = j.at("horizontal_inequality").get<double>();
    rec.vertical_inequality = j.at("vertical_inequality").get<double>();
    rec.n_communities = j.at("n_communities").get<int>();
    rec.community_sizes = j.at("community_sizes").get<std::vector<int>>();
    rec.project_avg_factor = j.at("project_avg_factor").get<std::vector<double>>();
    rec.project_funded_steps = j.at("project_funded_steps").get<std::vector<int>>();
    rec.project_expected_factor = j.at("project_expected_factor").get<std::vector<double>>();
    return rec;
}

inline std::string results_jsonl_content(std::vector<RunRecord> records, const Meta& meta) {
    std::sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
        return std::pair(a.row, a.rep) < std::pair(b.row, b.rep);
    });
    std::string out = meta_block(meta);
    for (const auto& rec : records) {
        out += record_to_json(rec).dump();
        out += '\n';
    }
    return out;
}

inline void write_results_jsonl(const std::string& path, const std::vector<RunRecord>& records,
                                const Meta& meta) {
    atomic_write(path, results_jsonl_content(records, meta));
}

struct ResultsFile {
    std::map<std::string, std::string> headers;
    std::vector<RunRecord> records;
    std::set<std::pair<int, int>> done;
};

inline ResultsFile read_results_jsonl(const std::string& path) {
    const std::string text = read_text_file(path);
    ResultsFile out;
    out.headers = detail::hash_headers(text);
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const std::string where = path + " line " + std::to_string(lineno);
        RunRecord rec;
        try {
            rec = json_to_record(nlohmann::ordered_json::parse(line));
        } catch (const std::exception& e) {
            throw DataError(where + ": corrupted record: " + e.what());
        }
        if (!out.done.insert({rec.row, rec.rep}).second)
            throw DataError(where + ": duplicate record for row " + std::to_string(rec.row) +
                            " rep " + std::to_string(rec.rep));
        out.records.push_back(std::move(rec));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trajectory and graph exports

inline std::string wealth_csv_content(const SimulationResult& res, const Meta& meta) {
    std::string out = meta_block(meta);
    out += "agent";
    for (int t = 0; t <= res.n_steps; ++t) out += ",t" + std::to_string(t);
    out += '\n';
    for (int i = 0; i < res.n_agents; ++i) {
        out += std::to_string(i);
        for (int t = 0; t <= res.n_steps; ++t) {
            out += ',';
            out += detail::fmt_double(res.wealth_at(i, t));
        }
        out += '\n';
    }
    return out;
}

inline void write_wealth_csv(const std::string& path, const SimulationResult& res,
                             const Meta& meta) {
    atomic_write(path, wealth_csv_content(res, meta));
}

inline void write_edges_txt(const std::string& path, const SocialGraph& g, const Meta& meta) {
    std::string out = meta_block(meta);
    for (const auto& [i, j] : g.edges()) {
        out += std::to_string(i);
        out += ' ';
        out += std::to_string(j);
        out += '\n';
    }
    atomic_write(path, out);
}

inline void write_communities_csv(const std::string& path, const CommunityAssignment& comm,
                                  const Meta& meta) {
    std::string out = meta_block(meta);
    out += "node_id,core_label,extended_labels\n";
    for (std::size_t i = 0; i < comm.core.size(); ++i) {
        out += std::to_string(i);
        out += ',';
        out += std::to_string(comm.core[i]);
        out += ',';
        std::string ext;
        for (int c : comm.extended[i]) {
            if (!ext.empty()) ext += ';';
            ext += std::to_string(c);
        }
        out += ext;
        out += '\n';
    }
    atomic_write(path, out);
}

// ---------------------------------------------------------------------------
// Report CSVs

inline void write_regime_counts_csv(const std::string& path,
                                    const std::vector<RunRecord>& records, Meta meta) {
    long counts[3][3] = {};
    long failed = 0;
    for (const auto& rec : records) {
        if (!rec.ok) {
            ++failed;
            continue;
        }
        ++counts[static_cast<int>(rec.community_regime)][static_cast<int>(rec.individual_regime)];
    }
    meta.emplace_back("n_records", std::to_string(records.size()));
    meta.emplace_back("n_failed", std::to_string(failed));
    std::string out = meta_block(meta);
    out += "community_regime,individual_regime,count\n";
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 3; ++i) {
            out += regime_name(static_cast<Regime>(c));
            out += ',';
            out += regime_name(static_cast<Regime>(i));
            out += ',';
            out += std::to_string(counts[c][i]);
            out += '\n';
        }
    atomic_write(path, out);
}

inline void write_intervention_csv(const std::string& path, const InterventionReport& report,
                                   Meta meta) {
    meta.emplace_back("row_id", std::to_string(report.row_id));
    meta.emplace_back("ell", detail::fmt_double(report.params.ell));
    meta.emplace_back("g_upper", detail::fmt_double(report.params.g_upper));
    meta.emplace_back("beta", detail::fmt_double(report.params.beta));
    meta.emplace_back("theta", detail::fmt_double(report.params.theta));
    meta.emplace_back("alpha", detail::fmt_double(report.params.alpha));
    meta.emplace_back("inject_step", std::to_string(report.spec.inject_step));
    meta.emplace_back("amount", detail::fmt_double(report.spec.amount));
    meta.emplace_back("target_count", std::to_string(report.spec.target_count));
    meta.emplace_back("extra_steps", std::to_string(report.spec.extra_steps));
    meta.emplace_back("poverty_floor", detail::fmt_double(report.spec.poverty_floor));
    meta.emplace_back("mean_escape", detail::fmt_double(report.mean_escape));
    meta.emplace_back("sd_escape", detail::fmt_double(report.sd_escape));
    std::string out = meta_block(meta);
    out += "rep,seed,escape_fraction,poverty_line,threshold,n_below_floor,"
           "min_targeted_final,max_targeted_final\n";
    for (const auto& run : report.runs) {
        out += std::to_string(run.record.rep);
        out += ',';
        out += std::to_string(run.record.seed);
        out += ',';
        out += detail::fmt_double(run.record.escape_fraction.value_or(0.0));
        out += ',';
        out += detail::fmt_double(run.poverty_line);
        out += ',';
        out += detail::fmt_double(run.threshold);
        out += ',';
        out += std::to_string(run.n_below_floor);
        out += ',';
        out += detail::fmt_double(run.min_targeted_final);
        out += ',';
        out += detail::fmt_double(run.max_targeted_final);
        out += '\n';
    }
    atomic_write(path, out);
}

inline void write_sobol_csv(const std::string& path,
                            const std::vector<std::pair<std::string, SobolIndices>>& per_qoi,
                            const Meta& meta) {
    std::string out = meta_block(meta);
    out += "qoi,param,first,first_lo,first_hi,total,total_lo,total_hi,degenerate\n";
    for (const auto& [qoi, idx] : per_qoi) {
        for (std::size_t p = 0; p < free_param_names.size(); ++p) {
            out += qoi;
            out += ',';
            out += free_param_names[p];
            for (double v : {idx.first[p], idx.first_lo[p], idx.first_hi[p], idx.total[p],
                             idx.total_lo[p], idx.total_hi[p]}) {
                out += ',';
                out += detail::fmt_double(v);
            }
            out += ',';
            out += idx.degenerate ? "true" : "false";
            out += '\n';
        }
    }
    atomic_write(path, out);
}

inline void write_profile_csv(const std::string& path,
                              const std::array<RegimeProfileEntry, 3>& individual,
                              const std::array<RegimeProfileEntry, 3>& community,
                              const Meta& meta) {
    std::string out = meta_block(meta);
    out += "level,regime,present,n_runs";
    for (const auto& name : free_param_names) {
        out += ',';
        out += name;
        out += "_mean,";
        out += name;
        out += "_sd";
    }
    out += '\n';
    auto emit = [&](const char* level, const std::array<RegimeProfileEntry, 3>& entries) {
        for (const auto& e : entries) {
            out += level;
            out += ',';
            out += regime_name(e.regime);
            out += ',';
            out += e.present ? "true" : "false";
            out += ',';
            out += std::to_string(e.n_runs);
            for (std::size_t p = 0; p < e.mean.size(); ++p) {
                out += ',';
                out += detail::fmt_double(e.mean[p]);
                out += ',';
                out += detail::fmt_double(e.sd[p]);
            }
            out += '\n';
        }
    };
    emit("individual", individual);
    emit("community", community);
    atomic_write(path, out);
}

inline void write_correlation_csv(const std::string& path, const CorrelationReport& report,
                                  const Meta& meta) {
    std::string out = meta_block(meta);
    out += "n,defined,r,note\n";
    out += std::to_string(report.n);
    out += ',';
    out += report.defined ? "true" : "false";
    out += ',';
    out += detail::fmt_double(report.r);
    out += ',';
    out += csv_quote(report.note);
    out += '\n';
    atomic_write(path, out);
}

inline void write_inequality_csv(const std::string& path,
                                 const std::vector<RunRecord>& records, const Meta& meta) {
    std::string out = meta_block(meta);
    out += "row_id,rep,individual_regime,community_regime,horizontal,vertical,"
           "final_gini,total_final_wealth\n";
    for (const auto& rec : records) {
        if (!rec.ok) continue;
        out += std::to_string(rec.row);
        out += ',';
        out += std::to_string(rec.rep);
        out += ',';
        out += regime_name(rec.individual_regime);
        out += ',';
        out += regime_name(rec.community_regime);
        for (double v : {rec.horizontal_inequality, rec.vertical_inequality, rec.final_gini,
                         rec.total_final_wealth}) {
            out += ',';
            out += detail::fmt_double(v);
        }
        out += '\n';
    }
    atomic_write(path, out);
}

inline void write_project_returns_csv(const std::string& path, const ProjectReturnSummary& summary,
                                      const Meta& meta) {
    std::string out = meta_block(meta);
    out += "regime,n_projects,all_step_avg_mean,all_step_avg_max,"
           "n_funded_projects,funded_avg_mean,funded_avg_min,funded_avg_max\n";
    for (int g = 0; g < 3; ++g) {
        const auto& all = summary.all_step_averages[static_cast<std::size_t>(g)];
        const auto& funded = summary.funded_step_averages[static_cast<std::size_t>(g)];
        double all_mean = 0.0, all_max = 0.0;
        for (double v : all) {
            all_mean += v;
            all_max = std::max(all_max, v);
        }
        if (!all.empty()) all_mean /= static_cast<double>(all.size());
        double f_mean = 0.0, f_min = 0.0, f_max = 0.0;
        if (!funded.empty()) {
            f_min = funded[0];
            f_max = funded[0];
            for (double v : funded) {
                f_mean += v;
                f_min = std::min(f_min, v);
                f_max = std::max(f_max, v);
            }
            f_mean /= static_cast<double>(funded.size());
        }
        out += regime_name(static_cast<Regime>(g));
        out += ',' + std::to_string(all.size());
        out += ',' + detail::fmt_double(all_mean);
        out += ',' + detail::fmt_double(all_max);
        out += ',' + std::to_string(funded.size());
        out += ',' + detail::fmt_double(f_mean);
        out += ',' + detail::fmt_double(f_min);
        out += ',' + detail::fmt_double(f_max);
        out += '\n';
    }
    atomic_write(path, out);
}

inline void write_access_wealth_csv(const std::string& path,
                                    const std::vector<AccessWealthBucket>& buckets,
                                    const Meta& meta) {
    std::string out = meta_block(meta);
    out += "membership_count,n_agents,mean,q10,median,q90\n";
    for (const auto& b : buckets) {
        out += std::to_string(b.membership_count);
        out += ',' + std::to_string(b.n_agents);
        out += ',' + detail::fmt_double(b.mean);
        out += ',' + detail::fmt_double(b.q10);
        out += ',' + detail::fmt_double(b.median);
        out += ',' + detail::fmt_double(b.q90);
        out += '\n';
    }
    atomic_write(path, out);
}

inline void write_degree_wealth_csv(const std::string& path, const SimulationResult& res,
                                    const Meta& meta) {
    std::string out = meta_block(meta);
    out += "agent,membership_count,initial_wealth,final_wealth\n";
    for (int i = 0; i < res.n_agents; ++i) {
        out += std::to_string(i);
        out += ',' +
               std::to_string(res.communities.extended[static_cast<std::size_t>(i)].size());
        out += ',' + detail::fmt_double(res.wealth_at(i, 0));
        out += ',' + detail::fmt_double(res.final_wealth(i));
        out += '\n';
    }
    atomic_write(path, out);
}

inline void write_histogram_csv(const std::string& path, const BimodalDemo& demo, Meta meta) {
    meta.emplace_back("k", std::to_string(demo.k));
    meta.emplace_back("sample_seed", std::to_string(demo.seed));
    meta.emplace_back("n_samples", std::to_string(demo.sample.size()));
    meta.emplace_back("mean", detail::fmt_double(demo.mean));
    meta.emplace_back("min", detail::fmt_double(demo.min));
    meta.emplace_back("max", detail::fmt_double(demo.max));
    std::string out = meta_block(meta);
    out += "bin_left,bin_right,count\n";
    for (const auto& b : demo.bins) {
        out += detail::fmt_double(b.left);
        out += ',' + detail::fmt_double(b.right);
        out += ',' + std::to_string(b.count);
        out += '\n';
    }
    atomic_write(path, out);
}

}  // namespace io
}  // namespace povsim
