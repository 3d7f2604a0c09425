#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <povsim/economy.hpp>
#include <povsim/metrics.hpp>
#include <povsim/rng.hpp>

namespace povsim {

namespace detail {

struct DirectionRow {
    int s;
    std::uint32_t a;
    std::array<std::uint32_t, 5> m;
};

// Joe–Kuo direction numbers (the "new-joe-kuo-6" table) for dimensions 2..10.
inline constexpr std::array<DirectionRow, 9> direction_rows = {{
    {1, 0, {1, 0, 0, 0, 0}},
    {2, 1, {1, 3, 0, 0, 0}},
    {3, 1, {1, 3, 1, 0, 0}},
    {3, 2, {1, 1, 1, 0, 0}},
    {4, 1, {1, 1, 3, 3, 0}},
    {4, 4, {1, 3, 5, 13, 0}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
}};

}  // namespace detail

// Gray-code Sobol generator, 32 bits per dimension. The first point is the
// origin; taking any power-of-two prefix keeps the low-discrepancy structure.
class SobolSequence {
  public:
    static constexpr int max_dims = 10;

    explicit SobolSequence(int dims) : dims_(dims) {
        if (dims < 1 || dims > max_dims)
            throw std::invalid_argument("SobolSequence: dims outside [1,10]");
        dir_.resize(static_cast<std::size_t>(dims));
        state_.assign(static_cast<std::size_t>(dims), 0u);
        for (int j = 0; j < dims; ++j) init_dimension(j);
    }

    int dims() const { return dims_; }

    void next(double* out) {
        const std::uint64_t k = index_++;
        if (k > 0) {
            const int c = std::countr_zero(k);
            for (int j = 0; j < dims_; ++j)
                state_[static_cast<std::size_t>(j)] ^=
                    dir_[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
        }
        for (int j = 0; j < dims_; ++j)
            out[j] = static_cast<double>(state_[static_cast<std::size_t>(j)]) * 0x1p-32;
    }

    std::vector<double> next() {
        std::vector<double> p(static_cast<std::size_t>(dims_));
        next(p.data());
        return p;
    }

  private:
    void init_dimension(int j) {
        auto& v = dir_[static_cast<std::size_t>(j)];
        if (j == 0) {
            for (int k = 0; k < 32; ++k)
                v[static_cast<std::size_t>(k)] = 1u << (31 - k);
            return;
        }
        const auto& row = detail::direction_rows[static_cast<std::size_t>(j - 1)];
        const int s = row.s;
        for (int k = 0; k < s; ++k)
            v[static_cast<std::size_t>(k)] = row.m[static_cast<std::size_t>(k)]
                                             << (31 - k);
        for (int k = s; k < 32; ++k) {
            std::uint32_t x = v[static_cast<std::size_t>(k - s)];
            x ^= x >> s;
            for (int i = 1; i < s; ++i)
                if ((row.a >> (s - 1 - i)) & 1u)
                    x ^= v[static_cast<std::size_t>(k - i)];
            v[static_cast<std::size_t>(k)] = x;
        }
    }

    int dims_;
    std::uint64_t index_ = 0;
    std::vector<std::array<std::uint32_t, 32>> dir_;
    std::vector<std::uint32_t> state_;
};

// Row layout per base sample j: [A_j, AB_j^1, ..., AB_j^D, B_j] where AB_j^i
// is A_j with coordinate i taken from B_j.
struct SaltelliPlan {
    int dims = 0;
    int base_samples = 0;
    std::vector<Bounds> bounds;
    std::vector<double> rows;  // row_count() x dims, row-major

    int row_count() const { return base_samples * (dims + 2); }
    int a_row(int j) const { return j * (dims + 2); }
    int ab_row(int j, int i) const { return j * (dims + 2) + 1 + i; }
    int b_row(int j) const { return j * (dims + 2) + dims + 1; }

    const double* row(int r) const {
        return rows.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(dims);
    }
};

inline SaltelliPlan saltelli_plan(int base_samples, const std::vector<Bounds>& bounds) {
    if (base_samples < 1 || (base_samples & (base_samples - 1)) != 0)
        throw std::invalid_argument("saltelli_plan: base sample count must be a power of 2");
    const int dims = static_cast<int>(bounds.size());
    if (dims < 1 || 2 * dims > SobolSequence::max_dims)
        throw std::invalid_argument("saltelli_plan: unsupported dimension count");
    for (const auto& b : bounds)
        if (!(b.lo < b.hi)) throw std::invalid_argument("saltelli_plan: malformed bounds");

    SaltelliPlan plan;
    plan.dims = dims;
    plan.base_samples = base_samples;
    plan.bounds = bounds;
    plan.rows.resize(static_cast<std::size_t>(plan.row_count()) *
                     static_cast<std::size_t>(dims));

    SobolSequence seq(2 * dims);
    std::vector<double> point(static_cast<std::size_t>(2 * dims));
    std::vector<double> a(static_cast<std::size_t>(dims)), b(static_cast<std::size_t>(dims));
    for (int j = 0; j < base_samples; ++j) {
        seq.next(point.data());
        for (int i = 0; i < dims; ++i) {
            const auto& bd = bounds[static_cast<std::size_t>(i)];
            a[static_cast<std::size_t>(i)] =
                bd.lo + point[static_cast<std::size_t>(i)] * (bd.hi - bd.lo);
            b[static_cast<std::size_t>(i)] =
                bd.lo + point[static_cast<std::size_t>(dims + i)] * (bd.hi - bd.lo);
        }
        auto* out = plan.rows.data() +
                    static_cast<std::size_t>(plan.a_row(j)) * static_cast<std::size_t>(dims);
        std::copy(a.begin(), a.end(), out);
        for (int i = 0; i < dims; ++i) {
            auto* mixed = plan.rows.data() + static_cast<std::size_t>(plan.ab_row(j, i)) *
                                                 static_cast<std::size_t>(dims);
            std::copy(a.begin(), a.end(), mixed);
            mixed[i] = b[static_cast<std::size_t>(i)];
        }
        auto* outb = plan.rows.data() +
                     static_cast<std::size_t>(plan.b_row(j)) * static_cast<std::size_t>(dims);
        std::copy(b.begin(), b.end(), outb);
    }
    return plan;
}

struct ExperimentDesign {
    SaltelliPlan plan;
    int rep_count = 1;
    std::uint64_t master_seed = 0;

    int row_count() const { return plan.row_count(); }
    int run_count() const { return plan.row_count() * rep_count; }

    FreeParams params_at(int row) const {
        const double* r = plan.row(row);
        FreeParams p;
        p.ell = r[0];
        p.g_upper = r[1];
        p.beta = r[2];
        p.theta = r[3];
        p.alpha = r[4];
        return p;
    }
};

inline ExperimentDesign saltelli_design(int base_samples, const FreeParamBounds& bounds,
                                        std::uint64_t master_seed, int rep_count) {
    if (rep_count < 1)
        throw std::invalid_argument("saltelli_design: rep count must be positive");
    ExperimentDesign d;
    d.plan = saltelli_plan(base_samples, {bounds.ell, bounds.g_upper, bounds.beta,
                                          bounds.theta, bounds.alpha});
    d.rep_count = rep_count;
    d.master_seed = master_seed;
    return d;
}

inline std::uint64_t run_seed(const ExperimentDesign& d, int row, int rep) {
    return derive_seed(d.master_seed, streams::ensemble,
                       pack_index(static_cast<std::uint32_t>(row),
                                  static_cast<std::uint32_t>(rep)));
}

enum class Regime { all_poor = 0, some_rich = 1, all_rich = 2 };

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::all_poor: return "AllPoor";
        case Regime::some_rich: return "SomeRich";
        case Regime::all_rich: return "AllRich";
    }
    return "?";
}

inline std::optional<Regime> parse_regime(const std::string& s) {
    if (s == "AllPoor") return Regime::all_poor;
    if (s == "SomeRich") return Regime::some_rich;
    if (s == "AllRich") return Regime::all_rich;
    return std::nullopt;
}

inline double fraction_richer(const SimulationResult& res) {
    int richer = 0;
    for (int i = 0; i < res.n_agents; ++i)
        if (res.final_wealth(i) > res.wealth_at(i, 0)) ++richer;
    return static_cast<double>(richer) / static_cast<double>(res.n_agents);
}

// AllRich: every agent strictly gained. AllPoor: nobody strictly gained
// (covers the all-equal edge case). Everything in between is SomeRich.
inline Regime classify_individual(const SimulationResult& res) {
    int richer = 0;
    for (int i = 0; i < res.n_agents; ++i)
        if (res.final_wealth(i) > res.wealth_at(i, 0)) ++richer;
    if (richer == res.n_agents) return Regime::all_rich;
    if (richer == 0) return Regime::all_poor;
    return Regime::some_rich;
}

// Same trichotomy on community totals over the core partition.
inline Regime classify_community(const SimulationResult& res) {
    const int n_comm = res.communities.community_count();
    std::vector<double> initial(static_cast<std::size_t>(n_comm), 0.0);
    std::vector<double> final_(static_cast<std::size_t>(n_comm), 0.0);
    for (int i = 0; i < res.n_agents; ++i) {
        const auto c = static_cast<std::size_t>(res.communities.core[static_cast<std::size_t>(i)]);
        initial[c] += res.wealth_at(i, 0);
        final_[c] += res.final_wealth(i);
    }
    int richer = 0;
    for (int c = 0; c < n_comm; ++c)
        if (final_[static_cast<std::size_t>(c)] > initial[static_cast<std::size_t>(c)])
            ++richer;
    if (richer == n_comm) return Regime::all_rich;
    if (richer == 0) return Regime::all_poor;
    return Regime::some_rich;
}

struct RunRecord {
    int row = -1;
    int rep = -1;
    std::uint64_t seed = 0;
    FreeParams params;
    bool ok = false;
    int error_kind = 0;  // 0 none, 3 convergence, 2 other
    std::string error;
    int steps = 0;
    Regime individual_regime = Regime::all_poor;
    Regime community_regime = Regime::all_poor;
    double fraction_richer = 0.0;
    double final_gini = 0.0;
    double total_initial_wealth = 0.0;
    double total_final_wealth = 0.0;
    double horizontal_inequality = 0.0;
    double vertical_inequality = 0.0;
    int n_communities = 0;
    std::vector<int> community_sizes;
    std::vector<double> project_avg_factor;   // realized factor averaged over all steps
    std::vector<int> project_funded_steps;
    std::vector<double> project_expected_factor;
    std::optional<double> escape_fraction;
};

inline RunRecord summarize_run(const SimulationResult& res, int row, int rep,
                               std::uint64_t seed, const FreeParams& params) {
    RunRecord rec;
    rec.row = row;
    rec.rep = rep;
    rec.seed = seed;
    rec.params = params;
    rec.ok = true;
    rec.steps = res.n_steps;
    rec.individual_regime = classify_individual(res);
    rec.community_regime = classify_community(res);
    if (rec.community_regime == Regime::all_rich &&
        rec.individual_regime == Regime::all_poor)
        throw std::logic_error("summarize_run: community gain without any agent gain");
    rec.fraction_richer = fraction_richer(res);

    std::vector<double> finals(static_cast<std::size_t>(res.n_agents));
    for (int i = 0; i < res.n_agents; ++i) {
        finals[static_cast<std::size_t>(i)] = res.final_wealth(i);
        rec.total_initial_wealth += res.wealth_at(i, 0);
        rec.total_final_wealth += finals[static_cast<std::size_t>(i)];
    }
    rec.final_gini = gini(finals);
    const auto decomp = inequality_decomposition(res);
    rec.horizontal_inequality = decomp.horizontal;
    rec.vertical_inequality = decomp.vertical;

    rec.n_communities = res.communities.community_count();
    rec.community_sizes.assign(static_cast<std::size_t>(rec.n_communities), 0);
    for (int i = 0; i < res.n_agents; ++i)
        ++rec.community_sizes[static_cast<std::size_t>(
            res.communities.core[static_cast<std::size_t>(i)])];

    const auto n_proj = static_cast<int>(res.projects.size());
    rec.project_avg_factor.resize(static_cast<std::size_t>(n_proj), 0.0);
    rec.project_funded_steps.resize(static_cast<std::size_t>(n_proj), 0);
    rec.project_expected_factor.resize(static_cast<std::size_t>(n_proj), 0.0);
    for (int p = 0; p < n_proj; ++p) {
        double acc = 0.0;
        int funded = 0;
        for (int t = 1; t <= res.n_steps; ++t) {
            acc += res.factor_at(p, t);
            if (res.funded_at(p, t)) ++funded;
        }
        rec.project_avg_factor[static_cast<std::size_t>(p)] =
            acc / static_cast<double>(res.n_steps);
        rec.project_funded_steps[static_cast<std::size_t>(p)] = funded;
        rec.project_expected_factor[static_cast<std::size_t>(p)] =
            res.projects[static_cast<std::size_t>(p)].expected_factor();
    }
    return rec;
}

struct EnsembleOptions {
    int workers = 1;
    const std::set<std::pair<int, int>>* skip = nullptr;  // (row, rep) already done
    std::function<void(const RunRecord&)> on_complete;    // called under a lock
};

// Executes every (row, rep) job not in `skip`. Output order and content are
// independent of the worker count.
inline std::vector<RunRecord> run_ensemble(const ExperimentDesign& design,
                                           const FixedParams& fixed,
                                           const EnsembleOptions& opt = {}) {
    std::vector<std::pair<int, int>> jobs;
    jobs.reserve(static_cast<std::size_t>(design.run_count()));
    for (int row = 0; row < design.row_count(); ++row)
        for (int rep = 0; rep < design.rep_count; ++rep)
            if (opt.skip == nullptr || opt.skip->count({row, rep}) == 0)
                jobs.emplace_back(row, rep);

    std::vector<RunRecord> records(jobs.size());
    std::atomic<std::size_t> cursor{0};
    std::mutex notify_mutex;

    auto work = [&]() {
        for (;;) {
            const std::size_t idx = cursor.fetch_add(1);
            if (idx >= jobs.size()) return;
            const auto [row, rep] = jobs[idx];
            const std::uint64_t seed = run_seed(design, row, rep);
            const FreeParams params = design.params_at(row);
            RunRecord rec;
            try {
                const SimulationResult res = simulate(params, fixed, seed);
                rec = summarize_run(res, row, rep, seed, params);
            } catch (const ConvergenceError& e) {
                rec = RunRecord{};
                rec.error_kind = 3;
                rec.error = e.what();
            } catch (const std::exception& e) {
                rec = RunRecord{};
                rec.error_kind = 2;
                rec.error = e.what();
            }
            rec.row = row;
            rec.rep = rep;
            rec.seed = seed;
            rec.params = params;
            records[idx] = std::move(rec);
            if (opt.on_complete) {
                std::lock_guard<std::mutex> lock(notify_mutex);
                opt.on_complete(records[idx]);
            }
        }
    };

    const int workers = std::max(1, opt.workers);
    if (workers == 1 || jobs.size() <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    return records;
}

struct InterventionSpec {
    int inject_step = 100;
    double amount = 10.0;
    int target_count = 100;
    int extra_steps = 100;
    int reps = 20;
    double poverty_floor = 1e-8;

    void validate() const {
        if (inject_step < 1) throw std::invalid_argument("InterventionSpec: inject_step must be positive");
        if (!(amount >= 0.0)) throw std::invalid_argument("InterventionSpec: amount must be non-negative");
        if (target_count < 1) throw std::invalid_argument("InterventionSpec: target_count must be positive");
        if (extra_steps < 1) throw std::invalid_argument("InterventionSpec: extra_steps must be positive");
        if (reps < 1) throw std::invalid_argument("InterventionSpec: reps must be positive");
        if (!(poverty_floor >= 0.0)) throw std::invalid_argument("InterventionSpec: poverty_floor must be non-negative");
    }
};

struct InterventionRun {
    RunRecord record;
    double poverty_line = 0.0;  // wealth of the richest among the end-poorest target_count
    double threshold = 0.0;     // max(poverty_line, poverty_floor)
    int n_below_floor = 0;      // targeted agents ending below the floor
    double min_targeted_final = 0.0;
    double max_targeted_final = 0.0;
};

struct InterventionReport {
    int row_id = -1;
    FreeParams params;
    InterventionSpec spec;
    std::uint64_t master_seed = 0;
    std::vector<InterventionRun> runs;
    double mean_escape = 0.0;
    double sd_escape = 0.0;
};

// Grants `amount` to the target_count poorest agents after `inject_step`
// settles, runs `extra_steps` more, then measures how many targeted agents
// finish strictly above both the end-state poverty line (the richest of the
// end-poorest target_count) and an absolute destitution floor.
inline InterventionReport run_intervention(const FreeParams& params,
                                           const FixedParams& fixed,
                                           const InterventionSpec& spec,
                                           std::uint64_t master_seed,
                                           int row_id = 0) {
    spec.validate();
    if (spec.target_count > fixed.n_agents)
        throw std::invalid_argument("run_intervention: target_count exceeds population");

    FixedParams extended = fixed;
    extended.n_steps = spec.inject_step + spec.extra_steps;

    InterventionReport report;
    report.row_id = row_id;
    report.params = params;
    report.spec = spec;
    report.master_seed = master_seed;
    report.runs.reserve(static_cast<std::size_t>(spec.reps));

    for (int rep = 0; rep < spec.reps; ++rep) {
        const std::uint64_t seed =
            derive_seed(master_seed, streams::intervention,
                        pack_index(static_cast<std::uint32_t>(row_id),
                                   static_cast<std::uint32_t>(rep)));
        WealthInjection inj;
        inj.after_step = spec.inject_step;
        inj.amount = spec.amount;
        inj.target_count = spec.target_count;
        const SimulationResult res =
            simulate(params, extended, seed, PortfolioPolicy::prospect, &inj);

        InterventionRun run;
        run.record = summarize_run(res, row_id, rep, seed, params);

        std::vector<int> order(static_cast<std::size_t>(res.n_agents));
        for (int i = 0; i < res.n_agents; ++i) order[static_cast<std::size_t>(i)] = i;
        std::sort(order.begin(), order.end(), [&](int x, int y) {
            const double wx = res.final_wealth(x), wy = res.final_wealth(y);
            if (wx != wy) return wx < wy;
            return x < y;
        });
        run.poverty_line =
            res.final_wealth(order[static_cast<std::size_t>(spec.target_count - 1)]);
        run.threshold = std::max(run.poverty_line, spec.poverty_floor);

        int escaped = 0;
        run.min_targeted_final = std::numeric_limits<double>::infinity();
        run.max_targeted_final = 0.0;
        for (const int i : res.injection_targets) {
            const double w = res.final_wealth(i);
            if (w > run.threshold) ++escaped;
            if (w < spec.poverty_floor) ++run.n_below_floor;
            run.min_targeted_final = std::min(run.min_targeted_final, w);
            run.max_targeted_final = std::max(run.max_targeted_final, w);
        }
        run.record.escape_fraction =
            static_cast<double>(escaped) / static_cast<double>(spec.target_count);
        report.runs.push_back(std::move(run));
    }

    double mean = 0.0;
    for (const auto& r : report.runs) mean += *r.record.escape_fraction;
    mean /= static_cast<double>(report.runs.size());
    double ss = 0.0;
    for (const auto& r : report.runs) {
        const double d = *r.record.escape_fraction - mean;
        ss += d * d;
    }
    report.mean_escape = mean;
    report.sd_escape = report.runs.size() > 1
                           ? std::sqrt(ss / static_cast<double>(report.runs.size() - 1))
                           : 0.0;
    return report;
}

}  // namespace povsim
