#include <doctest.h>

#include <cmath>
#include <vector>

#include <povsim/analysis.hpp>

using namespace povsim;

namespace {

RunRecord record_with(Regime individual, double total_final, double gini_value,
                      const FreeParams& params = {}) {
    RunRecord rec;
    rec.ok = true;
    rec.individual_regime = individual;
    rec.community_regime = individual == Regime::all_rich ? Regime::all_rich
                                                          : Regime::some_rich;
    rec.total_final_wealth = total_final;
    rec.final_gini = gini_value;
    rec.params = params;
    rec.steps = 10;
    return rec;
}

}  // namespace

TEST_CASE("sobol indices recover the additive variance split") {
    const std::vector<Bounds> unit = {{0.0, 1.0}, {0.0, 1.0}};
    const auto plan = saltelli_plan(512, unit);
    std::vector<double> qoi(static_cast<std::size_t>(plan.row_count()));
    for (int r = 0; r < plan.row_count(); ++r)
        qoi[static_cast<std::size_t>(r)] = plan.row(r)[0] + 2.0 * plan.row(r)[1];

    const auto idx = sobol_indices(plan, qoi, 300, 9);
    CHECK(!idx.degenerate);
    CHECK(idx.first[0] == doctest::Approx(0.2).epsilon(0.05));
    CHECK(idx.first[1] == doctest::Approx(0.8).epsilon(0.05));
    CHECK(idx.total[0] == doctest::Approx(0.2).epsilon(0.05));
    CHECK(idx.total[1] == doctest::Approx(0.8).epsilon(0.05));

    CHECK(idx.first_lo[0] <= 0.2);
    CHECK(idx.first_hi[0] >= 0.2);
    CHECK(idx.first_lo[1] <= 0.8);
    CHECK(idx.first_hi[1] >= 0.8);
    CHECK(idx.total_lo[0] <= 0.2);
    CHECK(idx.total_hi[0] >= 0.2);

    for (int i = 0; i < 2; ++i) {
        CHECK(idx.first_lo[static_cast<std::size_t>(i)] <= idx.first_hi[static_cast<std::size_t>(i)]);
        CHECK(idx.total[static_cast<std::size_t>(i)] >=
              idx.first[static_cast<std::size_t>(i)] - 0.05);
    }
    CHECK(idx.first_samples.size() == 300);
    CHECK(idx.total_samples.size() == 300);
}

TEST_CASE("sobol indices on a constant response are all zero") {
    const std::vector<Bounds> unit = {{0.0, 1.0}, {0.0, 1.0}};
    const auto plan = saltelli_plan(64, unit);
    const std::vector<double> qoi(static_cast<std::size_t>(plan.row_count()), 3.5);
    const auto idx = sobol_indices(plan, qoi);
    CHECK(idx.degenerate);
    for (int i = 0; i < 2; ++i) {
        CHECK(idx.first[static_cast<std::size_t>(i)] == 0.0);
        CHECK(idx.total[static_cast<std::size_t>(i)] == 0.0);
        CHECK(idx.first_lo[static_cast<std::size_t>(i)] == 0.0);
        CHECK(idx.total_hi[static_cast<std::size_t>(i)] == 0.0);
    }
}

TEST_CASE("sobol indices input validation") {
    const std::vector<Bounds> unit = {{0.0, 1.0}, {0.0, 1.0}};
    const auto plan = saltelli_plan(64, unit);
    std::vector<double> qoi(static_cast<std::size_t>(plan.row_count()), 1.0);
    CHECK_THROWS_AS(sobol_indices(plan, qoi, 100), std::invalid_argument);
    CHECK_THROWS_AS(sobol_indices(plan, std::vector<double>(10, 1.0)),
                    std::invalid_argument);
    qoi[3] = std::nan("");
    CHECK_THROWS_AS(sobol_indices(plan, qoi), std::invalid_argument);
}

TEST_CASE("design-level sobol averages repetitions per row first") {
    const auto design = saltelli_design(16, FreeParamBounds{}, 5, 3);
    const auto rows = static_cast<std::size_t>(design.row_count());

    std::vector<double> per_row(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const auto p = design.params_at(static_cast<int>(r));
        per_row[r] = p.theta * 10.0 + p.beta;
    }
    std::vector<double> per_run(rows * 3);
    for (std::size_t r = 0; r < rows; ++r) {
        per_run[r * 3 + 0] = per_row[r] - 1.0;
        per_run[r * 3 + 1] = per_row[r];
        per_run[r * 3 + 2] = per_row[r] + 1.0;
    }

    const auto via_runs = sobol_indices(design, per_run, 200, 77);
    const auto via_rows = sobol_indices(design.plan, per_row, 200, 77);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(via_runs.first[i] == doctest::Approx(via_rows.first[i]).epsilon(1e-12));
        CHECK(via_runs.total[i] == doctest::Approx(via_rows.total[i]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(sobol_indices(design, per_row), std::invalid_argument);
}

TEST_CASE("wealth gini correlation restricted to SomeRich runs") {
    std::vector<RunRecord> records;
    for (int i = 0; i < 6; ++i)
        records.push_back(record_with(Regime::some_rich, 100.0 + i * 10.0,
                                      0.9 - 0.1 * i));
    // Outliers in other regimes must not affect the fit.
    records.push_back(record_with(Regime::all_poor, 1e6, 0.99));
    records.push_back(record_with(Regime::all_rich, 1e-3, 0.01));

    const auto rep = wealth_gini_correlation(records);
    CHECK(rep.defined);
    CHECK(rep.n == 6);
    CHECK(rep.r == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("wealth gini correlation flags degenerate inputs") {
    std::vector<RunRecord> few = {record_with(Regime::some_rich, 1.0, 0.5),
                                  record_with(Regime::some_rich, 2.0, 0.4)};
    const auto rep_few = wealth_gini_correlation(few);
    CHECK(!rep_few.defined);
    CHECK(rep_few.note == "fewer than 3 SomeRich records");

    std::vector<RunRecord> flat = {record_with(Regime::some_rich, 1.0, 0.5),
                                   record_with(Regime::some_rich, 2.0, 0.5),
                                   record_with(Regime::some_rich, 3.0, 0.5)};
    const auto rep_flat = wealth_gini_correlation(flat);
    CHECK(!rep_flat.defined);
    CHECK(rep_flat.note == "degenerate variance");
}

TEST_CASE("regime parameter profile normalizes to the parameter bounds") {
    const FreeParamBounds bounds;
    FreeParams at_lo;
    at_lo.ell = bounds.ell.lo;
    at_lo.g_upper = bounds.g_upper.lo;
    at_lo.beta = bounds.beta.lo;
    at_lo.theta = bounds.theta.lo;
    at_lo.alpha = bounds.alpha.lo;
    FreeParams at_hi;
    at_hi.ell = bounds.ell.hi;
    at_hi.g_upper = bounds.g_upper.hi;
    at_hi.beta = bounds.beta.hi;
    at_hi.theta = bounds.theta.hi;
    at_hi.alpha = bounds.alpha.hi;

    std::vector<RunRecord> records = {
        record_with(Regime::all_poor, 1.0, 0.1, at_lo),
        record_with(Regime::all_rich, 1.0, 0.1, at_lo),
        record_with(Regime::all_rich, 1.0, 0.1, at_hi),
    };
    const auto profile = regime_parameter_profile(records, bounds);

    const auto& poor = profile[static_cast<std::size_t>(Regime::all_poor)];
    CHECK(poor.present);
    CHECK(poor.n_runs == 1);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(poor.mean[i] == doctest::Approx(0.0));
        CHECK(poor.sd[i] == doctest::Approx(0.0));
    }

    const auto& rich = profile[static_cast<std::size_t>(Regime::all_rich)];
    CHECK(rich.present);
    CHECK(rich.n_runs == 2);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(rich.mean[i] == doctest::Approx(0.5));
        CHECK(rich.sd[i] == doctest::Approx(0.5));
    }

    CHECK(!profile[static_cast<std::size_t>(Regime::some_rich)].present);
    CHECK(profile[static_cast<std::size_t>(Regime::some_rich)].n_runs == 0);
}

TEST_CASE("regime parameter profile at the community level") {
    std::vector<RunRecord> records;
    RunRecord rec;
    rec.ok = true;
    rec.individual_regime = Regime::some_rich;
    rec.community_regime = Regime::all_rich;
    records.push_back(rec);
    const auto profile =
        regime_parameter_profile(records, FreeParamBounds{}, RegimeLevel::community);
    CHECK(profile[static_cast<std::size_t>(Regime::all_rich)].present);
    CHECK(!profile[static_cast<std::size_t>(Regime::some_rich)].present);
}

TEST_CASE("project return summary distinguishes funded-step averages") {
    RunRecord rec;
    rec.ok = true;
    rec.steps = 10;
    rec.individual_regime = Regime::some_rich;
    rec.project_avg_factor = {0.0, 2.0, 0.6};
    rec.project_funded_steps = {0, 10, 3};
    rec.project_expected_factor = {1.2, 2.0, 1.5};

    const auto summary = project_return_summary({rec});
    const auto g = static_cast<std::size_t>(Regime::some_rich);
    REQUIRE(summary.all_step_averages[g].size() == 3);
    CHECK(summary.all_step_averages[g][0] == doctest::Approx(0.0));
    CHECK(summary.all_step_averages[g][1] == doctest::Approx(2.0));
    CHECK(summary.all_step_averages[g][2] == doctest::Approx(0.6));

    REQUIRE(summary.funded_step_averages[g].size() == 2);
    CHECK(summary.funded_step_averages[g][0] == doctest::Approx(2.0));
    CHECK(summary.funded_step_averages[g][1] == doctest::Approx(2.0));

    CHECK(summary.all_step_averages[static_cast<std::size_t>(Regime::all_poor)].empty());
}

TEST_CASE("bimodal demo pools k samples with a histogram") {
    const auto demo = bimodal_sum_demo(1, 31, 40);
    CHECK(demo.sample.size() == 2000);
    CHECK(demo.bins.size() == 40);
    long total = 0;
    for (const auto& b : demo.bins) total += b.count;
    CHECK(total == 2000);
    CHECK(demo.min <= demo.mean);
    CHECK(demo.mean <= demo.max);

    const auto again = bimodal_sum_demo(1, 31, 40);
    CHECK(again.mean == demo.mean);
    CHECK(again.bins.size() == demo.bins.size());
    for (std::size_t i = 0; i < demo.bins.size(); ++i)
        CHECK(again.bins[i].count == demo.bins[i].count);
}
