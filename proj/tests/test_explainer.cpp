#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "shapaudit/explainer.hpp"
#include "test_util.hpp"

using namespace shapaudit;
using shaptest::all_rows;
using shaptest::make_synthetic;

namespace {

BackgroundSet fixed_background(std::vector<RawRow> rows, std::uint64_t seed = 0) {
    BackgroundSet bg;
    bg.rows = std::move(rows);
    bg.explainer_seed = seed;
    return bg;
}

double max_abs_gap(std::span<const double> a, std::span<const double> b) {
    REQUIRE(a.size() == b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("background sampling is seeded, bounded and order-preserving") {
    const auto ds = make_synthetic(60, 5);
    const auto pool = all_rows(ds);

    const auto b1 = sample_background(ds, pool, 10, 42);
    const auto b2 = sample_background(ds, pool, 10, 42);
    const auto b3 = sample_background(ds, pool, 10, 43);
    REQUIRE(b1.rows == b2.rows);
    REQUIRE(b1.rows != b3.rows);
    REQUIRE(b1.k() == 10);

    // k equal to the pool size returns the whole pool in seeded order
    const auto whole = sample_background(ds, pool, pool.size(), 7);
    REQUIRE(whole.k() == pool.size());
    auto sorted_rows = whole.rows;
    std::sort(sorted_rows.begin(), sorted_rows.end());
    auto expect = ds.rows;
    std::sort(expect.begin(), expect.end());
    REQUIRE(sorted_rows == expect);
    REQUIRE(whole.rows != ds.rows);  // permuted, not in dataset order

    REQUIRE_THROWS_AS(sample_background(ds, pool, 0, 1), ValidationError);
    REQUIRE_THROWS_AS(sample_background(ds, pool, pool.size() + 1, 1), ValidationError);
}

TEST_CASE("value function swaps coalition features against the background") {
    const PredictFn f = [](const RawRow& r) { return 3.0 * r[0] + r[1] * r[1] - r[2]; };
    const RawRow x{1.0, 2.0, 3.0};
    const auto bg = fixed_background({{10.0, 20.0, 30.0}, {-1.0, 0.0, 1.0}});

    // empty coalition: mean prediction over the raw background
    REQUIRE(value_function(f, x, {0, 0, 0}, bg) ==
            Catch::Approx(0.5 * ((30.0 + 400.0 - 30.0) + (-3.0 + 0.0 - 1.0))));
    // full coalition: the instance itself, averaged K times
    REQUIRE(value_function(f, x, {1, 1, 1}, bg) == Catch::Approx(3.0 + 4.0 - 3.0));
    // partial coalition mixes instance and background cells
    REQUIRE(value_function(f, x, {1, 0, 0}, bg) ==
            Catch::Approx(0.5 * ((3.0 + 400.0 - 30.0) + (3.0 + 0.0 - 1.0))));

    REQUIRE_THROWS_AS(value_function(f, x, {1, 0}, bg), ValidationError);
}

TEST_CASE("exact shapley matches the additive closed form") {
    // For f(r) = c + sum_i w_i r_i the attribution is phi_i = w_i (x_i - mean z_i),
    // independently derivable from linearity of the value function.
    auto rng = RngStream::from_seed(314);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 2 + trial % 7;
        std::vector<double> w(d);
        for (auto& wi : w) wi = rng.next_normal();
        const double c = rng.next_normal();
        const PredictFn f = [&](const RawRow& r) {
            double s = c;
            for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * r[i];
            return s;
        };

        RawRow x(d);
        for (auto& xi : x) xi = rng.next_normal();
        std::vector<RawRow> zs(3 + trial % 4, RawRow(d));
        for (auto& z : zs) {
            for (auto& zi : z) zi = rng.next_normal();
        }
        const auto bg = fixed_background(zs);

        const auto phi = exact_shapley_values(f, x, bg);
        for (std::size_t i = 0; i < d; ++i) {
            double mean_z = 0.0;
            for (const auto& z : bg.rows) mean_z += z[i];
            mean_z /= static_cast<double>(bg.rows.size());
            REQUIRE(phi[i] == Catch::Approx(w[i] * (x[i] - mean_z)).margin(1e-10));
        }
    }
}

TEST_CASE("exact shapley matches the two-feature interaction algebra") {
    // f(r) = r0 r1 with one background row z gives
    // phi_0 = (x0 - z0)(x1 + z1) / 2 and phi_1 = (x1 - z1)(x0 + z0) / 2.
    const PredictFn f = [](const RawRow& r) { return r[0] * r[1]; };
    const RawRow x{2.0, -3.0};
    const RawRow z{0.5, 4.0};
    const auto bg = fixed_background({z});

    const auto phi = exact_shapley_values(f, x, bg);
    REQUIRE(phi[0] == Catch::Approx(0.5 * (x[0] - z[0]) * (x[1] + z[1])));
    REQUIRE(phi[1] == Catch::Approx(0.5 * (x[1] - z[1]) * (x[0] + z[0])));

    // efficiency: contributions sum to f(x) - f(z)
    REQUIRE(phi[0] + phi[1] == Catch::Approx(x[0] * x[1] - z[0] * z[1]));
}

TEST_CASE("exact shapley refuses wide instances and names the alternative") {
    const RawRow x(15, 0.0);
    const auto bg = fixed_background({RawRow(15, 1.0)});
    const PredictFn f = [](const RawRow& r) { return r[0]; };
    REQUIRE_THROWS_WITH(exact_shapley_values(f, x, bg),
                        Catch::Matchers::ContainsSubstring("kernel"));
}

TEST_CASE("a feature the model ignores gets zero attribution") {
    const PredictFn f = [](const RawRow& r) { return std::sin(r[0]) + r[2] * r[2]; };
    auto rng = RngStream::from_seed(99);
    RawRow x{0.3, 123.0, -0.7, 5.0};
    std::vector<RawRow> zs;
    for (int i = 0; i < 5; ++i) {
        zs.push_back({rng.next_normal(), rng.next_normal(), rng.next_normal(),
                      rng.next_normal()});
    }
    const auto bg = fixed_background(zs);

    const auto phi = exact_shapley_values(f, x, bg);
    REQUIRE(std::fabs(phi[1]) <= 1e-9);
    REQUIRE(std::fabs(phi[3]) <= 1e-9);

    auto coalition_rng = RngStream::from_seed(5).fork(kCoalitionStreamTag);
    const auto kphi = kernel_shap_values(f, x, bg, 14, coalition_rng);  // 2^4-2 = full
    REQUIRE(std::fabs(kphi[1]) <= 1e-9);
}

TEST_CASE("kernel at full enumeration reproduces exact shapley") {
    auto rng = RngStream::from_seed(2718);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t d = 5 + trial % 3;  // 5..7
        std::vector<double> w(d);
        for (auto& wi : w) wi = rng.next_normal();
        const PredictFn f = [&](const RawRow& r) {
            double s = 0.2 * r[0] * r[1] - 0.5 * std::fabs(r[d - 1]);
            for (std::size_t i = 0; i < d; ++i) s += w[i] * r[i];
            return 1.0 / (1.0 + std::exp(-s));
        };
        RawRow x(d);
        for (auto& xi : x) xi = rng.next_normal();
        std::vector<RawRow> zs(4, RawRow(d));
        for (auto& z : zs) {
            for (auto& zi : z) zi = rng.next_normal();
        }
        const auto bg = fixed_background(zs);

        const auto exact = exact_shapley_values(f, x, bg);
        auto coalition_rng = RngStream::from_seed(1).fork(kCoalitionStreamTag);
        const std::size_t full = (std::size_t{1} << d) - 2;
        const auto kernel = kernel_shap_values(f, x, bg, full, coalition_rng);
        REQUIRE(max_abs_gap(exact, kernel) <= 1e-8);
    }
}

TEST_CASE("kernel estimates converge toward exact as the budget grows") {
    const std::size_t d = 8;
    auto rng = RngStream::from_seed(41);
    std::vector<double> w(d);
    for (auto& wi : w) wi = rng.next_normal();
    const PredictFn f = [&](const RawRow& r) {
        double s = 0.3 * r[0] * r[1] + 0.2 * r[2] * r[3] * (r[4] > 0 ? 1.0 : -1.0);
        for (std::size_t i = 0; i < d; ++i) s += w[i] * r[i];
        return s;
    };
    RawRow x(d);
    for (auto& xi : x) xi = rng.next_normal();
    std::vector<RawRow> zs(6, RawRow(d));
    for (auto& z : zs) {
        for (auto& zi : z) zi = rng.next_normal();
    }
    const auto bg = fixed_background(zs);
    const auto exact = exact_shapley_values(f, x, bg);

    std::vector<double> errs;
    for (std::size_t budget : {d + 2, std::size_t{40}, std::size_t{120},
                               (std::size_t{1} << d) - 2}) {
        auto coalition_rng = RngStream::from_seed(17).fork(kCoalitionStreamTag);
        const auto kphi = kernel_shap_values(f, x, bg, budget, coalition_rng);
        errs.push_back(max_abs_gap(exact, kphi));
    }
    // deterministic seeds, so the decreasing sequence is frozen by this test
    REQUIRE(errs[1] < errs[0]);
    REQUIRE(errs[2] < errs[1]);
    REQUIRE(errs[3] <= 1e-8);
}

TEST_CASE("kernel design guards its preconditions") {
    const RawRow x{1.0, 2.0, 3.0, 4.0};
    const auto bg = fixed_background({{0.0, 0.0, 0.0, 0.0}});
    const PredictFn f = [](const RawRow& r) { return r[0]; };
    auto rng = RngStream::from_seed(3);
    REQUIRE_THROWS_AS(kernel_shap_values(f, x, bg, 5, rng), ValidationError);  // < d + 2

    const RawRow single{1.0};
    REQUIRE_THROWS_AS(kernel_shap_values(f, single, bg, 8, rng), ValidationError);
}

TEST_CASE("singular coalition designs are reported as rank deficiency") {
    // all masks identical: the normal equations cannot determine d-1 coordinates
    std::vector<detail::WeightedMask> design(6, {0b011, 1.0 / 6.0});
    const std::vector<double> values(6, 0.5);
    REQUIRE_THROWS_WITH(detail::solve_constrained_wls(4, design, values, 1.0),
                        Catch::Matchers::ContainsSubstring("rank deficiency"));
}

TEST_CASE("model explanations carry names, ids, seeds and group semantics") {
    const auto ds = make_synthetic(120, 8);
    const auto rows = all_rows(ds);
    const auto model = train_model(ModelClass::rforest, ds, rows, json{{"n_trees", 12}}, 3);
    const auto bg = sample_background(ds, rows, 16, 71);

    const auto e = kernel_shap(model, ds.rows[5], bg, 64, 71, "synthetic:5");
    REQUIRE(e.feature_names == std::vector<std::string>{"x0", "x1", "x2", "cat"});
    REQUIRE(e.dim() == ds.d());  // semantic features, not one-hot columns
    REQUIRE(e.instance_id == "synthetic:5");
    REQUIRE(e.seed_pair.model_seed == 3);
    REQUIRE(e.seed_pair.explainer_seed == 71);

    // reruns with the same seed agree bitwise
    const auto e2 = kernel_shap(model, ds.rows[5], bg, 64, 71, "synthetic:5");
    REQUIRE(e.values == e2.values);
    // a budget below 2^d - 2 samples coalitions, so a fresh seed moves the
    // estimate; at and above it the design is enumerated and seed-free
    const auto s1 = kernel_shap(model, ds.rows[5], bg, 7, 71, "synthetic:5");
    const auto s2 = kernel_shap(model, ds.rows[5], bg, 7, 72, "synthetic:5");
    REQUIRE(s1.values != s2.values);
    const auto full1 = kernel_shap(model, ds.rows[5], bg, 14, 71, "synthetic:5");
    const auto full2 = kernel_shap(model, ds.rows[5], bg, 14, 72, "synthetic:5");
    REQUIRE(full1.values == full2.values);

    // efficiency against the model's own value function
    const PredictFn f = [&](const RawRow& r) { return model.predict_proba(r); };
    const double v0 = value_function(f, ds.rows[5], std::vector<std::uint8_t>(ds.d(), 0), bg);
    const double v1 = model.predict_proba(ds.rows[5]);
    double total = 0.0;
    for (double p : e.values) total += p;
    REQUIRE(std::fabs(total - (v1 - v0)) <= 1e-7);

    // exact explainer agrees with kernel at full enumeration on the model
    const auto ex = exact_shapley(model, ds.rows[5], bg, "synthetic:5");
    const auto kfull = kernel_shap(model, ds.rows[5], bg, (1u << ds.d()) - 2, 71, "synthetic:5");
    REQUIRE(max_abs_gap(ex.values, kfull.values) <= 1e-8);
}

TEST_CASE("categorical groups move as one unit in the value function") {
    const auto ds = make_synthetic(80, 15);
    const auto rows = all_rows(ds);
    const auto model = train_model(ModelClass::logreg, ds, rows, json::object(), 1);

    const RawRow& x = ds.rows[3];
    const auto bg = sample_background(ds, rows, 8, 5);
    const PredictFn f = [&](const RawRow& r) { return model.predict_proba(r); };

    // toggling the categorical feature must equal swapping the raw cell,
    // i.e. the whole one-hot group, never a single indicator column
    std::vector<std::uint8_t> mask(ds.d(), 0);
    mask[3] = 1;
    double expect = 0.0;
    for (const auto& z : bg.rows) {
        RawRow hybrid = z;
        hybrid[3] = x[3];
        expect += model.predict_proba(hybrid);
    }
    expect /= static_cast<double>(bg.rows.size());
    REQUIRE(value_function(f, x, mask, bg) == Catch::Approx(expect).epsilon(1e-12));
}
