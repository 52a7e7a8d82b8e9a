#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "shapaudit/metrics.hpp"
#include "shapaudit/rng.hpp"

using namespace shapaudit;

namespace {

Ranking rank_of(std::initializer_list<int> order) {
    Ranking r;
    r.order = order;
    return r;
}

ExplanationVector expl(std::vector<double> values, std::uint64_t es = 0) {
    ExplanationVector e;
    e.values = std::move(values);
    e.feature_names.resize(e.values.size());
    for (std::size_t i = 0; i < e.values.size(); ++i) {
        e.feature_names[i] = "f" + std::to_string(i);
    }
    e.instance_id = "t:0";
    e.seed_pair = {1, es};
    return e;
}

Ranking random_ranking(RngStream& rng, std::size_t d) {
    std::vector<double> v(d);
    for (auto& x : v) x = rng.next_normal();
    return ranking_of(std::span<const double>(v));
}

}  // namespace

TEST_CASE("l2 distance: hand values and axioms") {
    const std::vector<double> a{1.0, 2.0, 3.0};
    const std::vector<double> b{1.0, 0.0, -1.0};
    REQUIRE(l2_distance(a, b) == Catch::Approx(std::sqrt(0.0 + 4.0 + 16.0)));
    REQUIRE(l2_distance(a, a) == 0.0);
    REQUIRE(l2_distance(a, b) == l2_distance(b, a));
    REQUIRE_THROWS_AS(l2_distance(a, std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("top-k jaccard distance: hand values") {
    const auto a = rank_of({0, 1, 2, 3});
    REQUIRE(topk_jaccard(a, a, 3) == 0.0);
    REQUIRE(topk_jaccard(a, rank_of({3, 2, 1, 0}), 2) == 1.0);  // {0,1} vs {2,3}
    // {0,1,2} vs {0,1,3}: intersection 2, union 4
    REQUIRE(topk_jaccard(a, rank_of({0, 1, 3, 2}), 3) == Catch::Approx(0.5));
    // order within the top-k set never matters
    REQUIRE(topk_jaccard(a, rank_of({2, 0, 1, 3}), 3) == 0.0);
    REQUIRE_THROWS_AS(topk_jaccard(a, a, 0), ValidationError);
    REQUIRE_THROWS_AS(topk_jaccard(a, a, 5), ValidationError);
}

TEST_CASE("rbo sensitivity: identity, reversal, hand value, default depth") {
    const auto a3 = rank_of({0, 1, 2});
    // identical rankings are exactly zero-sensitive
    REQUIRE(rbo_sensitivity(a3, a3, 0.5) == Catch::Approx(0.0).margin(1e-12));

    // d=2 reversal: sensitivity is 1 - p
    for (double p : {0.3, 0.5, 0.9}) {
        REQUIRE(rbo_sensitivity(rank_of({0, 1}), rank_of({1, 0}), p) ==
                Catch::Approx(1.0 - p).margin(1e-12));
    }

    // d=3 swap of the first two at p = 0.5: overlap fractions 0, 1, 1
    // rbo = 0.5 (0 + 0.5 + 0.25) + 0.125 = 0.5
    REQUIRE(rbo_sensitivity(a3, rank_of({1, 0, 2}), 0.5) == Catch::Approx(0.5).margin(1e-12));

    // p <= 0 resolves to 1 - 1/d
    const auto deflt = rbo_sensitivity(rank_of({0, 1}), rank_of({1, 0}), 0.0);
    REQUIRE(deflt == Catch::Approx(0.5).margin(1e-12));  // 1 - p with p = 1 - 1/2

    REQUIRE_THROWS_AS(rbo_sensitivity(a3, a3, 1.0), ValidationError);
}

TEST_CASE("kendall tau distance: identity, swap, reversal") {
    const auto a = rank_of({0, 1, 2, 3});
    REQUIRE(kendall_tau(a, a) == 0.0);
    REQUIRE(kendall_tau(a, rank_of({1, 0, 2, 3})) == 1.0);
    REQUIRE(kendall_tau(a, rank_of({3, 2, 1, 0})) == 6.0);  // C(4,2)
}

TEST_CASE("metric axioms hold on random rankings") {
    auto rng = RngStream::from_seed(777);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t d = 2 + rng.next_below(10);
        const auto a = random_ranking(rng, d);
        const auto b = random_ranking(rng, d);
        const int k = 1 + static_cast<int>(rng.next_below(d));
        const double p = 0.05 + 0.9 * rng.next_unit();

        const double j = topk_jaccard(a, b, k);
        REQUIRE(j >= 0.0);
        REQUIRE(j <= 1.0);
        REQUIRE(j == topk_jaccard(b, a, k));
        REQUIRE(topk_jaccard(a, a, k) == 0.0);

        const double r = rbo_sensitivity(a, b, p);
        REQUIRE(r >= -1e-12);
        REQUIRE(r <= 1.0);
        REQUIRE(r == Catch::Approx(rbo_sensitivity(b, a, p)).margin(1e-15));
        REQUIRE(rbo_sensitivity(a, a, p) == Catch::Approx(0.0).margin(1e-12));

        const double kt = kendall_tau(a, b);
        REQUIRE(kt >= 0.0);
        REQUIRE(kt <= static_cast<double>(d * (d - 1) / 2));
        REQUIRE(kt == kendall_tau(b, a));
    }
}

TEST_CASE("pairwise aggregation: order, moments, rescaling invariance") {
    const std::vector<ExplanationVector> runs{
        expl({1.0, 0.0, 0.0}, 1), expl({0.0, 1.0, 0.0}, 2), expl({0.0, 0.0, 1.0}, 3)};

    const auto s = pairwise_aggregate(runs, MetricKind::l2);
    REQUIRE(s.values.size() == 3);  // (0,1), (0,2), (1,2) in that order
    const double r2 = std::sqrt(2.0);
    REQUIRE(s.values == std::vector<double>{r2, r2, r2});
    REQUIRE(s.mean == Catch::Approx(r2));
    REQUIRE(s.median == Catch::Approx(r2));

    // two runs produce exactly one pair; mean == median == the value
    const std::vector<ExplanationVector> two{expl({1.0, 2.0}, 1), expl({2.0, 2.0}, 2)};
    const auto s2 = pairwise_aggregate(two, MetricKind::l2);
    REQUIRE(s2.values.size() == 1);
    REQUIRE(s2.mean == s2.values[0]);
    REQUIRE(s2.median == s2.values[0]);

    // identical runs: all metrics are exactly zero
    const std::vector<ExplanationVector> same{expl({0.3, -0.2, 0.1}, 1),
                                              expl({0.3, -0.2, 0.1}, 2)};
    for (MetricKind kind : {MetricKind::l2, MetricKind::topk_jaccard, MetricKind::rbo,
                            MetricKind::kendall_tau}) {
        MetricParams mp;
        mp.k = 2;
        const auto z = pairwise_aggregate(same, kind, mp);
        REQUIRE(z.mean == Catch::Approx(0.0).margin(1e-12));
    }

    // rank metrics ignore positive rescaling of any run
    auto rng = RngStream::from_seed(31);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ExplanationVector> base;
        for (int r = 0; r < 3; ++r) {
            std::vector<double> v(5);
            for (auto& x : v) x = rng.next_normal();
            base.push_back(expl(std::move(v), static_cast<std::uint64_t>(r)));
        }
        auto scaled = base;
        for (auto& e : scaled) {
            const double c = 0.1 + 5.0 * rng.next_unit();
            for (auto& x : e.values) x *= c;
        }
        for (MetricKind kind :
             {MetricKind::topk_jaccard, MetricKind::rbo, MetricKind::kendall_tau}) {
            REQUIRE(pairwise_aggregate(base, kind).values ==
                    pairwise_aggregate(scaled, kind).values);
        }
    }

    REQUIRE_THROWS_AS(pairwise_aggregate(std::vector<ExplanationVector>{runs[0]},
                                         MetricKind::l2),
                      ValidationError);
}

TEST_CASE("feature sensitivity profile matches a hand computation") {
    const std::vector<ExplanationVector> runs{expl({1.0, -1.0}, 1), expl({3.0, -1.0}, 2),
                                              expl({2.0, -4.0}, 3)};
    const auto prof = feature_sensitivity(runs);
    REQUIRE(prof.n_runs == 3);
    // feature 0 diffs: |1-3|=2, |1-2|=1, |3-2|=1 -> ordered-pair mean (2+1+1)/3
    REQUIRE(prof.mean_pairwise_abs_diff[0] == Catch::Approx(4.0 / 3.0));
    // feature 1 diffs: 0, 3, 3 -> mean 2
    REQUIRE(prof.mean_pairwise_abs_diff[1] == Catch::Approx(2.0));
    REQUIRE(prof.mean_abs_value[0] == Catch::Approx(2.0));
    REQUIRE(prof.mean_abs_value[1] == Catch::Approx(2.0));

    auto bad = runs;
    bad[1].feature_names[0] = "other";
    REQUIRE_THROWS_AS(feature_sensitivity(bad), ValidationError);
}
