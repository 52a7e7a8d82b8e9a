#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <vector>

#include "shapaudit/baselines.hpp"

using namespace shapaudit;

TEST_CASE("dirichlet closed form: pinned value and parameter guards") {
    // d=16, k=3, T=0.4, rho=0.7, kappa=10:
    // (2 * 0.16 / 11) * (1 - 0.49/3 - 0.09/13) = 6472 / 268125
    const DirichletSpec calib{16, 3, 0.4, 0.7, 10.0};
    REQUIRE(dirichlet_l2_expectation(calib) ==
            Catch::Approx(6472.0 / 268125.0).epsilon(1e-12));

    DirichletSpec bad = calib;
    bad.k = 16;  // complement block would be empty
    REQUIRE_THROWS_AS(dirichlet_l2_expectation(bad), ValidationError);
    bad = calib;
    bad.rho = 1.0;
    REQUIRE_THROWS_AS(dirichlet_l2_expectation(bad), ValidationError);
    bad = calib;
    bad.kappa = 0.0;
    REQUIRE_THROWS_AS(dirichlet_l2_expectation(bad), ValidationError);
    bad = calib;
    bad.total_mass = 0.0;
    REQUIRE_THROWS_AS(dirichlet_l2_expectation(bad), ValidationError);

    // mean vector blocks
    const auto m = calib.mean_vector();
    REQUIRE(m[0] == Catch::Approx(0.7 / 3.0));
    REQUIRE(m[15] == Catch::Approx(0.3 / 13.0));
    double total = 0.0;
    for (double v : m) total += v;
    REQUIRE(total == Catch::Approx(1.0));
}

TEST_CASE("dirichlet sampler stays on the simplex with the right moments") {
    std::vector<double> alpha{2.0, 0.5, 1.5, 4.0};
    auto rng = RngStream::from_seed(404);
    const double a0 = 8.0;
    std::vector<double> mean(alpha.size(), 0.0);
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const auto x = sample_dirichlet(alpha, rng);
        double total = 0.0;
        for (double v : x) {
            REQUIRE(v >= 0.0);
            total += v;
        }
        REQUIRE(total == Catch::Approx(1.0).margin(1e-9));
        for (std::size_t j = 0; j < x.size(); ++j) mean[j] += x[j];
    }
    for (std::size_t j = 0; j < alpha.size(); ++j) {
        REQUIRE(mean[j] / n == Catch::Approx(alpha[j] / a0).margin(0.01));
    }
}

TEST_CASE("dirichlet monte carlo agrees with the closed form") {
    const DirichletSpec calib{16, 3, 0.4, 0.7, 10.0};
    const double exact = dirichlet_l2_expectation(calib);
    const double mc = dirichlet_l2_monte_carlo(calib, 200000, 2024);
    REQUIRE(std::fabs(mc - exact) / exact < 0.025);

    // a second configuration exercising alpha < 1 marginals
    const DirichletSpec sparse{6, 1, 1.3, 0.55, 2.5};
    const double exact2 = dirichlet_l2_expectation(sparse);
    const double mc2 = dirichlet_l2_monte_carlo(sparse, 150000, 7);
    REQUIRE(std::fabs(mc2 - exact2) / exact2 < 0.03);

    // same seed reproduces bitwise; the worker count must not matter
    REQUIRE(dirichlet_l2_monte_carlo(calib, 20000, 5, 1) ==
            dirichlet_l2_monte_carlo(calib, 20000, 5, 1));
    REQUIRE(dirichlet_l2_monte_carlo(calib, 20000, 5, 1) ==
            dirichlet_l2_monte_carlo(calib, 20000, 5, 4));
}

TEST_CASE("dirichlet band covers the sweep and peaks at the smallest kappa") {
    const std::vector<double> rhos{0.6, 0.7, 0.8};
    const std::vector<double> kappas{5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
    const auto band = dirichlet_l2_band(16, 3, 0.4, rhos, kappas);
    REQUIRE(band.entries.size() == rhos.size() * kappas.size());
    REQUIRE(band.lower < band.upper);
    for (const auto& e : band.entries) {
        REQUIRE(e.value >= band.lower);
        REQUIRE(e.value <= band.upper);
        if (e.params.at("kappa").get<double>() == 5.0 &&
            e.params.at("rho").get<double>() == 0.6) {
            // smallest kappa, flattest rho: widest dispersion in the sweep
            REQUIRE(e.value == Catch::Approx(band.upper));
        }
    }
}

TEST_CASE("mallows sampler produces valid, seeded, center-biased permutations") {
    auto rng = RngStream::from_seed(11);
    for (std::size_t d : {1u, 2u, 5u, 12u}) {
        const auto perm = mallows_sample(d, 0.4, rng);
        REQUIRE(perm.size() == d);
        std::vector<bool> seen(d, false);
        for (int v : perm) {
            REQUIRE(v >= 0);
            REQUIRE(static_cast<std::size_t>(v) < d);
            seen[static_cast<std::size_t>(v)] = true;
        }
        REQUIRE(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
    }

    // tiny q concentrates on the identity
    auto rng2 = RngStream::from_seed(12);
    int identity_hits = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto perm = mallows_sample(5, 0.01, rng2);
        identity_hits += perm == std::vector<int>{0, 1, 2, 3, 4};
    }
    REQUIRE(identity_hits > 950);

    REQUIRE_THROWS_AS(mallows_sample(3, 0.0, rng), ValidationError);
    REQUIRE_THROWS_AS(mallows_sample(3, 1.0, rng), ValidationError);
}

TEST_CASE("mallows sampler matches the exact pmf in total variation") {
    const std::size_t d = 4;
    const double q = 0.5;
    const auto pmf = mallows_exact_pmf(d, q);
    REQUIRE(pmf.size() == 24);

    auto rng = RngStream::from_seed(31337);
    std::map<std::vector<int>, std::size_t> counts;
    const std::size_t n = 100000;
    for (std::size_t i = 0; i < n; ++i) ++counts[mallows_sample(d, q, rng)];

    double tv = 0.0;
    for (const auto& [perm, prob] : pmf) {
        const auto it = counts.find(perm);
        const double freq =
            it == counts.end() ? 0.0
                               : static_cast<double>(it->second) / static_cast<double>(n);
        tv += std::fabs(freq - prob);
    }
    tv *= 0.5;
    REQUIRE(tv < 0.02);
}

TEST_CASE("mallows baseline mean matches enumeration for kendall tau") {
    // exact expectation of d_KT between two independent draws, by enumeration
    const std::size_t d = 4;
    const double q = 0.5;
    const auto pmf = mallows_exact_pmf(d, q);
    double exact = 0.0;
    for (const auto& [pa, qa] : pmf) {
        for (const auto& [pb, qb] : pmf) {
            Ranking a;
            a.order = pa;
            Ranking b;
            b.order = pb;
            exact += qa * qb * kendall_tau(a, b);
        }
    }

    const auto est = mallows_baseline(d, q, MetricKind::kendall_tau, {}, 60000, 99);
    REQUIRE(std::fabs(est.mean - exact) < 4.0 * est.std_error + 1e-9);
    REQUIRE(est.n == 60000);

    // determinism across seeds and worker counts
    const auto a1 = mallows_baseline(d, q, MetricKind::rbo, {}, 5000, 3, 1);
    const auto a2 = mallows_baseline(d, q, MetricKind::rbo, {}, 5000, 3, 4);
    REQUIRE(a1.mean == a2.mean);
    REQUIRE(a1.std_error == a2.std_error);

    REQUIRE_THROWS_AS(mallows_baseline(d, q, MetricKind::l2, {}, 100, 1), ValidationError);
}

TEST_CASE("rank metrics are invariant under relabeling by a shared center") {
    // relabeling both rankings by sigma, (sigma . pi)[r] = sigma[pi[r]],
    // preserves every rank metric; this is what lets the baseline sample
    // around the identity instead of an arbitrary central ranking
    auto rng = RngStream::from_seed(52);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 3 + rng.next_below(8);
        Ranking a;
        Ranking b;
        a.order = mallows_sample(d, 0.6, rng);
        b.order = mallows_sample(d, 0.6, rng);
        const auto sigma_perm = rng.permutation(d);

        auto relabel = [&](const Ranking& r) {
            Ranking out;
            out.order.resize(d);
            for (std::size_t pos = 0; pos < d; ++pos) {
                out.order[pos] =
                    static_cast<int>(sigma_perm[static_cast<std::size_t>(r.order[pos])]);
            }
            return out;
        };
        const auto ra = relabel(a);
        const auto rb = relabel(b);

        const int k = 1 + static_cast<int>(rng.next_below(d));
        REQUIRE(topk_jaccard(a, b, k) == topk_jaccard(ra, rb, k));
        REQUIRE(rbo_sensitivity(a, b, 0.8) ==
                Catch::Approx(rbo_sensitivity(ra, rb, 0.8)).margin(1e-12));
        REQUIRE(kendall_tau(a, b) == kendall_tau(ra, rb));
    }
}

TEST_CASE("rank bands grow with dispersion and stay deterministic") {
    const std::vector<double> qs{0.3, 0.4, 0.5};
    MetricParams params;
    params.k = 3;
    const auto band = mallows_rank_band(16, MetricKind::topk_jaccard, params, qs, 20000, 77);
    REQUIRE(band.entries.size() == 3);
    REQUIRE(band.entries[0].value < band.entries[1].value);
    REQUIRE(band.entries[1].value < band.entries[2].value);
    REQUIRE(band.lower == Catch::Approx(band.entries[0].value));
    REQUIRE(band.upper == Catch::Approx(band.entries[2].value));

    const auto band2 = mallows_rank_band(16, MetricKind::topk_jaccard, params, qs, 20000, 77, 4);
    for (std::size_t i = 0; i < 3; ++i) {
        REQUIRE(band.entries[i].value == band2.entries[i].value);
    }

    const auto rband = mallows_rank_band(8, MetricKind::rbo, {}, qs, 10000, 5);
    REQUIRE(rband.entries[0].value < rband.entries[2].value);
    REQUIRE(rband.lower > 0.0);
    REQUIRE(rband.upper < 1.0);
}
