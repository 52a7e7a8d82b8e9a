#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "shapaudit/core.hpp"
#include "shapaudit/csv.hpp"
#include "shapaudit/data.hpp"
#include "shapaudit/rng.hpp"

using namespace shapaudit;

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << content;
}

}  // namespace

TEST_CASE("rng streams are reproducible and fork-stable") {
    auto a = RngStream::from_seed(42);
    auto b = RngStream::from_seed(42);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());

    // fork(tag) must not depend on how much of the parent was consumed.
    auto parent1 = RngStream::from_seed(7);
    auto parent2 = RngStream::from_seed(7);
    for (int i = 0; i < 123; ++i) parent2.next_u64();
    auto c1 = parent1.fork(5);
    auto c2 = parent2.fork(5);
    for (int i = 0; i < 100; ++i) REQUIRE(c1.next_u64() == c2.next_u64());

    // distinct tags and distinct seeds give distinct streams
    auto d1 = parent1.fork(1);
    auto d2 = parent1.fork(2);
    REQUIRE(d1.next_u64() != d2.next_u64());
    REQUIRE(RngStream::from_seed(1).next_u64() != RngStream::from_seed(2).next_u64());
}

TEST_CASE("bounded integers stay in range and look uniform") {
    auto rng = RngStream::from_seed(99);
    std::vector<int> counts(10, 0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
        const auto v = rng.next_below(10);
        REQUIRE(v < 10);
        counts[static_cast<std::size_t>(v)]++;
    }
    for (int c : counts) {
        REQUIRE(c > draws / 10 - 600);
        REQUIRE(c < draws / 10 + 600);
    }
    REQUIRE_THROWS_AS(rng.next_below(0), ValidationError);
}

TEST_CASE("normal and gamma moments match their distributions") {
    auto rng = RngStream::from_seed(123);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.next_normal();
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    REQUIRE(std::fabs(mean) < 0.01);
    REQUIRE(std::fabs(var - 1.0) < 0.02);

    for (double alpha : {0.3, 1.0, 2.5, 10.0}) {
        GammaSampler g(alpha);
        double gs = 0.0, gss = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = g.draw(rng);
            REQUIRE(x >= 0.0);
            gs += x;
            gss += x * x;
        }
        const double gmean = gs / n;
        const double gvar = gss / n - gmean * gmean;
        REQUIRE(std::fabs(gmean - alpha) < 0.05 * alpha + 0.01);
        REQUIRE(std::fabs(gvar - alpha) < 0.08 * alpha + 0.02);
    }
    REQUIRE_THROWS_AS(GammaSampler(0.0), ValidationError);
}

TEST_CASE("sampling without replacement is a seeded permutation prefix") {
    auto r1 = RngStream::from_seed(5);
    auto r2 = RngStream::from_seed(5);
    const auto prefix = r1.sample_without_replacement(50, 12);
    const auto full = r2.permutation(50);
    REQUIRE(prefix.size() == 12);
    for (std::size_t i = 0; i < prefix.size(); ++i) REQUIRE(prefix[i] == full[i]);

    std::set<std::size_t> distinct(full.begin(), full.end());
    REQUIRE(distinct.size() == 50);
    REQUIRE(*distinct.begin() == 0);
    REQUIRE(*distinct.rbegin() == 49);
    REQUIRE_THROWS_AS(r1.sample_without_replacement(3, 4), ValidationError);
}

TEST_CASE("ranking orders by magnitude with index ties") {
    const std::vector<double> phi{0.1, -0.4, 0.4, 0.0};
    const auto r = ranking_of(std::span<const double>(phi));
    REQUIRE(r.order == std::vector<int>{1, 2, 0, 3});

    // positive rescaling never changes the ranking
    auto rng = RngStream::from_seed(2024);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(8);
        for (auto& x : v) x = rng.next_normal();
        std::vector<double> scaled(v);
        const double c = 0.01 + 10.0 * rng.next_unit();
        for (auto& x : scaled) x *= c;
        REQUIRE(ranking_of(std::span<const double>(v)).order ==
                ranking_of(std::span<const double>(scaled)).order);
    }

    const std::vector<double> bad{1.0, std::nan("")};
    REQUIRE_THROWS_AS(ranking_of(std::span<const double>(bad)), ValidationError);
}

TEST_CASE("explanation vectors round-trip through JSON exactly") {
    ExplanationVector e;
    e.values = {0.1 + 0.2, -1.0 / 3.0, 1e-17, 4.0};
    e.feature_names = {"a", "b", "c", "d"};
    e.instance_id = "toy:17";
    e.seed_pair = {12345678901234567ULL, 42};
    e.validate();

    const auto j = e.to_json();
    const auto back = ExplanationVector::from_json(json::parse(j.dump()));
    REQUIRE(back.values == e.values);
    REQUIRE(back.feature_names == e.feature_names);
    REQUIRE(back.instance_id == e.instance_id);
    REQUIRE(back.seed_pair == e.seed_pair);

    ExplanationVector nan_vec = e;
    nan_vec.values[0] = std::nan("");
    REQUIRE_THROWS_AS(nan_vec.validate(), ValidationError);
}

TEST_CASE("csv writer and reader agree on awkward fields") {
    const std::string path = "tmp_roundtrip.csv";
    {
        std::ofstream out(path, std::ios::binary);
        CsvWriter w(out);
        w.row({"name", "note"});
        w.row({"plain", "with,comma"});
        w.row({"quote\"inside", "line\nbreak"});
        w.row({"", "trailing"});
    }
    const auto t = read_csv_file(path);
    REQUIRE(t.header == std::vector<std::string>{"name", "note"});
    REQUIRE(t.rows.size() == 3);
    REQUIRE(t.rows[0] == std::vector<std::string>{"plain", "with,comma"});
    REQUIRE(t.rows[1] == std::vector<std::string>{"quote\"inside", "line\nbreak"});
    REQUIRE(t.rows[2] == std::vector<std::string>{"", "trailing"});
    std::remove(path.c_str());

    write_file("tmp_lf.csv", "a,b\n1,2\n3,4\n");
    const auto lf = read_csv_file("tmp_lf.csv");
    REQUIRE(lf.rows.size() == 2);
    std::remove("tmp_lf.csv");

    write_file("tmp_ragged.csv", "a,b\r\n1,2,3\r\n");
    REQUIRE_THROWS_AS(read_csv_file("tmp_ragged.csv"), IoError);
    std::remove("tmp_ragged.csv");
}

TEST_CASE("shortest round-trip double formatting") {
    for (double v : {0.5, 0.1, 1.0 / 3.0, 1e-17, 123456.789, -2.25, 0.0}) {
        const std::string s = format_double(v);
        REQUIRE(std::stod(s) == v);
    }
    REQUIRE(format_double(0.5) == "0.5");
    REQUIRE(format_double(2.0) == "2");
}

namespace {

DatasetSchema toy_schema() {
    return DatasetSchema::from_json(json{
        {"id", "toy"},
        {"label", "outcome"},
        {"positive_label", "bad"},
        {"features",
         json::array({json{{"name", "age"}, {"kind", "numeric"}},
                      json{{"name", "colour"}, {"kind", "categorical"}},
                      json{{"name", "steady"}, {"kind", "numeric"}}})}});
}

}  // namespace

TEST_CASE("dataset loading: drops, registries, label map, errors") {
    const std::string path = "tmp_toy.csv";
    write_file(path,
               "age,colour,steady,outcome\n"
               "30,red,5,bad\n"
               "40,blue,5,good\n"
               "NA,green,5,bad\n"
               "25,blue,5,good\n"
               "50,?,5,bad\n"
               "35,red,5,\n"
               "60,amber,5,bad\n");

    const auto ds = load_csv(path, toy_schema());
    REQUIRE(ds.n() == 4);
    REQUIRE(ds.dropped_rows == 3);
    REQUIRE(ds.d() == 3);
    REQUIRE(ds.schema.features[1].levels == std::vector<std::string>{"amber", "blue", "red"});
    REQUIRE(ds.labels == std::vector<int>{1, 0, 0, 1});
    // categorical cells hold indices into the sorted registry
    REQUIRE(ds.rows[0][1] == 2.0);  // red
    REQUIRE(ds.rows[1][1] == 1.0);  // blue
    REQUIRE(ds.rows[3][1] == 0.0);  // amber
    std::remove(path.c_str());

    write_file("tmp_unknown.csv", "age,colour,steady,outcome,extra\n30,red,5,bad,1\n");
    REQUIRE_THROWS_AS(load_csv("tmp_unknown.csv", toy_schema()), IoError);
    std::remove("tmp_unknown.csv");

    write_file("tmp_badnum.csv",
               "age,colour,steady,outcome\n30,red,5,bad\nxx,red,5,good\n");
    REQUIRE_THROWS_WITH(load_csv("tmp_badnum.csv", toy_schema()),
                        Catch::Matchers::ContainsSubstring("line 3") &&
                            Catch::Matchers::ContainsSubstring("age"));
    std::remove("tmp_badnum.csv");

    write_file("tmp_nolabel.csv", "age,colour,steady\n30,red,5\n");
    REQUIRE_THROWS_AS(load_csv("tmp_nolabel.csv", toy_schema()), IoError);
    std::remove("tmp_nolabel.csv");
}

TEST_CASE("preprocess transform standardizes and one-hot encodes") {
    const std::string path = "tmp_fit.csv";
    write_file(path,
               "age,colour,steady,outcome\n"
               "10,red,7,bad\n"
               "20,blue,7,good\n"
               "30,red,7,bad\n"
               "40,amber,7,good\n");
    const auto ds = load_csv(path, toy_schema());
    std::remove(path.c_str());

    const std::vector<std::size_t> train{0, 1, 2};  // amber never seen in training
    const auto t = fit_transform(ds, train);

    // groups partition the encoded columns
    REQUIRE(t.group_map.size() == 3);
    std::size_t total = 0;
    for (const auto& g : t.group_map) total += g.size();
    REQUIRE(total == t.encoded_dim);
    REQUIRE(t.group_map[1].size() == 2);  // blue, red seen in training

    // standardized training columns have mean 0, population sd 1
    const auto x = encode_rows(t, ds, train);
    const std::size_t age_col = t.group_map[0][0];
    double mean = 0.0;
    for (std::size_t i = 0; i < 3; ++i) mean += x.at(i, age_col);
    mean /= 3.0;
    double var = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        var += (x.at(i, age_col) - mean) * (x.at(i, age_col) - mean);
    }
    var /= 3.0;
    REQUIRE(std::fabs(mean) < 1e-12);
    REQUIRE(std::fabs(var - 1.0) < 1e-12);

    // constant column encodes to zero, not NaN
    const std::size_t steady_col = t.group_map[2][0];
    for (std::size_t i = 0; i < 3; ++i) REQUIRE(x.at(i, steady_col) == 0.0);

    // unseen level encodes to an all-zero group
    const auto enc = t.apply(ds.rows[3]);
    for (std::size_t c : t.group_map[1]) REQUIRE(enc[c] == 0.0);

    REQUIRE(t.encoded_names()[t.group_map[1][0]] == "colour=blue");

    const auto j = t.to_json();
    const auto back = PreprocessTransform::from_json(j);
    REQUIRE(back.apply(ds.rows[3]) == enc);
    REQUIRE(back.encoded_dim == t.encoded_dim);

    REQUIRE_THROWS_AS(fit_transform(ds, std::vector<std::size_t>{}), ValidationError);
}

TEST_CASE("stratified folds balance sizes and class shares") {
    // synthetic label vector: 988 rows, 296 positives, matching the shape of
    // the bundled credit dataset
    Dataset ds;
    ds.schema.id = "synthetic";
    ds.schema.features.push_back({"x", FeatureKind::numeric, {}});
    for (std::size_t i = 0; i < 988; ++i) {
        ds.rows.push_back({static_cast<double>(i)});
        ds.labels.push_back(i < 296 ? 1 : 0);
    }

    const auto plan = stratified_folds(ds, 5, 77);
    std::vector<std::size_t> sizes(5, 0);
    std::vector<std::size_t> pos(5, 0);
    for (std::size_t r = 0; r < ds.n(); ++r) {
        REQUIRE(plan.assignments[r] >= 0);
        REQUIRE(plan.assignments[r] < 5);
        sizes[static_cast<std::size_t>(plan.assignments[r])]++;
        if (ds.labels[r] == 1) pos[static_cast<std::size_t>(plan.assignments[r])]++;
    }
    std::multiset<std::size_t> size_set(sizes.begin(), sizes.end());
    REQUIRE(size_set == std::multiset<std::size_t>{197, 197, 198, 198, 198});

    const double global_share = 296.0 / 988.0;
    for (std::size_t f = 0; f < 5; ++f) {
        const double share = static_cast<double>(pos[f]) / static_cast<double>(sizes[f]);
        REQUIRE(std::fabs(share - global_share) < 0.02);
    }

    const auto plan2 = stratified_folds(ds, 5, 77);
    REQUIRE(plan.assignments == plan2.assignments);
    const auto plan3 = stratified_folds(ds, 5, 78);
    REQUIRE(plan.assignments != plan3.assignments);

    // train/test offsets are complementary and sorted
    const auto test0 = plan.test_rows(0);
    const auto train0 = plan.train_rows(0);
    REQUIRE(test0.size() + train0.size() == ds.n());
    REQUIRE(std::is_sorted(test0.begin(), test0.end()));
    REQUIRE(std::is_sorted(train0.begin(), train0.end()));

    Dataset tiny = ds;
    tiny.rows.resize(6);
    tiny.labels = {1, 1, 1, 0, 0, 0};
    tiny.labels.resize(6);
    REQUIRE_THROWS_AS(stratified_folds(tiny, 5, 1), ValidationError);
}
