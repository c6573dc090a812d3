#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "philautia/matrix.hpp"

using namespace philautia;

namespace {

// Independent two-pass oracle: plain nested loops over a vector-of-rows
// matrix, column z-scores then row z-scores, population std.
std::vector<std::vector<double>> two_pass_oracle(std::vector<std::vector<double>> m) {
    const std::size_t R = m.size(), C = m[0].size();
    auto zscore = [](std::vector<double> v) {
        double mu = 0;
        for (double e : v) mu += e;
        mu /= double(v.size());
        double var = 0;
        for (double e : v) var += (e - mu) * (e - mu);
        const double sd = std::sqrt(var / double(v.size()));
        double biggest = 0;
        for (double e : v) biggest = std::max(biggest, std::abs(e));
        if (sd <= 1e-12 * std::max(1.0, biggest)) {
            for (double& e : v) e = 0;
            return v;
        }
        for (double& e : v) e = (e - mu) / sd;
        return v;
    };
    for (std::size_t j = 0; j < C; ++j) {
        std::vector<double> col(R);
        for (std::size_t i = 0; i < R; ++i) col[i] = m[i][j];
        col = zscore(col);
        for (std::size_t i = 0; i < R; ++i) m[i][j] = col[i];
    }
    for (std::size_t i = 0; i < R; ++i) m[i] = zscore(m[i]);
    return m;
}

RunManifest grid_manifest(int gens, int evals, int images) {
    RunManifest m;
    for (int i = 0; i < gens; ++i) m.generators.push_back(ModelId("gen-" + std::to_string(i)));
    for (int j = 0; j < evals; ++j) m.evaluators.push_back(ModelId("eval-" + std::to_string(j)));
    for (int k = 0; k < images; ++k) m.images.push_back({"img-" + std::to_string(k), ""});
    m.settings = {Setting::ReferenceBased};
    return m;
}

ScoreRecord rec(const RunManifest& m, int i, int j, int k, int raw) {
    ScoreRecord r;
    r.image_id = m.images[std::size_t(k)].id;
    r.generator = m.generators[std::size_t(i)];
    r.evaluator = m.evaluators[std::size_t(j)];
    r.setting = Setting::ReferenceBased;
    r.raw_score = raw;
    r.score = raw / 100.0;
    return r;
}

// Full grid of records with a deterministic raw score per (i,j,k).
template <class F>
std::vector<ScoreRecord> grid_records(const RunManifest& m, F raw_of) {
    std::vector<ScoreRecord> out;
    for (int i = 0; i < int(m.generators.size()); ++i)
        for (int j = 0; j < int(m.evaluators.size()); ++j)
            for (int k = 0; k < int(m.images.size()); ++k)
                out.push_back(rec(m, i, j, k, raw_of(i, j, k)));
    return out;
}

ScoreMatrix matrix_from(const std::vector<std::vector<double>>& rows) {
    ScoreMatrix m;
    for (std::size_t i = 0; i < rows.size(); ++i)
        m.generators.push_back(ModelId("gen-" + std::to_string(i)));
    for (std::size_t j = 0; j < rows[0].size(); ++j)
        m.evaluators.push_back(ModelId("eval-" + std::to_string(j)));
    for (const auto& r : rows) m.values.insert(m.values.end(), r.begin(), r.end());
    m.counts.assign(m.values.size(), 1);
    return m;
}

StandardizedMatrix std_matrix_from(const std::vector<std::vector<double>>& rows,
                                   const std::vector<std::string>& ids) {
    StandardizedMatrix m;
    for (const auto& id : ids) {
        m.generators.push_back(ModelId(id));
        m.evaluators.push_back(ModelId(id));
    }
    for (const auto& r : rows) m.values.insert(m.values.end(), r.begin(), r.end());
    return m;
}

} // namespace

TEST_CASE("standardize_vector basics") {
    auto [z, degenerate] = standardize_vector({1, 2, 3});
    CHECK_FALSE(degenerate);
    CHECK(z[0] == doctest::Approx(-1.224744871391589).epsilon(1e-10));
    CHECK(z[1] == doctest::Approx(0.0).scale(1));
    CHECK(z[2] == doctest::Approx(1.224744871391589).epsilon(1e-10));

    auto [zeros, flag] = standardize_vector({4, 4, 4, 4});
    CHECK(flag);
    CHECK(zeros == std::vector<double>(4, 0.0));
}

TEST_CASE("build_phi means and coverage") {
    SUBCASE("mean of a cell") {
        RunManifest m = grid_manifest(1, 1, 2);
        std::vector<ScoreRecord> scores{rec(m, 0, 0, 0, 40), rec(m, 0, 0, 1, 60)};
        ScoreMatrix phi = build_phi(scores, m, Setting::ReferenceBased, 0.95);
        CHECK(phi.at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(phi.count_at(0, 0) == 2);
    }
    SUBCASE("missing images above the floor use the present mean") {
        RunManifest m = grid_manifest(2, 2, 100);
        auto raw_of = [](int i, int j, int k) { return (i * 37 + j * 11 + k * 7) % 101; };
        auto scores = grid_records(m, raw_of);
        // drop images 5, 17, 42 from cell (1, 0)
        std::erase_if(scores, [&](const ScoreRecord& r) {
            return r.generator.value == "gen-1" && r.evaluator.value == "eval-0" &&
                   (r.image_id == "img-5" || r.image_id == "img-17" || r.image_id == "img-42");
        });
        ScoreMatrix phi = build_phi(scores, m, Setting::ReferenceBased, 0.95);
        double acc = 0;
        int n = 0;
        for (int k = 0; k < 100; ++k) {
            if (k == 5 || k == 17 || k == 42) continue;
            acc += raw_of(1, 0, k) / 100.0;
            ++n;
        }
        CHECK(n == 97);
        CHECK(phi.count_at(1, 0) == 97);
        CHECK(phi.at(1, 0) == doctest::Approx(acc / 97).epsilon(1e-14));
        CHECK(phi.count_at(0, 0) == 100);

        SUBCASE("same data below a stricter floor errors naming the pair") {
            CHECK_THROWS_WITH_AS(build_phi(scores, m, Setting::ReferenceBased, 0.98),
                                 doctest::Contains("(gen-1, eval-0)"), ValidationError);
        }
    }
    SUBCASE("empty cell errors") {
        RunManifest m = grid_manifest(2, 2, 3);
        auto scores = grid_records(m, [](int, int, int k) { return k * 10; });
        std::erase_if(scores, [](const ScoreRecord& r) {
            return r.generator.value == "gen-0" && r.evaluator.value == "eval-1";
        });
        CHECK_THROWS_WITH_AS(build_phi(scores, m, Setting::ReferenceBased, 0.0),
                             doctest::Contains("empty cell"), ValidationError);
    }
    SUBCASE("duplicates and orphans are rejected") {
        RunManifest m = grid_manifest(2, 2, 3);
        auto scores = grid_records(m, [](int, int, int k) { return k; });
        auto dup = scores;
        dup.push_back(dup.front());
        CHECK_THROWS_WITH_AS(build_phi(dup, m, Setting::ReferenceBased, 0.95),
                             doctest::Contains("duplicate"), ValidationError);
        auto orphan = scores;
        orphan.push_back(rec(m, 0, 0, 0, 7));
        orphan.back().generator = ModelId("gen-unknown");
        CHECK_THROWS_WITH_AS(build_phi(orphan, m, Setting::ReferenceBased, 0.95),
                             doctest::Contains("outside manifest"), ValidationError);
    }
    SUBCASE("record order never changes the matrix") {
        RunManifest m = grid_manifest(3, 3, 17);
        auto scores = grid_records(m, [](int i, int j, int k) { return (i + 3 * j + 5 * k) % 101; });
        ScoreMatrix a = build_phi(scores, m, Setting::ReferenceBased, 0.95);
        std::mt19937_64 rng(99);
        std::shuffle(scores.begin(), scores.end(), rng);
        ScoreMatrix b = build_phi(scores, m, Setting::ReferenceBased, 0.95);
        CHECK(a.values == b.values);
    }
    SUBCASE("setting must be in the manifest") {
        RunManifest m = grid_manifest(2, 2, 2);
        auto scores = grid_records(m, [](int, int, int) { return 50; });
        CHECK_THROWS_AS(build_phi(scores, m, Setting::ReferenceFree, 0.95), ValidationError);
    }
}

TEST_CASE("standardize matches the independent oracle") {
    std::mt19937_64 rng(20260821);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> dim(2, 9);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t R = dim(rng), C = dim(rng);
        std::vector<std::vector<double>> rows(R, std::vector<double>(C));
        for (auto& r : rows)
            for (auto& e : r) e = d(rng);
        const auto expect = two_pass_oracle(rows);
        const StandardizedMatrix got = standardize(matrix_from(rows));
        for (std::size_t i = 0; i < R; ++i)
            for (std::size_t j = 0; j < C; ++j)
                REQUIRE(got.at(i, j) == doctest::Approx(expect[i][j]).epsilon(1e-12).scale(1));

        // non-degenerate output rows have mean 0 and population std 1
        for (std::size_t i = 0; i < R; ++i) {
            if (std::find(got.degenerate_rows.begin(), got.degenerate_rows.end(), i) !=
                got.degenerate_rows.end())
                continue;
            double mu = 0;
            for (std::size_t j = 0; j < C; ++j) mu += got.at(i, j);
            mu /= double(C);
            double var = 0;
            for (std::size_t j = 0; j < C; ++j) var += (got.at(i, j) - mu) * (got.at(i, j) - mu);
            REQUIRE(std::abs(mu) < 1e-10);
            REQUIRE(std::abs(std::sqrt(var / double(C)) - 1.0) < 1e-10);
        }
    }
}

TEST_CASE("standardize flags degenerate input") {
    SUBCASE("constant column zeroes out and is flagged") {
        ScoreMatrix phi = matrix_from({{0.5, 0.1, 0.9}, {0.5, 0.4, 0.3}, {0.5, 0.8, 0.2}});
        StandardizedMatrix z = standardize(phi);
        CHECK(z.degenerate_columns == std::vector<std::size_t>{0});
        // the column contributes zeros into the row pass, not NaNs
        for (std::size_t i = 0; i < 3; ++i) CHECK(std::isfinite(z.at(i, 0)));
    }
    SUBCASE("constant matrix degenerates everywhere") {
        ScoreMatrix phi = matrix_from({{0.7, 0.7}, {0.7, 0.7}});
        StandardizedMatrix z = standardize(phi);
        CHECK(z.values == std::vector<double>(4, 0.0));
        CHECK(z.degenerate_columns.size() == 2);
        CHECK(z.degenerate_rows.size() == 2);
    }
    SUBCASE("too small") {
        CHECK_THROWS_AS(standardize(matrix_from({{0.1, 0.2}})), ValidationError);
    }
}

TEST_CASE("standardize invariances") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    std::vector<std::vector<double>> rows(5, std::vector<double>(4));
    for (auto& r : rows)
        for (auto& e : r) e = d(rng);
    const StandardizedMatrix base = standardize(matrix_from(rows));

    SUBCASE("column-affine invariance") {
        auto distorted = rows;
        for (std::size_t i = 0; i < rows.size(); ++i) distorted[i][2] = 3.5 * rows[i][2] + 0.25;
        const StandardizedMatrix z = standardize(matrix_from(distorted));
        for (std::size_t i = 0; i < base.values.size(); ++i)
            REQUIRE(z.values[i] == doctest::Approx(base.values[i]).epsilon(1e-10).scale(1));
    }
    SUBCASE("permutation equivariance") {
        const std::vector<std::size_t> rperm{3, 0, 4, 1, 2};
        const std::vector<std::size_t> cperm{2, 0, 3, 1};
        std::vector<std::vector<double>> permuted(rows.size(), std::vector<double>(4));
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < 4; ++j) permuted[i][j] = rows[rperm[i]][cperm[j]];
        const StandardizedMatrix z = standardize(matrix_from(permuted));
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < 4; ++j)
                REQUIRE(z.at(i, j) ==
                        doctest::Approx(base.at(rperm[i], cperm[j])).epsilon(1e-12).scale(1));
    }
}

TEST_CASE("philautia scores and diagonal z-scores") {
    // hand-built standardized matrix over shared ids a, b, c
    StandardizedMatrix z = std_matrix_from({{1.0, -0.5, -0.5}, {-0.8, 1.2, -0.4}, {0.1, 0.2, -0.3}},
                                           {"a", "b", "c"});
    auto scores = philautia_scores(z);
    CHECK(scores.at(ModelId("a")) == 1.0);
    CHECK(scores.at(ModelId("b")) == 1.2);
    CHECK(scores.at(ModelId("c")) == -0.3);
    CHECK(philautia_score(z, ModelId("b")) == 1.2);
    CHECK_THROWS_AS(philautia_score(z, ModelId("missing")), ValidationError);

    SUBCASE("disjoint axes have no diagonal") {
        StandardizedMatrix bad = z;
        bad.evaluators = {ModelId("x"), ModelId("y"), ModelId("w")};
        CHECK_THROWS_AS(philautia_scores(bad), ValidationError);
        CHECK_THROWS_AS(philautia_score(bad, ModelId("a")), ValidationError);
    }
    SUBCASE("symmetric column with centered diagonal has z = 0") {
        StandardizedMatrix m = std_matrix_from({{0.0, 9, 9}, {-1.0, 9, 9}, {1.0, 9, 9}},
                                               {"a", "b", "c"});
        auto zs = diagonal_zscores(m);
        const DiagZScore& a = zs.at(ModelId("a"));
        CHECK(a.defined);
        CHECK(a.diag == 0.0);
        CHECK(a.col_mean == doctest::Approx(0.0).scale(1));
        CHECK(a.z == doctest::Approx(0.0).scale(1));
        // constant columns report undefined z
        CHECK_FALSE(zs.at(ModelId("b")).defined);
    }
    SUBCASE("z matches a direct computation") {
        auto zs = diagonal_zscores(z);
        const DiagZScore& b = zs.at(ModelId("b"));
        const double mu = (-0.5 + 1.2 + 0.2) / 3.0;
        const double sd = std::sqrt(((-0.5 - mu) * (-0.5 - mu) + (1.2 - mu) * (1.2 - mu) +
                                     (0.2 - mu) * (0.2 - mu)) /
                                    3.0);
        CHECK(b.col_mean == doctest::Approx(mu).epsilon(1e-12));
        CHECK(b.col_std == doctest::Approx(sd).epsilon(1e-12));
        CHECK(b.z == doctest::Approx((1.2 - mu) / sd).epsilon(1e-12));
    }
}

TEST_CASE("exclude_models rebuilds from raw") {
    RunManifest m = grid_manifest(5, 5, 9);
    auto scores = grid_records(m, [](int i, int j, int k) { return (13 * i + 7 * j + 31 * k) % 101; });

    SUBCASE("dropping nothing is the identity") {
        StandardizedMatrix plain = standardize(build_phi(scores, m, Setting::ReferenceBased, 0.95));
        StandardizedMatrix none = exclude_models(scores, m, Setting::ReferenceBased, {}, {}, 0.95);
        CHECK(none.values == plain.values);
        CHECK(none.generators == plain.generators);
    }
    SUBCASE("dropping one evaluator matches a from-scratch rebuild") {
        StandardizedMatrix dropped =
            exclude_models(scores, m, Setting::ReferenceBased, {ModelId("eval-2")}, {}, 0.95);
        RunManifest reduced = m;
        reduced.evaluators.erase(reduced.evaluators.begin() + 2);
        std::vector<ScoreRecord> kept;
        for (const auto& r : scores)
            if (r.evaluator.value != "eval-2") kept.push_back(r);
        StandardizedMatrix oracle = standardize(build_phi(kept, reduced, Setting::ReferenceBased, 0.95));
        CHECK(dropped.evaluators == oracle.evaluators);
        for (std::size_t i = 0; i < oracle.values.size(); ++i)
            REQUIRE(dropped.values[i] == doctest::Approx(oracle.values[i]).epsilon(1e-12).scale(1));
    }
    SUBCASE("guards") {
        CHECK_THROWS_AS(exclude_models(scores, m, Setting::ReferenceBased,
                                       {ModelId("nonexistent")}, {}, 0.95),
                        ValidationError);
        std::set<ModelId> most{ModelId("gen-0"), ModelId("gen-1"), ModelId("gen-2"), ModelId("gen-3")};
        CHECK_THROWS_WITH_AS(exclude_models(scores, m, Setting::ReferenceBased, {}, most, 0.95),
                             doctest::Contains("2x2"), ValidationError);
    }
}

TEST_CASE("submatrix scan") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<std::vector<double>> rows(5, std::vector<double>(5));
    for (auto& r : rows)
        for (auto& e : r) e = d(rng);
    StandardizedMatrix z = std_matrix_from(rows, {"a", "b", "c", "d", "e"});

    SUBCASE("k = 1 has no off-diagonals") {
        for (const auto& s : submatrix_scan(z, 1)) CHECK(s.positive_offdiag == 0);
        CHECK(submatrix_scan(z, 1).size() == 5);
    }
    SUBCASE("k = M counts the whole matrix") {
        auto full = submatrix_scan(z, 5);
        REQUIRE(full.size() == 1);
        int positives = 0;
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 5; ++j)
                if (i != j && z.at(i, j) > 0.0) ++positives;
        CHECK(full[0].positive_offdiag == positives);
    }
    SUBCASE("k = 3 matches a brute-force oracle") {
        auto got = submatrix_scan(z, 3);
        REQUIRE(got.size() == 10);
        // independent enumeration
        std::vector<SubsetCount> expect;
        for (int a = 0; a < 5; ++a)
            for (int b = a + 1; b < 5; ++b)
                for (int c = b + 1; c < 5; ++c) {
                    SubsetCount sc;
                    sc.ids = {z.generators[a], z.generators[b], z.generators[c]};
                    int idx[3] = {a, b, c};
                    for (int p : idx)
                        for (int q : idx)
                            if (p != q && z.at(p, q) > 0.0) ++sc.positive_offdiag;
                    expect.push_back(sc);
                }
        std::sort(expect.begin(), expect.end(), [](const SubsetCount& l, const SubsetCount& r) {
            if (l.positive_offdiag != r.positive_offdiag)
                return l.positive_offdiag > r.positive_offdiag;
            return l.ids < r.ids;
        });
        for (std::size_t i = 0; i < expect.size(); ++i) {
            REQUIRE(got[i].ids == expect[i].ids);
            REQUIRE(got[i].positive_offdiag == expect[i].positive_offdiag);
        }
        // descending counts with lexicographic ties
        for (std::size_t i = 1; i < got.size(); ++i) {
            const bool ordered = got[i - 1].positive_offdiag > got[i].positive_offdiag ||
                                 (got[i - 1].positive_offdiag == got[i].positive_offdiag &&
                                  got[i - 1].ids < got[i].ids);
            REQUIRE(ordered);
        }
    }
    SUBCASE("guards") {
        CHECK_THROWS_AS(submatrix_scan(z, 0), ValidationError);
        CHECK_THROWS_AS(submatrix_scan(z, 6), ValidationError);
        // C(40, 20) blows the enumeration guard
        std::vector<std::vector<double>> big(40, std::vector<double>(40, 0.0));
        std::vector<std::string> ids;
        for (int i = 0; i < 40; ++i) ids.push_back("m-" + std::to_string(i));
        for (int i = 0; i < 40; ++i) big[std::size_t(i)][std::size_t(i)] = double(i);
        CHECK_THROWS_WITH_AS(submatrix_scan(std_matrix_from(big, ids), 20),
                             doctest::Contains("guard"), ValidationError);
    }
}

TEST_CASE("settings delta") {
    StandardizedMatrix based = std_matrix_from({{2.62, 0.1}, {0.2, 1.33}}, {"molmo", "deepseek"});
    StandardizedMatrix freee = std_matrix_from({{0.86, 0.3}, {0.4, 2.00}}, {"molmo", "deepseek"});
    auto delta = settings_delta(based, freee);
    CHECK(delta.at(ModelId("molmo")) == doctest::Approx(-1.76).epsilon(1e-12));
    CHECK(delta.at(ModelId("deepseek")) == doctest::Approx(0.67).epsilon(1e-12));

    auto zero = settings_delta(based, based);
    for (const auto& [id, v] : zero) CHECK(v == 0.0);

    StandardizedMatrix other = freee;
    other.evaluators[0] = ModelId("different");
    CHECK_THROWS_AS(settings_delta(based, other), ValidationError);
}

TEST_CASE("min-max baseline") {
    SUBCASE("simple column") {
        ScoreMatrix phi = matrix_from({{0.2, 0.0}, {0.5, 0.5}, {0.8, 1.0}});
        ScoreMatrix scaled = minmax_baseline(phi);
        CHECK(scaled.at(0, 0) == doctest::Approx(0.0).scale(1));
        CHECK(scaled.at(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(scaled.at(2, 0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("every non-constant column contains 0 and 1") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> d(0.0, 1.0);
        std::vector<std::vector<double>> rows(6, std::vector<double>(4));
        for (auto& r : rows)
            for (auto& e : r) e = d(rng);
        ScoreMatrix scaled = minmax_baseline(matrix_from(rows));
        for (std::size_t j = 0; j < 4; ++j) {
            bool has0 = false, has1 = false;
            for (std::size_t i = 0; i < 6; ++i) {
                if (scaled.at(i, j) == 0.0) has0 = true;
                if (scaled.at(i, j) == 1.0) has1 = true;
                CHECK(scaled.at(i, j) >= 0.0);
                CHECK(scaled.at(i, j) <= 1.0);
            }
            CHECK(has0);
            CHECK(has1);
        }
    }
    SUBCASE("uniformly over-scored column still produces a 0") {
        // every entry high: the baseline erases the common inflation
        ScoreMatrix phi = matrix_from({{0.91}, {0.95}, {0.99}});
        ScoreMatrix scaled = minmax_baseline(phi);
        int zeros = 0;
        for (std::size_t i = 0; i < 3; ++i)
            if (scaled.at(i, 0) == 0.0) ++zeros;
        CHECK(zeros == 1);
    }
    SUBCASE("constant column errors") {
        CHECK_THROWS_AS(minmax_baseline(matrix_from({{0.5, 0.1}, {0.5, 0.9}})), DegeneracyError);
    }
}

TEST_CASE("csv export is byte-stable") {
    ScoreMatrix phi = matrix_from({{0.125, 0.5}, {1.0 / 3.0, 0.9}});
    const std::string expect =
        ",eval-0,eval-1\n"
        "gen-0,0.125000,0.500000\n"
        "gen-1,0.333333,0.900000\n";
    CHECK(to_csv(phi) == expect);
    CHECK(to_csv(phi) == to_csv(phi));

    StandardizedMatrix z = standardize(matrix_from({{0.1, 0.9}, {0.7, 0.3}}));
    CHECK(to_csv(z).substr(0, 14) == ",eval-0,eval-1");
}
