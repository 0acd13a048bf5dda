#include <doctest.h>

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hawkesmix/common.hpp"
#include "hawkesmix/model.hpp"
#include "hawkesmix/rng.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace hawkesmix;
using testutil::TempDir;

namespace {

MixtureModel random_model(int k_count, int c_count, int d_count, std::uint64_t seed) {
    MixtureModel m;
    m.num_clusters = k_count;
    m.num_types = c_count;
    m.num_basis = d_count;
    m.basis = build_basis(5.0, d_count * M_PI / 5.0);  // D = d_count by construction
    REQUIRE(m.basis.count == d_count);
    Rng rng(seed);
    m.alpha.resize(k_count);
    for (double& v : m.alpha) v = 0.5 + rng.uniform();
    m.rayleigh_b.resize(static_cast<std::size_t>(k_count) * c_count);
    for (double& v : m.rayleigh_b) v = 0.1 + rng.uniform();
    m.exp_sigma.resize(static_cast<std::size_t>(k_count) * c_count * c_count * d_count);
    for (double& v : m.exp_sigma) v = 0.01 + rng.uniform();
    return m;
}

}  // namespace

TEST_CASE("mixture model JSON round-trips bit-exactly") {
    TempDir dir("model");
    const MixtureModel m = random_model(3, 2, 4, 101);
    save_model(m, dir / "model.json");
    const MixtureModel back = load_model(dir / "model.json");
    CHECK(back.num_clusters == 3);
    CHECK(back.num_types == 2);
    CHECK(back.num_basis == 4);
    CHECK(back.alpha == m.alpha);
    CHECK(back.rayleigh_b == m.rayleigh_b);
    CHECK(back.exp_sigma == m.exp_sigma);
    CHECK(back.basis.omega0 == m.basis.omega0);
    CHECK(back.basis.bandwidth == m.basis.bandwidth);
    CHECK(back.basis.centers == m.basis.centers);
    CHECK(back.basis.t_max == m.basis.t_max);
}

TEST_CASE("the model file stores scales cluster-minor") {
    // On disk B is C lists of K values and Sigma is C x C x D lists of K, so
    // per-cluster slices are columns, not rows.
    TempDir dir("layout");
    const MixtureModel m = random_model(2, 2, 3, 7);
    save_model(m, dir / "model.json");
    std::ifstream in(dir / "model.json");
    nlohmann::json doc = nlohmann::json::parse(in);
    CHECK(doc["K"] == 2);
    REQUIRE(doc["B"].size() == 2);                 // C rows
    REQUIRE(doc["B"][0].size() == 2);              // K columns
    CHECK(doc["B"][1][0].get<double>() == m.beta(0, 1));
    CHECK(doc["B"][1][1].get<double>() == m.beta(1, 1));
    REQUIRE(doc["Sigma"].size() == 2);             // C
    REQUIRE(doc["Sigma"][0].size() == 2);          // C
    REQUIRE(doc["Sigma"][0][0].size() == 3);       // D
    REQUIRE(doc["Sigma"][0][0][0].size() == 2);    // K
    CHECK(doc["Sigma"][1][0][2][1].get<double>() == m.sigma(1, 1, 0, 2));
    CHECK(doc["basis"]["D"] == 3);
}

TEST_CASE("model loading rejects malformed documents") {
    TempDir dir("badmodel");
    testutil::spit(dir / "nokey.json", "{\"K\": 2}\n");
    CHECK_THROWS_AS(load_model(dir / "nokey.json"), invalid_input);
    testutil::spit(dir / "garbage.json", "not json\n");
    try {
        load_model(dir / "garbage.json");
        FAIL("expected invalid_input");
    } catch (const invalid_input& e) {
        CHECK(std::string(e.what()).find("garbage.json") != std::string::npos);
    }
    CHECK_THROWS_AS(load_model(dir / "missing.json"), invalid_input);
}

TEST_CASE("model validation rejects non-positive scales") {
    MixtureModel m = random_model(2, 2, 2, 3);
    CHECK_NOTHROW(m.validate());
    MixtureModel bad = m;
    bad.rayleigh_b[1] = 0.0;
    CHECK_THROWS_AS(bad.validate(), invalid_input);
    bad = m;
    bad.exp_sigma[0] = -0.5;
    CHECK_THROWS_AS(bad.validate(), invalid_input);
    bad = m;
    bad.alpha.pop_back();
    CHECK_THROWS_AS(bad.validate(), invalid_input);
}

TEST_CASE("point parameters are the posterior means") {
    const MixtureModel m = random_model(2, 2, 2, 9);
    const HawkesParams p = m.point_params(1);
    for (int c = 0; c < 2; ++c)
        CHECK(p.mu[c] == oracles::kSqrtHalfPi * m.beta(1, c));
    for (int c = 0; c < 2; ++c)
        for (int cp = 0; cp < 2; ++cp)
            for (int d = 0; d < 2; ++d) CHECK(p.a(c, cp, d) == m.sigma(1, c, cp, d));
}

TEST_CASE("point-parameter container slices per cluster") {
    PointParams points;
    points.num_clusters = 2;
    points.num_types = 1;
    points.num_basis = 2;
    points.mu = {0.5, 0.75};
    points.coeffs = {1.0, 2.0, 3.0, 4.0};
    const HawkesParams k1 = points.cluster(1);
    CHECK(k1.mu == std::vector<double>{0.75});
    CHECK(k1.coeffs == std::vector<double>{3.0, 4.0});
    CHECK(points.at_mu(0, 0) == 0.5);
    CHECK(points.a(1, 0, 0, 1) == 4.0);
}

TEST_CASE("responsibility counts are column sums") {
    Responsibilities r;
    r.num_sequences = 3;
    r.num_clusters = 2;
    r.weights = {0.25, 0.75, 0.5, 0.5, 1.0, 0.0};
    r.recount();
    CHECK(r.counts == std::vector<double>{1.75, 1.25});
}

TEST_CASE("fit reports round-trip labels, final K, and the trace") {
    TempDir dir("report");
    FitReport rep;
    rep.config.k_init = 4;
    rep.config.seed = 99;
    rep.config.strategy.kind = Strategy::Kind::Increasing;
    rep.model = random_model(2, 1, 2, 5);
    rep.labels = {0, 1, 1, 0};
    rep.trace = {{0, 5, 123.456, 4}, {1, 5, 101.25, 2}};
    save_report(rep, dir / "report.json");
    CHECK(report_labels(dir / "report.json") == rep.labels);
    CHECK(report_final_k(dir / "report.json") == 2);

    save_trace_csv(rep, dir / "trace.csv");
    const std::string csv = testutil::slurp(dir / "trace.csv");
    CHECK(csv.find("outer_iter,cum_inner,nll,K") == 0);
    CHECK(csv.find("0,5,123.456,4") != std::string::npos);
    // cum_inner accumulates: the second row has spent 10.
    CHECK(csv.find("1,10,101.25,2") != std::string::npos);

    // The embedded config echoes every knob.
    std::ifstream in(dir / "report.json");
    nlohmann::json doc = nlohmann::json::parse(in);
    CHECK(doc["config"]["k_init"] == 4);
    CHECK(doc["config"]["strategy"] == "increasing");
    CHECK(doc["config"]["seed"] == 99);
}

TEST_CASE("strategy names parse both ways") {
    for (const char* name : {"constant", "increasing", "decreasing", "open_loop"})
        CHECK(strategy_name(parse_strategy(name)) == name);
    CHECK_THROWS_AS(parse_strategy("fastest"), invalid_input);
}
