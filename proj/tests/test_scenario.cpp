#include "catch_amalgamated.hpp"

#include <fstream>

#include "witten/acceptance.hpp"
#include "witten/scenario.hpp"

using namespace witten;
using namespace witten::scenario;
using nlohmann::json;

namespace {

json minimal()
{
    return json::parse(R"({"name": "s", "surface": "sphere", "field": {"kind": "height"},
                           "resolution": 8, "t": [0.5, 1.0, 2.0], "cutoff": {"policy": "fixed", "value": 1.0}})");
}

}   // namespace

TEST_CASE("scenario files in the repository match the built-ins", "[cli]")
{
    for (const auto& sc : builtin())
    {
        std::ifstream in(std::string(WITTEN_SCENARIO_DIR) + "/" + sc.name + ".json");
        REQUIRE(in.good());
        const auto parsed = parse(json::parse(in));
        REQUIRE(to_json(parsed) == to_json(sc));
        REQUIRE(parsed.spectra_path == sc.name + ".spectra.csv");
        REQUIRE(parsed.report_path == sc.name + ".report.json");
    }
}

TEST_CASE("scenario validation", "[cli]")
{
    REQUIRE_NOTHROW(parse(minimal()));
    auto with = [](const char* key, json value) {
        json j = minimal();
        j[key] = value;
        return j;
    };
    REQUIRE_THROWS_AS(parse(with("surface", "klein")), InvalidInput);
    REQUIRE_THROWS_AS(parse(with("t", json::array())), InvalidInput);
    REQUIRE_THROWS_AS(parse(with("t", {1.0, 0.5})), InvalidInput);
    REQUIRE_THROWS_AS(parse(with("t", {1.0, 1.0})), InvalidInput);
    REQUIRE_THROWS_AS(parse(with("resolution", 4)), InvalidInput);
    REQUIRE_THROWS_AS(parse(with("resolution", "big")), InvalidInput);
    REQUIRE_THROWS_AS(parse(with("field", {{"kind", "nope"}})), InvalidInput);
    REQUIRE_THROWS_AS(parse(with("field", {{"kind", "constant"}, {"value", {1.0, 0.0}}})), InvalidInput);
    REQUIRE_THROWS_AS(parse(with("cutoff", {{"policy", "fixed"}, {"value", -1.0}})), InvalidInput);
    REQUIRE_THROWS_AS(parse(with("cutoff", {{"policy", "guess"}})), InvalidInput);
    REQUIRE_THROWS_AS(parse(with("name", "a/b")), InvalidInput);
    json torus = with("surface", "embedded_torus");
    torus["field"] = {{"kind", "rotation"}};
    REQUIRE_THROWS_AS(parse(torus), InvalidInput);
    json no_name = minimal();
    no_name.erase("name");
    REQUIRE_THROWS_AS(parse(no_name), InvalidInput);

    const auto automatic = parse(with("cutoff", {{"policy", "auto"}}));
    REQUIRE_FALSE(automatic.cutoff.has_value());
    REQUIRE(builtin("torus-tilted").resolution == 32);
    REQUIRE_THROWS_AS(builtin("nope"), InvalidInput);
}

TEST_CASE("a small run is deterministic and complete", "[cli]")
{
    const auto sc = parse(minimal());
    const auto a = run(sc, 5), b = run(sc, 5);
    REQUIRE(a.csv == b.csv);
    REQUIRE(a.report.dump(2) == b.report.dump(2));
    REQUIRE(a.pass);
    const auto& r = a.report;
    REQUIRE(r["schema"] == 1);
    for (const char* key : {"scenario", "betti", "morse_counts", "verdicts", "windows"})
        REQUIRE(r.contains(key));
    for (const char* key : {"weak", "strong", "top_equality", "poincare_hopf", "thom_smale_rank", "instanton_betti"})
        REQUIRE(r["verdicts"][key] == "PASS");
    // header plus 3 t values x 3 degrees x 6 eigenvalues
    REQUIRE(std::count(a.csv.begin(), a.csv.end(), '\n') == 1 + 3 * 3 * 6);
    REQUIRE(a.csv.rfind("scenario,degree,t,eigen_index,eigenvalue\n", 0) == 0);
}

TEST_CASE("auto cutoff finds the torus window", "[cli]")
{
    auto sc = builtin("torus-tilted");
    sc.resolution = 16;
    sc.t = {4.0, 8.0, 16.0};
    sc.cutoff.reset();
    const auto r = run(sc).report;
    REQUIRE(r["windows"]["found"] == true);
    for (const auto& row : r["windows"]["counts"])
        REQUIRE(row["counts"] == json({1, 2, 1}));
}

TEST_CASE("acceptance suites", "[cli]")
{
    REQUIRE(acceptance::suite("clifford") == std::vector<int>{1, 2, 3});
    REQUIRE(acceptance::suite("all").size() == 13);
    REQUIRE_THROWS_AS(acceptance::suite("bogus"), InvalidInput);
    const auto results = acceptance::run_suite("clifford", 3);
    REQUIRE(results.size() == 3);
    for (const auto& r : results)
        REQUIRE(r.pass);
    const auto again = acceptance::run_suite("clifford", 3);
    REQUIRE(acceptance::report("clifford", 3, results).dump() == acceptance::report("clifford", 3, again).dump());
}
