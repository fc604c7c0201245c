#include <doctest.h>

#include <algorithm>
#include <random>

#include "linefix/localize.hpp"
#include "support/fixtures.hpp"

using namespace linefix;
using localize::CoverageMatrix;
using localize::TestRecord;

namespace {

// ef=2/nf=0/ep=1 for Foo.java:7; the hand-computed 0.8165 fixture.
CoverageMatrix three_test_matrix() {
    CoverageMatrix cov;
    cov.tests.push_back({"t_fail_1", false, {{"Foo.java", 7}, {"Foo.java", 9}}});
    cov.tests.push_back({"t_fail_2", false, {{"Foo.java", 7}}});
    cov.tests.push_back({"t_pass_1", true, {{"Foo.java", 7}, {"Foo.java", 12}}});
    return cov;
}

}  // namespace

TEST_CASE("parse_diagnostics extracts path and line from compiler output") {
    const std::string log =
        "compiling 3 files\n"
        "Parser.java:6: error: cannot find symbol: variable sk\n"
        "1 error\n";
    const auto diags = localize::parse_diagnostics(log);
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].file_path == "Parser.java");
    CHECK(diags[0].line_no == 6);
    CHECK(diags[0].message.find("cannot find symbol") != std::string::npos);
}

TEST_CASE("parse_diagnostics on an empty log yields nothing") {
    CHECK(localize::parse_diagnostics("").empty());
}

TEST_CASE("duplicate diagnostics collapse to one") {
    const std::string log =
        "a/b.c:12:3: error: bad thing\n"
        "a/b.c:12:3: error: bad thing\n";
    CHECK(localize::parse_diagnostics(log).size() == 1);
}

TEST_CASE("custom named-group patterns work") {
    const std::string log = "E100 at line 42 of lib/deep/module.py\n";
    const auto diags = localize::parse_diagnostics(
        log, {R"(at line (?<line>\d+) of (?<path>[\w./]+))"});
    REQUIRE(diags.size() == 1);
    CHECK(diags[0].file_path == "lib/deep/module.py");
    CHECK(diags[0].line_no == 42);
}

TEST_CASE("patterns without both named groups are rejected") {
    CHECK_THROWS_AS(localize::parse_diagnostics("x", {R"((?<path>\w+))"}),
                    std::invalid_argument);
}

TEST_CASE("ochiai gives 1.0 to a line covered only by the failing test") {
    CoverageMatrix cov;
    cov.tests.push_back({"fail", false, {{"a.c", 3}}});
    cov.tests.push_back({"pass", true, {{"a.c", 9}}});
    const auto ranked = localize::ochiai_rank(cov);
    REQUIRE(ranked.size() == 1);
    CHECK(ranked[0].file_path == "a.c");
    CHECK(ranked[0].line_no == 3);
    CHECK(ranked[0].score == doctest::Approx(1.0));
}

TEST_CASE("ochiai matches the hand-computed three-test fixture") {
    const auto ranked = localize::ochiai_rank(three_test_matrix());
    // Foo.java:7 -> ef=2, nf=0, ep=1 -> 2/sqrt(2*3)
    auto line7 = std::find_if(ranked.begin(), ranked.end(),
                              [](const auto& l) { return l.line_no == 7; });
    REQUIRE(line7 != ranked.end());
    CHECK(line7->score == doctest::Approx(0.8165).epsilon(1e-4));
    // Foo.java:9 -> ef=1, nf=1, ep=0 -> 1/sqrt(2)
    auto line9 = std::find_if(ranked.begin(), ranked.end(),
                              [](const auto& l) { return l.line_no == 9; });
    REQUIRE(line9 != ranked.end());
    CHECK(line9->score == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
    // Foo.java:12 is covered only by a passing test: omitted.
    CHECK(std::none_of(ranked.begin(), ranked.end(),
                       [](const auto& l) { return l.line_no == 12; }));
    // Scores stay in [0,1], sorted descending.
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        CHECK(ranked[i].score >= 0.0);
        CHECK(ranked[i].score <= 1.0);
        if (i > 0) CHECK(ranked[i - 1].score >= ranked[i].score);
    }
}

TEST_CASE("ranking is invariant under test order permutation") {
    auto cov = three_test_matrix();
    const auto baseline = localize::ochiai_rank(cov);
    std::sort(cov.tests.begin(), cov.tests.end(),
              [](const TestRecord& a, const TestRecord& b) { return a.test_id > b.test_id; });
    CHECK(localize::ochiai_rank(cov) == baseline);
    std::mt19937_64 rng(5);
    for (int round = 0; round < 10; ++round) {
        std::shuffle(cov.tests.begin(), cov.tests.end(), rng);
        CHECK(localize::ochiai_rank(cov) == baseline);
    }
}

TEST_CASE("spectrum ranking needs a failing test") {
    CoverageMatrix cov;
    cov.tests.push_back({"pass", true, {{"a.c", 1}}});
    CHECK_THROWS_AS(localize::ochiai_rank(cov), localize::NoFailingTests);
}

TEST_CASE("tarantula is available as an alternative formula") {
    CoverageMatrix cov;
    cov.tests.push_back({"fail", false, {{"a.c", 3}}});
    cov.tests.push_back({"pass", true, {{"a.c", 9}}});
    const auto ranked = localize::spectrum_rank(cov, localize::SpectrumFormula::Tarantula);
    REQUIRE(ranked.size() == 1);
    CHECK(ranked[0].score == doctest::Approx(1.0));
}

TEST_CASE("localize prefers compiler diagnostics with score 1.0") {
    localize::FailureEvidence evidence;
    evidence.compile_failed = true;
    evidence.build_log = "Parser.java:6: error: cannot find symbol: variable sk\n";
    const auto locations = localize::localize(evidence, std::nullopt);
    REQUIRE(locations.size() == 1);
    CHECK(locations[0].file_path == "Parser.java");
    CHECK(locations[0].line_no == 6);
    CHECK(locations[0].score == doctest::Approx(1.0));
    CHECK(locations[0].source == localize::LocationSource::CompilerDiagnostic);
}

TEST_CASE("localize falls through to the spectrum path for test failures") {
    localize::FailureEvidence evidence;
    evidence.tests_failed = true;
    evidence.build_log = "2 tests failed\n";
    const auto locations = localize::localize(evidence, three_test_matrix());
    REQUIRE(!locations.empty());
    CHECK(locations[0].source == localize::LocationSource::Spectrum);
    CHECK(locations[0].line_no == 7);
}

TEST_CASE("both sources contribute when both failure kinds show, diagnostics first") {
    localize::FailureEvidence evidence;
    evidence.compile_failed = true;
    evidence.tests_failed = true;
    evidence.build_log = "Lib.java:3: error: incompatible types\n";
    const auto locations = localize::localize(evidence, three_test_matrix(), 10);
    REQUIRE(locations.size() >= 3);
    CHECK(locations[0].source == localize::LocationSource::CompilerDiagnostic);
    CHECK(locations[0].file_path == "Lib.java");
    CHECK(locations[1].source == localize::LocationSource::Spectrum);
}

TEST_CASE("localize truncates to the limit and is stable across calls") {
    localize::FailureEvidence evidence;
    evidence.tests_failed = true;
    const auto once = localize::localize(evidence, three_test_matrix(), 1);
    CHECK(once.size() == 1);
    CHECK(localize::localize(evidence, three_test_matrix(), 1) == once);
}

TEST_CASE("localize on a passing build is a caller bug") {
    localize::FailureEvidence evidence;  // nothing failed
    CHECK_THROWS_AS(localize::localize(evidence, std::nullopt), std::invalid_argument);
}

TEST_CASE("localize reports when no path yields locations") {
    localize::FailureEvidence evidence;
    evidence.compile_failed = true;
    evidence.build_log = "everything is broken but nothing matches\n";
    CHECK_THROWS_AS(localize::localize(evidence, std::nullopt), localize::NoLocationsFound);
}

TEST_CASE("coverage files round-trip through JSON lines") {
    testsupport::TempDir dir("cov");
    const auto path = dir.path() / "coverage.jsonl";
    testsupport::write_file(
        path,
        R"({"test_id":"t1","status":"fail","covered":[{"file":"a.c","line":3}]})"
        "\n"
        R"({"test_id":"t2","status":"pass","covered":[{"file":"a.c","line":3},{"file":"b.c","line":1}]})"
        "\n");
    const auto cov = localize::read_coverage_jsonl(path);
    REQUIRE(cov.tests.size() == 2);
    CHECK(cov.tests[0].test_id == "t1");
    CHECK_FALSE(cov.tests[0].passed);
    CHECK(cov.tests[1].covered.size() == 2);
}
