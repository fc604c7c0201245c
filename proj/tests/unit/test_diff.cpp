#include <doctest.h>

#include <random>

#include "linefix/diff.hpp"
#include "support/diff_gen.hpp"
#include "support/reference_scanner.hpp"

using namespace linefix;

namespace {

// One-line replacement in the style of a mined human patch.
const char* kOneLinerDiff =
    "diff --git a/Main.java b/Main.java\n"
    "index 3bba9ce..812ad7a 100644\n"
    "--- a/Main.java\n"
    "+++ b/Main.java\n"
    "@@ -1,3 +1,3 @@\n"
    " int x;\n"
    "-return null;\n"
    "+return this;\n"
    " int y;\n";

}  // namespace

TEST_CASE("parse_unified_diff handles a one-line replacement") {
    const auto hunks = diff::parse_unified_diff(kOneLinerDiff);
    REQUIRE(hunks.size() == 1);
    CHECK(hunks[0].file_path == "Main.java");
    CHECK(hunks[0].old_start == 1);
    CHECK(hunks[0].old_count == 3);
    CHECK(hunks[0].removed_lines() == std::vector<std::string>{"return null;"});
    CHECK(hunks[0].added_lines() == std::vector<std::string>{"return this;"});
}

TEST_CASE("parse_unified_diff on empty input yields no hunks") {
    CHECK(diff::parse_unified_diff("").empty());
}

TEST_CASE("parse_unified_diff rejects malformed input") {
    CHECK_THROWS_AS(diff::parse_unified_diff("@@ -1,2 +1,2 @@\n x\n"), diff::MalformedDiff);
    CHECK_THROWS_AS(
        diff::parse_unified_diff("--- a/f\n+++ b/f\n@@ -1,5 +1,5 @@\n x\n"),
        diff::MalformedDiff);  // body shorter than the header range
    CHECK_THROWS_AS(diff::parse_unified_diff("--- a/f\n@@ -1,1 +1,1 @@\n x\n"),
                    diff::MalformedDiff);  // missing +++ header
    CHECK_THROWS_AS(
        diff::parse_unified_diff("--- a/f\n+++ b/f\n@@ -1,1 +1,1 @@\n x\n+extra\n+more\n"),
        diff::MalformedDiff);  // body longer than the header range
}

TEST_CASE("binary and rename-only entries are skipped with counters") {
    const std::string text =
        "diff --git a/img.png b/img.png\n"
        "Binary files a/img.png and b/img.png differ\n"
        "diff --git a/old.txt b/new.txt\n"
        "rename from old.txt\n"
        "rename to new.txt\n";
    diff::ParseStats stats;
    const auto hunks = diff::parse_unified_diff(text, &stats);
    CHECK(hunks.empty());
    CHECK(stats.binary_files_skipped == 1);
    CHECK(stats.rename_only_skipped == 1);
}

TEST_CASE("random diffs parse identically to the reference scanner") {
    std::mt19937_64 rng(20240521);
    for (int round = 0; round < 50; ++round) {
        const auto generated = testsupport::generate_diff(rng);
        const auto parsed = diff::parse_unified_diff(generated.text);
        REQUIRE(parsed == generated.hunks);

        const auto scanned = testsupport::reference_scan(generated.text);
        REQUIRE(scanned.size() == parsed.size());
        for (std::size_t i = 0; i < parsed.size(); ++i) {
            CHECK(scanned[i].file == parsed[i].file_path);
            CHECK(scanned[i].old_start == parsed[i].old_start);
            CHECK(scanned[i].removed == parsed[i].removed_lines());
            CHECK(scanned[i].added == parsed[i].added_lines());
        }
    }
}

TEST_CASE("serialize/parse round-trips hunks exactly") {
    std::mt19937_64 rng(7);
    for (int round = 0; round < 20; ++round) {
        const auto generated = testsupport::generate_diff(rng);
        const auto reparsed = diff::parse_unified_diff(diff::serialize_hunks(generated.hunks));
        CHECK(reparsed == generated.hunks);
    }
}

TEST_CASE("diff_file_contents + apply_to_content reproduce the new file") {
    const std::string old_text = "a\nb\nc\nd\ne\n";

    SUBCASE("single line replacement") {
        const std::string new_text = "a\nb\nC!\nd\ne\n";
        const auto hunks = diff::diff_file_contents(old_text, new_text, "f.txt");
        REQUIRE(hunks.size() == 1);
        CHECK(diff::apply_to_content(old_text, hunks) == new_text);
    }
    SUBCASE("insertion") {
        const std::string new_text = "a\nb\nb2\nc\nd\ne\n";
        CHECK(diff::apply_to_content(
                  old_text, diff::diff_file_contents(old_text, new_text, "f.txt")) == new_text);
    }
    SUBCASE("deletion at the end") {
        const std::string new_text = "a\nb\nc\nd\n";
        CHECK(diff::apply_to_content(
                  old_text, diff::diff_file_contents(old_text, new_text, "f.txt")) == new_text);
    }
    SUBCASE("equal contents produce no hunks") {
        CHECK(diff::diff_file_contents(old_text, old_text, "f.txt").empty());
    }
    SUBCASE("context mismatch is rejected") {
        const auto hunks = diff::diff_file_contents(old_text, "a\nb\nX\nd\ne\n", "f.txt");
        CHECK_THROWS_AS(diff::apply_to_content("totally\ndifferent\n", hunks),
                        diff::MalformedDiff);
    }
}

TEST_CASE("apply_to_content handles the git fixture diff") {
    const std::string original = "int x;\nreturn null;\nint y;\n";
    const auto hunks = diff::parse_unified_diff(kOneLinerDiff);
    CHECK(diff::apply_to_content(original, hunks) == "int x;\nreturn this;\nint y;\n");
}
