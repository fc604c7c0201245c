#include <doctest.h>

#include <fstream>

#include "linefix/store.hpp"
#include "support/fixtures.hpp"

using namespace linefix;
using platform::PatchStore;
using platform::StoreKind;

namespace {

nlohmann::json human_record(int n) {
    return nlohmann::json{{"file_path", "a.c"},
                          {"line_no", n},
                          {"buggy_line", "old " + std::to_string(n)},
                          {"fixed_line", "new " + std::to_string(n)},
                          {"context_before", nlohmann::json::array()},
                          {"context_after", nlohmann::json::array()},
                          {"source_sha", "abc"},
                          {"timestamp", 1000 + n}};
}

}  // namespace

TEST_CASE("append then read-back returns the identical record") {
    testsupport::TempDir dir("store");
    PatchStore store(dir.path(), StoreKind::Human);
    const auto record = human_record(1);
    const auto seq = store.append(record);
    CHECK(store.read(seq) == record);
}

TEST_CASE("sequence numbers are consecutive and survive reopen") {
    testsupport::TempDir dir("store-seq");
    {
        PatchStore store(dir.path(), StoreKind::Human);
        CHECK(store.append(human_record(0)) == 0);
        CHECK(store.append(human_record(1)) == 1);
    }
    PatchStore reopened(dir.path(), StoreKind::Human);
    CHECK(reopened.count() == 2);
    CHECK(reopened.append(human_record(2)) == 2);
    const auto all = reopened.read_all();
    REQUIRE(all.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(all[static_cast<std::size_t>(i)] == human_record(i));
}

TEST_CASE("a torn tail write is dropped on recovery") {
    testsupport::TempDir dir("store-crash");
    {
        PatchStore store(dir.path(), StoreKind::Human);
        store.append(human_record(0));
        store.append(human_record(1));
    }
    // Simulate a crash between the data write and the index write: bytes
    // landed in the data file but no index entry exists.
    {
        std::ofstream data(dir.path() / "records.jsonl", std::ios::app | std::ios::binary);
        data << R"({"file_path":"torn","line_no":)";  // cut mid-record
    }
    PatchStore recovered(dir.path(), StoreKind::Human);
    CHECK(recovered.count() == 2);
    CHECK(recovered.read(1) == human_record(1));
    // The torn bytes are gone; new appends land cleanly.
    CHECK(recovered.append(human_record(2)) == 2);
    CHECK(recovered.read(2) == human_record(2));
}

TEST_CASE("a stale index entry beyond the data is dropped") {
    testsupport::TempDir dir("store-idx");
    {
        PatchStore store(dir.path(), StoreKind::Human);
        store.append(human_record(0));
    }
    {
        std::ofstream idx(dir.path() / "records.idx", std::ios::app);
        idx << "999999 50\n";  // points past the end of the data file
    }
    PatchStore recovered(dir.path(), StoreKind::Human);
    CHECK(recovered.count() == 1);
    CHECK(recovered.read(0) == human_record(0));
}

TEST_CASE("records must match the store schema") {
    testsupport::TempDir dir("store-schema");
    PatchStore human(dir.path() / "h", StoreKind::Human);
    CHECK_THROWS_AS(human.append(nlohmann::json{{"wrong", 1}}), platform::SchemaMismatch);
    CHECK_THROWS_AS(human.append(nlohmann::json::array()), platform::SchemaMismatch);

    PatchStore machine(dir.path() / "m", StoreKind::Machine);
    CHECK_THROWS_AS(machine.append(human_record(0)), platform::SchemaMismatch);
    const nlohmann::json machine_record{{"candidate", {{"file_path", "a.c"}}},
                                        {"validation_verdict", "Plausible"},
                                        {"ods_probability", 0.25},
                                        {"ods_verdict", "Keep"},
                                        {"stage_reached", "ods"},
                                        {"timestamps", {{"event", 1}}}};
    CHECK(machine.append(machine_record) == 0);
}

TEST_CASE("reads after N appends return exactly N records in order") {
    testsupport::TempDir dir("store-n");
    PatchStore store(dir.path(), StoreKind::Human);
    for (int i = 0; i < 25; ++i) store.append(human_record(i));
    const auto all = store.read_all();
    REQUIRE(all.size() == 25);
    for (int i = 0; i < 25; ++i) {
        CHECK(all[static_cast<std::size_t>(i)].at("line_no").get<int>() == i);
    }
    CHECK_THROWS_AS(store.read(25), std::out_of_range);
    CHECK_THROWS_AS(store.read(-1), std::out_of_range);
}
