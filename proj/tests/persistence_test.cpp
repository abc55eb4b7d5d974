#include <filesystem>

#include <gtest/gtest.h>

#include "tevlog/persistence.hpp"

using namespace tevlog;

namespace {

struct Fixture {
    AnchorStore store;
    RecordedStream stream;
};

std::unique_ptr<Fixture> record(ChainConfig config, std::size_t n, std::size_t batch_size = 1) {
    auto f = std::make_unique<Fixture>();
    EvidenceBatch batch(batch_size);
    Recorder rec(config, KeyPair::from_label("persistence-test"), EvidenceService{f->store, batch});
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<BlindingPair> pairs;
        if (i % 3 == 0) pairs.push_back(BlindingPair::generate(to_bytes("lot-" + std::to_string(i))));
        std::optional<Location> loc;
        if (i % 2 == 0) loc = Location{35.0 + 0.001 * static_cast<double>(i), 139.0};
        rec.emit(1'700'000'000'000'000 + static_cast<std::int64_t>(i), loc,
                 {Segment{"t", to_bytes(std::to_string(20 + i))}, Segment{"rh", to_bytes("40%")}}, std::move(pairs));
    }
    rec.flush();
    f->stream = std::move(rec).take();
    return f;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        out.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

TEST(LogFile, RoundTripPreservesEverything) {
    auto f = record({3, 4}, 13, 2);
    AvailableLog log = make_available_log(f->stream);
    std::string text = io::serialize_log(log);
    AvailableLog back = io::parse_log(text);
    EXPECT_EQ(back.length, log.length);
    EXPECT_EQ(back.sensor_public_key, log.sensor_public_key);
    EXPECT_EQ(back.recorded_config, log.recorded_config);
    EXPECT_EQ(back.readouts, log.readouts);
    EXPECT_EQ(back.receipts, log.receipts);
    EXPECT_TRUE(back.undecodable.empty());
    EXPECT_EQ(io::serialize_log(back), text);
}

TEST(LogFile, VerifyAfterRoundTripMatchesInMemory) {
    auto f = record({3, 4}, 13);
    std::vector<bool> avail(13, true);
    avail[5] = avail[6] = false;
    AvailableLog log = make_available_log(f->stream, avail);
    AnchorStore reloaded = io::parse_anchor(io::serialize_anchor(f->store));
    auto direct = verify_log(log, f->store, {3, 4});
    auto via_files = verify_log(io::parse_log(io::serialize_log(log)), reloaded, {3, 4});
    EXPECT_EQ(direct.status, via_files.status);
}

TEST(LogFile, DeletedRecordIsLost) {
    auto f = record({3, 4}, 8);
    auto lines = lines_of(io::serialize_log(make_available_log(f->stream)));
    lines.erase(lines.begin() + 1 + 2);  // readout 2
    auto report = verify_log(io::parse_log(join(lines)), f->store, {3, 4});
    EXPECT_EQ(report.status[2], Status::lost);
    EXPECT_EQ(report.status[1], Status::verifiable);
}

TEST(LogFile, CorruptedCanonicalByteIsCorrupt) {
    auto f = record({3, 4}, 8);
    std::string text = io::serialize_log(make_available_log(f->stream));
    auto lines = lines_of(text);
    auto j = io::json::parse(lines[4]);  // readout 3
    Bytes canonical = from_hex(j["canonical"].get<std::string>());
    canonical[canonical.size() / 2] ^= 0x10;
    j["canonical"] = to_hex(canonical);
    lines[4] = j.dump();
    AvailableLog log = io::parse_log(join(lines));
    auto report = verify_log(log, f->store, {3, 4});
    EXPECT_EQ(report.status[3], Status::corrupt);
}

TEST(LogFile, EditedReadableFieldIsCorrupt) {
    auto f = record({3, 4}, 8);
    auto lines = lines_of(io::serialize_log(make_available_log(f->stream)));
    auto j = io::json::parse(lines[2]);  // readout 1
    j["timestamp_us"] = j["timestamp_us"].get<std::int64_t>() + 1;
    lines[2] = j.dump();
    AvailableLog log = io::parse_log(join(lines));
    ASSERT_EQ(log.undecodable.count(1), 1u);
    EXPECT_NE(log.undecodable.at(1).find("timestamp_us"), std::string::npos);
    auto report = verify_log(log, f->store, {3, 4});
    EXPECT_EQ(report.status[1], Status::corrupt);
}

TEST(LogFile, VersionMismatchIsRejected) {
    auto f = record({3, 4}, 4);
    auto lines = lines_of(io::serialize_log(make_available_log(f->stream)));
    auto header = io::json::parse(lines[0]);
    header["format_version"] = 2;
    lines[0] = header.dump();
    try {
        io::parse_log(join(lines));
        FAIL();
    } catch (const io::FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
    }
}

TEST(LogFile, TruncatedRecordNamesItsOffset) {
    auto f = record({3, 4}, 4);
    std::string text = io::serialize_log(make_available_log(f->stream));
    auto lines = lines_of(text);
    std::size_t offset = lines[0].size() + 1 + lines[1].size() + 1;
    std::string truncated = text.substr(0, offset + lines[2].size() / 2);
    try {
        io::parse_log(truncated);
        FAIL();
    } catch (const io::FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("byte offset " + std::to_string(offset)), std::string::npos) << e.what();
    }
    // A complete JSON record without its newline is also a truncation.
    try {
        io::parse_log(text.substr(0, text.size() - 1));
        FAIL();
    } catch (const io::FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
    }
}

TEST(LogFile, StructuralErrors) {
    EXPECT_THROW(io::parse_log(""), io::FormatError);
    EXPECT_THROW(io::parse_log("{\"type\":\"readout\"}\n"), io::FormatError);
    auto f = record({3, 4}, 6);
    auto lines = lines_of(io::serialize_log(make_available_log(f->stream)));
    auto swapped = lines;
    std::swap(swapped[1], swapped[2]);
    EXPECT_THROW(io::parse_log(join(swapped)), io::FormatError);
    auto dup_header = lines;
    dup_header.insert(dup_header.begin() + 1, lines[0]);
    EXPECT_THROW(io::parse_log(join(dup_header)), io::FormatError);
    auto unknown = lines;
    unknown.insert(unknown.begin() + 1, R"({"type":"note","text":"ignored"})");
    EXPECT_NO_THROW(io::parse_log(join(unknown)));
}

TEST(AnchorFile, RoundTrip) {
    auto f = record({2, 3}, 9);
    AnchorStore back = io::parse_anchor(io::serialize_anchor(f->store));
    EXPECT_EQ(back.entries(), f->store.entries());
    EXPECT_EQ(back.current_block(), f->store.current_block());
    EXPECT_EQ(io::serialize_anchor(back), io::serialize_anchor(f->store));
}

TEST(AnchorFile, EmptyFileIsAnEmptyStore) {
    AnchorStore s = io::parse_anchor("");
    EXPECT_EQ(s.current_block(), 1u);
    EXPECT_TRUE(s.entries().empty());
}

TEST(AnchorFile, DuplicateDigestIsRejected) {
    std::string d = hash(std::string_view("x")).hex();
    std::string text = R"({"format_version":1,"current_block":3,"digests":[{"digest":")" + d +
                       R"(","block_number":1},{"digest":")" + d + R"(","block_number":2}]})";
    EXPECT_THROW(io::parse_anchor(text), io::FormatError);
    EXPECT_THROW(io::parse_anchor("not json"), io::FormatError);
    EXPECT_THROW(io::parse_anchor(R"({"format_version":9,"current_block":1,"digests":[]})"), io::FormatError);
}

TEST(AnchorFile, EditedBlockNumberInvalidatesReceipts) {
    auto f = record({3, 4}, 8);
    auto j = io::json::parse(io::serialize_anchor(f->store));
    j["digests"][0]["block_number"] = 42;
    AnchorStore edited = io::parse_anchor(j.dump());
    auto report = verify_log(make_available_log(f->stream), edited, {3, 4});
    EXPECT_EQ(report.unanchored_checkpoints, (std::set<std::uint64_t>{3}));
    // Checkpoint 7 still anchors the whole prefix through its links.
    EXPECT_EQ(report.status[3], Status::verifiable);

    j["digests"][1]["block_number"] = 43;
    auto report2 = verify_log(make_available_log(f->stream), io::parse_anchor(j.dump()), {3, 4});
    EXPECT_TRUE(report2.anchored_checkpoints.empty());
    EXPECT_EQ(report2.status[0], Status::unanchored_tail);
}

TEST(Golden, LogAndAnchorFilesAreStable) {
    // Deterministic recording: fixed key, no blinding pairs, fixed timestamps.
    AnchorStore store;
    EvidenceBatch batch(1);
    Recorder rec({2, 3}, KeyPair::from_label("golden-sensor"), EvidenceService{store, batch});
    for (int i = 0; i < 7; ++i) {
        rec.emit(1'700'000'000'000'000 + i * 1'000'000, std::nullopt, {Segment{"t", to_bytes(std::to_string(20 + i))}});
    }
    const std::string dir = TEVLOG_GOLDEN_DIR;
    EXPECT_EQ(io::serialize_log(make_available_log(rec.stream())), io::read_file(dir + "/small_log.jsonl"));
    EXPECT_EQ(io::serialize_anchor(store), io::read_file(dir + "/small_anchor.json"));
}

TEST(Reports, JsonAndCsv) {
    auto f = record({3, 4}, 6);
    std::vector<bool> avail(6, true);
    avail[1] = false;
    auto report = verify_log(make_available_log(f->stream, avail), f->store, {3, 4});
    auto j = io::report_to_json(report);
    EXPECT_EQ(j["length"], 6);
    EXPECT_EQ(j["statuses"][1]["status"], "lost");
    EXPECT_EQ(j["counts"]["verifiable"], 3);
    EXPECT_EQ(j["counts"]["unanchored_tail"], 2);
    std::string csv = io::report_to_csv(report);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "index,status");
    EXPECT_NE(csv.find("\n1,lost\n"), std::string::npos);
}

}  // namespace
