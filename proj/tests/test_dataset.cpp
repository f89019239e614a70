#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "singulate/dataset.hpp"

using namespace singulate;

namespace {

LabeledSample make_sample(std::uint64_t seed, int label) {
    LabeledSample s;
    Rng rng(seed);
    s.image.pixels.resize(std::size_t(PushImage::size) * PushImage::size);
    for (float& p : s.image.pixels) p = float(rng.uniform(0.0, 1.0));
    s.image.proposal.c = {rng.uniform(0.0, 320.0), rng.uniform(0.0, 256.0)};
    s.image.proposal.alpha = rng.uniform(-M_PI, M_PI);
    s.image.proposal.handle.position = {rng.uniform(0.0, 1.0), rng.uniform(0.0, 0.8)};
    s.image.proposal.handle.normal = {1.0, 0.0};
    s.image.proposal.handle.segment = int(seed % 7);
    s.label = label;
    s.trial = std::int64_t(seed * 3);
    s.push_index = int(seed % 5);
    s.policy = (seed % 2 == 0) ? "random" : "vanilla_network";
    s.validation = (seed % 3 == 0);
    return s;
}

void check_equal(const LabeledSample& a, const LabeledSample& b) {
    CHECK(a.image.pixels == b.image.pixels);
    CHECK(a.image.proposal.c == b.image.proposal.c);
    CHECK(a.image.proposal.alpha == b.image.proposal.alpha);
    CHECK(a.image.proposal.handle.position == b.image.proposal.handle.position);
    CHECK(a.image.proposal.handle.normal == b.image.proposal.handle.normal);
    CHECK(a.image.proposal.handle.segment == b.image.proposal.handle.segment);
    CHECK(a.image.proposal.handle.length == b.image.proposal.handle.length);
    CHECK(a.label == b.label);
    CHECK(a.trial == b.trial);
    CHECK(a.push_index == b.push_index);
    CHECK(a.policy == b.policy);
    CHECK(a.validation == b.validation);
}

std::string artifact(const std::string& name) {
    std::filesystem::create_directories("test_artifacts");
    return "test_artifacts/" + name;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    REQUIRE(out.good());
    out.write(bytes.data(), std::streamsize(bytes.size()));
}

}  // namespace

TEST_CASE("dataset round trip preserves every record") {
    std::string base = artifact("ds_roundtrip");
    std::vector<LabeledSample> originals;
    {
        DatasetWriter writer(base);
        for (std::uint64_t i = 0; i < 5; ++i) {
            originals.push_back(make_sample(i + 1, int(i % 2)));
            writer.append(originals.back());
        }
        CHECK(writer.count() == 5);
    }
    Dataset back = load_dataset(base);
    REQUIRE(back.samples.size() == 5);
    REQUIRE(back.meta.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        check_equal(back.samples[i], originals[i]);
        CHECK(back.meta[i].empty());
    }
}

TEST_CASE("dataset header identifies the format") {
    std::string base = artifact("ds_header");
    { DatasetWriter writer(base); }
    std::string meta = slurp(base + ".ndjson");
    auto header = nlohmann::json::parse(meta.substr(0, meta.find('\n')));
    CHECK(header.at("kind") == "header");
    CHECK(header.at("format") == "singulate-dataset");
    CHECK(header.at("version") == 1);
    CHECK(header.at("image_size") == 64);
}

TEST_CASE("appending extends an existing dataset") {
    std::string base = artifact("ds_append");
    std::vector<LabeledSample> originals;
    {
        DatasetWriter writer(base);
        for (std::uint64_t i = 0; i < 3; ++i) {
            originals.push_back(make_sample(i + 10, 1));
            writer.append(originals.back());
        }
    }
    {
        DatasetWriter writer(base, DatasetWriter::Mode::append);
        CHECK(writer.count() == 3);
        for (std::uint64_t i = 0; i < 2; ++i) {
            originals.push_back(make_sample(i + 50, 0));
            writer.append(originals.back());
        }
        CHECK(writer.count() == 5);
    }
    Dataset back = load_dataset(base);
    REQUIRE(back.samples.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) check_equal(back.samples[i], originals[i]);
}

TEST_CASE("identical writes are byte identical") {
    std::string a = artifact("ds_bytes_a");
    std::string b = artifact("ds_bytes_b");
    for (const std::string& base : {a, b}) {
        DatasetWriter writer(base);
        for (std::uint64_t i = 0; i < 4; ++i)
            writer.append(make_sample(i + 30, int(i % 2)), {{"score", 0.25 * double(i)}});
    }
    CHECK(slurp(a + ".ndjson") == slurp(b + ".ndjson"));
    CHECK(slurp(a + ".blob") == slurp(b + ".blob"));
}

TEST_CASE("audit meta survives the round trip") {
    std::string base = artifact("ds_meta");
    nlohmann::json extra = {{"breakdown", {{"singulated", true}, {"multi_motion", false}}},
                            {"score", 0.75}};
    {
        DatasetWriter writer(base);
        writer.append(make_sample(3, 1), extra);
        writer.append(make_sample(4, 0));
    }
    Dataset back = load_dataset(base);
    REQUIRE(back.meta.size() == 2);
    CHECK(back.meta[0] == extra);
    CHECK(back.meta[1].empty());
}

TEST_CASE("corrupt meta reports the line number") {
    std::string base = artifact("ds_badline");
    {
        DatasetWriter writer(base);
        for (std::uint64_t i = 0; i < 3; ++i) writer.append(make_sample(i + 5, 0));
    }
    std::string meta = slurp(base + ".ndjson");
    std::size_t first = meta.find('\n');
    std::size_t second = meta.find('\n', first + 1);
    std::size_t third = meta.find('\n', second + 1);
    spit(base + ".ndjson",
         meta.substr(0, second + 1) + "{oops\n" + meta.substr(third + 1));
    try {
        load_dataset(base);
        FAIL("expected a schema error");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("truncated blob reports the offset") {
    std::string base = artifact("ds_shortblob");
    {
        DatasetWriter writer(base);
        for (std::uint64_t i = 0; i < 2; ++i) writer.append(make_sample(i + 8, 0));
    }
    std::string blob = slurp(base + ".blob");
    spit(base + ".blob", blob.substr(0, blob.size() - 100));
    try {
        load_dataset(base);
        FAIL("expected a schema error");
    } catch (const SchemaError& e) {
        std::string msg = e.what();
        CHECK(msg.find("blob") != std::string::npos);
        CHECK(msg.find("16384") != std::string::npos);
    }
}

TEST_CASE("foreign dataset version is refused") {
    std::string base = artifact("ds_version");
    {
        DatasetWriter writer(base);
        writer.append(make_sample(2, 1));
    }
    std::string meta = slurp(base + ".ndjson");
    std::size_t first = meta.find('\n');
    auto header = nlohmann::json::parse(meta.substr(0, first));
    header["version"] = 9;
    spit(base + ".ndjson", header.dump() + meta.substr(first));

    try {
        load_dataset(base);
        FAIL("expected a schema error");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
    CHECK_THROWS_AS(DatasetWriter(base, DatasetWriter::Mode::append), SchemaError);
}

TEST_CASE("append refuses a blob that disagrees with the meta") {
    std::string base = artifact("ds_blobsize");
    {
        DatasetWriter writer(base);
        writer.append(make_sample(6, 0));
    }
    spit(base + ".blob", slurp(base + ".blob") + "x");
    CHECK_THROWS_AS(DatasetWriter(base, DatasetWriter::Mode::append), SchemaError);
}

TEST_CASE("wrong image size is refused") {
    std::string base = artifact("ds_badimage");
    DatasetWriter writer(base);
    LabeledSample bad = make_sample(1, 0);
    bad.image.pixels.resize(100);
    CHECK_THROWS_AS(writer.append(bad), std::invalid_argument);
}

TEST_CASE("merging datasets preserves order and meta") {
    std::string a = artifact("ds_merge_a");
    std::string b = artifact("ds_merge_b");
    std::string merged = artifact("ds_merged");
    std::vector<LabeledSample> originals;
    {
        DatasetWriter wa(a);
        for (std::uint64_t i = 0; i < 3; ++i) {
            originals.push_back(make_sample(i + 100, 1));
            wa.append(originals.back(), {{"round", 1}});
        }
        DatasetWriter wb(b);
        for (std::uint64_t i = 0; i < 2; ++i) {
            originals.push_back(make_sample(i + 200, 0));
            wb.append(originals.back(), {{"round", 2}});
        }
    }
    merge_datasets({a, b}, merged);
    Dataset back = load_dataset(merged);
    REQUIRE(back.samples.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) check_equal(back.samples[i], originals[i]);
    CHECK(back.meta[0].at("round") == 1);
    CHECK(back.meta[4].at("round") == 2);
}
