#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "singulate/model_io.hpp"

using namespace singulate;

namespace {

std::vector<LayerSpec> tiny_arch() {
    return {conv_layer(1, 2),  relu_layer(), pool_layer(),   flatten_layer(),
            fc_layer(2048, 3), relu_layer(), fc_layer(3, 1), sigmoid_layer()};
}

void fill_grads(Gradients& grads, Rng& rng) {
    for (LayerGrads& layer : grads) {
        for (double& g : layer.w) g = rng.uniform(-0.2, 0.2);
        for (double& g : layer.b) g = rng.uniform(-0.2, 0.2);
    }
}

NetworkParams stepped_params(const std::vector<LayerSpec>& arch, std::uint64_t seed, int steps) {
    NetworkParams params = init_params(arch, seed);
    TrainConfig cfg;
    Rng rng(derive_seed(seed, 0xFEED));
    for (int s = 0; s < steps; ++s) {
        Gradients grads = make_gradients(params);
        fill_grads(grads, rng);
        apply_adam(params, grads, cfg);
    }
    return params;
}

PushImage noise_image(std::uint64_t seed) {
    PushImage img;
    img.pixels.resize(std::size_t(PushImage::size) * PushImage::size);
    Rng rng(seed);
    for (float& p : img.pixels) p = float(rng.uniform(0.0, 1.0));
    return img;
}

std::vector<unsigned char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<unsigned char>((std::istreambuf_iterator<char>(in)),
                                      std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    REQUIRE(out.good());
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

void restamp_crc(std::vector<unsigned char>& bytes) {
    std::size_t payload = bytes.size() - 4;
    std::uint32_t crc =
        static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(payload)));
    std::memcpy(bytes.data() + payload, &crc, 4);
}

std::string artifact(const std::string& name) {
    std::filesystem::create_directories("test_artifacts");
    return "test_artifacts/" + name;
}

}  // namespace

TEST_CASE("model round trip is bit exact") {
    NetworkParams params = stepped_params(tiny_arch(), 33, 3);
    EncoderConventions conv;
    conv.gray_lo = 0.25;
    conv.working_scale = 250.0;

    std::string path = artifact("roundtrip.model");
    save_model(params, conv, path);
    ModelFile back = load_model(path);

    CHECK(back.conventions == conv);
    CHECK(back.params.adam_step == 3);
    REQUIRE(back.params.arch.size() == params.arch.size());
    for (std::size_t i = 0; i < params.arch.size(); ++i) {
        CHECK(back.params.arch[i].kind == params.arch[i].kind);
        CHECK(back.params.arch[i].in_channels == params.arch[i].in_channels);
        CHECK(back.params.arch[i].out_channels == params.arch[i].out_channels);
        CHECK(back.params.arch[i].in_units == params.arch[i].in_units);
        CHECK(back.params.arch[i].out_units == params.arch[i].out_units);
    }
    REQUIRE(back.params.layers.size() == params.layers.size());
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        CHECK(back.params.layers[i].w == params.layers[i].w);
        CHECK(back.params.layers[i].b == params.layers[i].b);
        CHECK(back.params.layers[i].mw == params.layers[i].mw);
        CHECK(back.params.layers[i].vw == params.layers[i].vw);
        CHECK(back.params.layers[i].mb == params.layers[i].mb);
        CHECK(back.params.layers[i].vb == params.layers[i].vb);
    }

    // repeated saves are byte identical
    std::string again = artifact("roundtrip_again.model");
    save_model(params, conv, again);
    CHECK(slurp(path) == slurp(again));
}

TEST_CASE("saved and loaded networks predict identically") {
    NetworkParams params = stepped_params(build_default_architecture(), 5, 1);
    std::string path = artifact("predict.model");
    save_model(params, EncoderConventions{}, path);
    ModelFile back = load_model(path);

    std::vector<PushImage> batch = {noise_image(70), noise_image(71), noise_image(72)};
    std::vector<double> before = forward(params, batch);
    std::vector<double> after = forward(back.params, batch);
    REQUIRE(before.size() == after.size());
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("adam optimisation resumes identically after reload") {
    NetworkParams live = stepped_params(tiny_arch(), 9, 2);
    std::string path = artifact("resume.model");
    save_model(live, EncoderConventions{}, path);
    NetworkParams reloaded = load_model(path).params;

    TrainConfig cfg;
    for (int s = 0; s < 2; ++s) {
        Gradients grads = make_gradients(live);
        Rng rng(derive_seed(77, std::uint64_t(s)));
        fill_grads(grads, rng);
        apply_adam(live, grads, cfg);
        apply_adam(reloaded, grads, cfg);
    }
    CHECK(reloaded.adam_step == live.adam_step);
    for (std::size_t i = 0; i < live.layers.size(); ++i) {
        CHECK(reloaded.layers[i].w == live.layers[i].w);
        CHECK(reloaded.layers[i].mw == live.layers[i].mw);
        CHECK(reloaded.layers[i].vw == live.layers[i].vw);
    }
}

TEST_CASE("truncation fails the checksum") {
    NetworkParams params = stepped_params(tiny_arch(), 2, 1);
    std::string path = artifact("trunc.model");
    save_model(params, EncoderConventions{}, path);
    std::vector<unsigned char> bytes = slurp(path);

    for (std::size_t keep : {bytes.size() - 1, bytes.size() / 2, std::size_t(6)}) {
        std::vector<unsigned char> cut(bytes.begin(), bytes.begin() + keep);
        std::string mangled = artifact("trunc_cut.model");
        spit(mangled, cut);
        CHECK_THROWS_AS(load_model(mangled), ChecksumError);
    }
}

TEST_CASE("corruption fails the checksum") {
    NetworkParams params = stepped_params(tiny_arch(), 3, 1);
    std::string path = artifact("corrupt.model");
    save_model(params, EncoderConventions{}, path);
    std::vector<unsigned char> bytes = slurp(path);

    for (std::size_t at : {std::size_t(8), bytes.size() / 2, bytes.size() - 5}) {
        std::vector<unsigned char> flipped = bytes;
        flipped[at] ^= 0x40;
        std::string mangled = artifact("corrupt_flip.model");
        spit(mangled, flipped);
        CHECK_THROWS_AS(load_model(mangled), ChecksumError);
    }
}

TEST_CASE("foreign version tag is rejected") {
    NetworkParams params = stepped_params(tiny_arch(), 4, 1);
    std::string path = artifact("version.model");
    save_model(params, EncoderConventions{}, path);
    std::vector<unsigned char> bytes = slurp(path);

    std::uint32_t alien = model_version + 8;
    std::memcpy(bytes.data() + 8, &alien, 4);
    restamp_crc(bytes);
    std::string mangled = artifact("version_alien.model");
    spit(mangled, bytes);
    try {
        load_model(mangled);
        FAIL("expected a version error");
    } catch (const VersionError& e) {
        CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
}

TEST_CASE("alien magic is rejected") {
    NetworkParams params = stepped_params(tiny_arch(), 6, 1);
    std::string path = artifact("magic.model");
    save_model(params, EncoderConventions{}, path);
    std::vector<unsigned char> bytes = slurp(path);

    bytes[0] = 'X';
    std::string mangled = artifact("magic_alien.model");
    spit(mangled, bytes);
    CHECK_THROWS_AS(load_model(mangled), VersionError);
}

TEST_CASE("blob shapes must match the architecture table") {
    NetworkParams params = stepped_params(tiny_arch(), 12, 1);
    params.layers[0].w.pop_back();
    std::string path = artifact("shape.model");
    save_model(params, EncoderConventions{}, path);
    CHECK_THROWS_AS(load_model(path), FormatError);
}

TEST_CASE("missing file reports the path") {
    try {
        load_model("test_artifacts/no_such.model");
        FAIL("expected an open failure");
    } catch (const std::runtime_error& e) {
        std::string msg = e.what();
        CHECK(msg.find("cannot open") != std::string::npos);
        CHECK(msg.find("no_such.model") != std::string::npos);
    }
}
