#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "effectcast/error.hpp"
#include "effectcast/image_io.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace effectcast;
namespace fs = std::filesystem;

TEST_SUITE("image_io") {

TEST_CASE("frame PNG round trip is lossless") {
    oracle::Random rng(21);
    for (int i = 0; i < 10; ++i) {
        const Frame f = rng.frame(rng.uniform(1, 40), rng.uniform(1, 40));
        const auto png = encode_png(f);
        REQUIRE(decode_frame(png) == f);
    }
}

TEST_CASE("mask PNG round trip is bit exact and uses 0/255 gray") {
    oracle::Random rng(22);
    const Mask m = rng.mask(33, 17);
    const auto png = encode_mask_png(m);
    CHECK(decode_mask(png) == m);

    testing_support::TempDir dir;
    write_mask(dir / "m.png", m);
    CHECK(read_mask(dir / "m.png") == m);
}

TEST_CASE("decode_mask rejects gray levels other than 0 and 255") {
    // A "frame" PNG whose first pixel is mid-gray cannot be a mask.
    Frame f(2, 2, Rgb{128, 128, 128});
    CHECK_THROWS_AS(decode_mask(encode_png(f)), Error);
}

TEST_CASE("decode_frame reads the committed fixture frames") {
    const Frame f = read_frame(fs::path(EFFECTCAST_FIXTURE_DIR) / "mini/frames/P01_01/frame_0000000120.png");
    CHECK(f.width() == 160);
    CHECK(f.height() == 120);
}

TEST_CASE("decode_frame rejects garbage") {
    const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5};
    try {
        decode_frame(junk);
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Parse);
    }
}

TEST_CASE("write_file_atomic creates parents and replaces content") {
    testing_support::TempDir dir;
    const fs::path p = dir / "a/b/c.txt";
    write_file_atomic(p, std::string_view("first"));
    write_file_atomic(p, std::string_view("second"));
    const auto bytes = read_file(p);
    CHECK(std::string(bytes.begin(), bytes.end()) == "second");
    for (const auto& entry : fs::directory_iterator(p.parent_path())) {
        CHECK(entry.path().filename() == "c.txt");
    }
}

TEST_CASE("read_file on a missing path is an io error") {
    try {
        read_file("/nonexistent/effectcast/file");
        FAIL("expected io error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Io);
    }
}

}  // TEST_SUITE
