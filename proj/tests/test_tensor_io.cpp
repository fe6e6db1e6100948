#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "irvf/tensor.hpp"
#include "irvf/tensor_io.hpp"

using namespace irvf;

namespace {
std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("tensor shape and data invariants") {
    TensorF t({2, 3, 4});
    CHECK(t.size() == 24);
    CHECK(t.shape().plane() == 12);
    t.at(1, 2, 3) = 5.0f;
    CHECK(t[t.flat(1, 2, 3)] == 5.0f);
    CHECK(t.all_finite());

    CHECK_THROWS(TensorF({2, 2, 2}, std::vector<float>(7)));
}

TEST_CASE("tensor file format is bit-exact") {
    TensorF t({2, 3, 2});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.125f * static_cast<float>(i) - 0.5f;
    const std::string path = temp_path("irvf_roundtrip.irvf");
    write_tensor_file(path, t);

    const auto bytes = read_bytes(path);
    REQUIRE(bytes.size() == 16 + 4 * t.size());
    CHECK(bytes[0] == 'I');
    CHECK(bytes[1] == 'R');
    CHECK(bytes[2] == 'V');
    CHECK(bytes[3] == 'F');
    // little-endian dims C=2, H=3, W=2
    CHECK(bytes[4] == 2);
    CHECK(bytes[5] == 0);
    CHECK(bytes[8] == 3);
    CHECK(bytes[12] == 2);

    const TensorF back = read_tensor_file(path);
    CHECK(back == t);

    // write -> read -> write reproduces the same bytes
    const std::string path2 = temp_path("irvf_roundtrip2.irvf");
    write_tensor_file(path2, back);
    CHECK(read_bytes(path2) == bytes);

    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("tensor file rejects bad magic and truncation") {
    const std::string path = temp_path("irvf_bad.irvf");
    write_bytes(path, {'N', 'O', 'P', 'E', 0, 0, 0, 0});
    CHECK_THROWS(read_tensor_file(path));

    TensorF t({1, 2, 2});
    std::vector<std::uint8_t> enc;
    encode_tensor_record(enc, t);
    enc.pop_back();
    write_bytes(path, enc);
    CHECK_THROWS(read_tensor_file(path));
    std::filesystem::remove(path);
}
