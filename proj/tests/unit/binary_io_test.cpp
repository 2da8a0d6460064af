#include <filesystem>

#include <gtest/gtest.h>

#include "mnemo/core/binary_io.hpp"

namespace mnemo::io {
namespace {

TEST(BinaryIo, WriterReaderRoundTrip) {
    Writer w;
    w.put<std::uint32_t>(0xdeadbeef);
    w.put<double>(-1.25);
    w.put<std::uint64_t>(42);
    w.put_bytes("xyz");
    const auto bytes = w.bytes();
    ASSERT_EQ(bytes.size(), 4u + 8u + 8u + 3u);
    EXPECT_EQ(bytes[0], 0xef);  // little-endian
    Reader r(bytes, "mem");
    EXPECT_EQ(r.get_le<std::uint32_t>("a"), 0xdeadbeefu);
    EXPECT_EQ(r.get_le<double>("b"), -1.25);
    EXPECT_EQ(r.get_le<std::uint64_t>("c"), 42u);
    const auto tail = r.get_bytes(3, "d");
    EXPECT_EQ(std::string(tail.begin(), tail.end()), "xyz");
    EXPECT_EQ(r.remaining(), 0u);
}

TEST(BinaryIo, TruncationNamesTheOffset) {
    const std::vector<std::uint8_t> bytes{1, 2, 3, 4, 5, 6};
    Reader r(bytes, "short.bin");
    (void)r.get_le<std::uint32_t>("header");
    try {
        (void)r.get_le<std::uint32_t>("count");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("short.bin"), std::string::npos) << msg;
        EXPECT_NE(msg.find("offset 4"), std::string::npos) << msg;
        EXPECT_NE(msg.find("count"), std::string::npos) << msg;
    }
}

TEST(BinaryIo, BigEndianU32) {
    const std::vector<std::uint8_t> bytes{0x00, 0x00, 0x08, 0x03};
    Reader r(bytes, "be");
    EXPECT_EQ(r.get_u32_be("magic"), 0x803u);
}

TEST(BinaryIo, AtomicWriteLeavesNoTempFile) {
    const auto dir = std::filesystem::temp_directory_path() / "mnemo_io_test";
    std::filesystem::remove_all(dir);
    write_text_atomic(dir / "a.txt", "hello");
    EXPECT_EQ(read_file(dir / "a.txt").size(), 5u);
    EXPECT_FALSE(std::filesystem::exists(dir / "a.txt.tmp"));
    EXPECT_THROW((void)read_file(dir / "missing"), ValidationError);
    std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace mnemo::io
