#include <doctest.h>

#include <cstdio>
#include <string>
#include <vector>

#include "hmsq/bitstream.hpp"
#include "hmsq/rng.hpp"

using namespace hmsq;

namespace {

std::vector<int> random_indices(Rng& rng, int rate_bits, std::size_t n) {
  std::vector<int> out(n);
  for (int& v : out) v = static_cast<int>(rng.index(std::size_t{1} << rate_bits));
  return out;
}

}  // namespace

TEST_CASE("index packing round-trips at every rate") {
  Rng rng(1);
  for (int rate = 1; rate <= 16; ++rate) {
    const std::vector<int> indices = random_indices(rng, rate, 129);
    const auto bytes = pack_indices(indices, rate);
    CHECK(bytes.size() == (129 * rate + 7) / 8);
    CHECK(unpack_indices(bytes, rate, 129) == indices);
  }
}

TEST_CASE("known bit layout: rate 3, big-endian within bytes") {
  const std::vector<int> indices{1, 2, 3};  // 001 010 011 -> 00101001 1(pad)
  const auto bytes = pack_indices(indices, 3);
  REQUIRE(bytes.size() == 2);
  CHECK(bytes[0] == 0x29);
  CHECK(bytes[1] == 0x80);
}

TEST_CASE("stream encode/decode round-trip") {
  Rng rng(2);
  StreamHeader header;
  header.codec_id = CodecId::kTracking;
  header.rate_bits = 4;
  header.num_samples = 1000;
  const std::vector<int> indices = random_indices(rng, 4, 1000);
  const auto bytes = encode_stream(header, indices);
  const DecodedStream back = decode_stream(bytes);
  CHECK(back.header.codec_id == CodecId::kTracking);
  CHECK(back.header.rate_bits == 4);
  CHECK(back.header.num_samples == 1000);
  CHECK_FALSE(back.header.stream_id.has_value());
  CHECK(back.indices == indices);
}

TEST_CASE("scalable headers carry the pairing id and enhancement extras") {
  Rng rng(3);
  StreamHeader base;
  base.codec_id = CodecId::kScalableBase;
  base.rate_bits = 3;
  base.num_samples = 64;
  base.stream_id = 0xdeadbeef;
  const auto base_bytes = encode_stream(base, random_indices(rng, 3, 64));
  CHECK(decode_stream(base_bytes).header.stream_id == 0xdeadbeef);

  StreamHeader enh = base;
  enh.codec_id = CodecId::kScalableEnh;
  enh.rate_bits = 2;
  enh.enhancement = EnhancementInfo{1, 3};
  const auto enh_bytes = encode_stream(enh, random_indices(rng, 2, 64));
  const DecodedStream back = decode_stream(enh_bytes);
  REQUIRE(back.header.enhancement.has_value());
  CHECK(back.header.enhancement->delay_window == 1);
  CHECK(back.header.enhancement->base_rate_bits == 3);

  SUBCASE("missing pairing id is rejected at encode time") {
    StreamHeader broken = base;
    broken.stream_id.reset();
    CHECK_THROWS(encode_stream(broken, std::vector<int>(64, 0)));
  }
  SUBCASE("enhancement without extras is rejected") {
    StreamHeader broken = enh;
    broken.enhancement.reset();
    CHECK_THROWS(encode_stream(broken, std::vector<int>(64, 0)));
  }
}

TEST_CASE("malformed streams are rejected") {
  StreamHeader header;
  header.codec_id = CodecId::kDpcm;
  header.rate_bits = 2;
  header.num_samples = 8;
  auto bytes = encode_stream(header, std::vector<int>(8, 1));

  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK_THROWS(decode_stream(bytes));
  }
  SUBCASE("unknown version") {
    bytes[4] = 9;
    CHECK_THROWS(decode_stream(bytes));
  }
  SUBCASE("unknown codec id") {
    bytes[5] = 200;
    CHECK_THROWS(decode_stream(bytes));
  }
  SUBCASE("nonzero reserved byte") {
    bytes[7] = 1;
    CHECK_THROWS(decode_stream(bytes));
  }
  SUBCASE("truncated payload") {
    bytes.pop_back();
    CHECK_THROWS(decode_stream(bytes));
  }
  SUBCASE("out-of-range index bits surface as an error") {
    StreamHeader h2 = header;
    CHECK_THROWS(encode_stream(h2, std::vector<int>(8, 7)));  // needs 3 bits
  }
}

TEST_CASE("packet files preserve gaps and reject disorder") {
  PacketStream stream;
  stream.rate_bits = 4;
  stream.num_samples = 10;
  stream.packets = {{0, 3}, {1, 15}, {4, 7}, {9, 0}};  // erasures at 2,3,5..8
  const auto bytes = encode_packets(stream);
  const PacketStream back = decode_packets(bytes);
  CHECK(back.rate_bits == 4);
  CHECK(back.num_samples == 10);
  REQUIRE(back.packets.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(back.packets[i].seq_no == stream.packets[i].seq_no);
    CHECK(back.packets[i].index == stream.packets[i].index);
  }

  SUBCASE("non-increasing seq_no is rejected") {
    PacketStream bad = stream;
    bad.packets[2].seq_no = 1;
    CHECK_THROWS(encode_packets(bad));
  }
  SUBCASE("seq_no beyond num_samples is rejected") {
    PacketStream bad = stream;
    bad.packets.back().seq_no = 10;
    CHECK_THROWS(encode_packets(bad));
  }
}

TEST_CASE("byte file round-trip") {
  const std::string path = "bitstream_roundtrip.tmp";
  Rng rng(4);
  std::vector<std::uint8_t> payload(1009);
  for (auto& b : payload) b = static_cast<std::uint8_t>(rng.index(256));
  write_bytes(path, payload);
  CHECK(read_bytes(path) == payload);
  std::remove(path.c_str());
  CHECK_THROWS(read_bytes(path));
}
