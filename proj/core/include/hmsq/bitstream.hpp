#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hmsq {

enum class CodecId : std::uint8_t {
  kTracking = 0,
  kDpcm = 1,
  kFsq = 2,
  kScalableBase = 3,
  kScalableEnh = 4,
};

struct EnhancementInfo {
  int delay_window = 0;   // base-layer lookahead L
  int base_rate_bits = 0; // rate of the paired base stream
};

// 12-byte fixed header: "HMSC", version, codec id, rate bits, reserved zero
// byte, sample count (u32 LE). Scalable streams append a pairing id (u32 LE);
// enhancement streams additionally append L and the base rate (u8 each).
struct StreamHeader {
  CodecId codec_id = CodecId::kTracking;
  int rate_bits = 0;
  std::uint32_t num_samples = 0;
  std::optional<std::uint32_t> stream_id;
  std::optional<EnhancementInfo> enhancement;
};

// Indices packed R bits each, big-endian bit order, zero-padded to a byte.
std::vector<std::uint8_t> pack_indices(std::span<const int> indices, int rate_bits);
std::vector<int> unpack_indices(std::span<const std::uint8_t> bytes, int rate_bits,
                                std::size_t count);

std::vector<std::uint8_t> encode_stream(const StreamHeader& header,
                                        std::span<const int> indices);

struct DecodedStream {
  StreamHeader header;
  std::vector<int> indices;
};
// Throws std::runtime_error on bad magic, unknown version/codec, or a
// truncated payload.
DecodedStream decode_stream(std::span<const std::uint8_t> bytes);

// One quantizer index per packet; erasures appear only as gaps in seq_no.
struct Packet {
  std::uint32_t seq_no = 0;
  int index = 0;
};

struct PacketStream {
  int rate_bits = 0;
  std::uint32_t num_samples = 0;  // count before erasure, defines the gaps
  std::vector<Packet> packets;    // strictly increasing seq_no
};

// Packet file: tracking-codec header followed by a packetized flag byte, then
// per received packet seq_no (u32 LE) + the index in ceil(R/8) bytes.
std::vector<std::uint8_t> encode_packets(const PacketStream& stream);
PacketStream decode_packets(std::span<const std::uint8_t> bytes);

void write_bytes(const std::string& path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_bytes(const std::string& path);

}  // namespace hmsq
