#include "hmsq/bitstream.hpp"

#include <fstream>
#include <stdexcept>

namespace hmsq {

namespace {

constexpr char kMagic[4] = {'H', 'M', 'S', 'C'};
constexpr std::uint8_t kVersion = 1;
constexpr int kMaxRateBits = 16;

void append_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    if (pos_ >= bytes_.size()) throw std::runtime_error("bitstream: truncated input");
    return bytes_[pos_++];
  }
  std::uint32_t u32le() {
    std::uint32_t v = u8();
    v |= static_cast<std::uint32_t>(u8()) << 8;
    v |= static_cast<std::uint32_t>(u8()) << 16;
    v |= static_cast<std::uint32_t>(u8()) << 24;
    return v;
  }
  std::span<const std::uint8_t> rest() const { return bytes_.subspan(pos_); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void check_rate(int rate_bits) {
  if (rate_bits < 1 || rate_bits > kMaxRateBits)
    throw std::invalid_argument("bitstream: rate_bits outside 1..16");
}

void append_header(std::vector<std::uint8_t>& out, const StreamHeader& h) {
  check_rate(h.rate_bits);
  if (h.enhancement && h.codec_id != CodecId::kScalableEnh)
    throw std::invalid_argument("bitstream: enhancement fields on a non-enhancement stream");
  if (h.codec_id == CodecId::kScalableEnh && !h.enhancement)
    throw std::invalid_argument("bitstream: enhancement stream missing L/base-rate fields");
  if ((h.codec_id == CodecId::kScalableBase || h.codec_id == CodecId::kScalableEnh) &&
      !h.stream_id)
    throw std::invalid_argument("bitstream: scalable stream missing stream_id");

  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(h.codec_id));
  out.push_back(static_cast<std::uint8_t>(h.rate_bits));
  out.push_back(0);  // reserved
  append_u32le(out, h.num_samples);
  if (h.stream_id) append_u32le(out, *h.stream_id);
  if (h.enhancement) {
    if (h.enhancement->delay_window < 0 || h.enhancement->delay_window > 255)
      throw std::invalid_argument("bitstream: delay window outside u8 range");
    check_rate(h.enhancement->base_rate_bits);
    out.push_back(static_cast<std::uint8_t>(h.enhancement->delay_window));
    out.push_back(static_cast<std::uint8_t>(h.enhancement->base_rate_bits));
  }
}

StreamHeader parse_header(ByteReader& reader) {
  for (char c : kMagic)
    if (reader.u8() != static_cast<std::uint8_t>(c))
      throw std::runtime_error("bitstream: bad magic");
  if (reader.u8() != kVersion) throw std::runtime_error("bitstream: unsupported version");

  StreamHeader h;
  const std::uint8_t codec = reader.u8();
  if (codec > static_cast<std::uint8_t>(CodecId::kScalableEnh))
    throw std::runtime_error("bitstream: unknown codec id");
  h.codec_id = static_cast<CodecId>(codec);
  h.rate_bits = reader.u8();
  if (h.rate_bits < 1 || h.rate_bits > kMaxRateBits)
    throw std::runtime_error("bitstream: rate_bits outside 1..16");
  if (reader.u8() != 0) throw std::runtime_error("bitstream: reserved byte must be zero");
  h.num_samples = reader.u32le();
  if (h.codec_id == CodecId::kScalableBase || h.codec_id == CodecId::kScalableEnh)
    h.stream_id = reader.u32le();
  if (h.codec_id == CodecId::kScalableEnh) {
    EnhancementInfo info;
    info.delay_window = reader.u8();
    info.base_rate_bits = reader.u8();
    if (info.base_rate_bits < 1 || info.base_rate_bits > kMaxRateBits)
      throw std::runtime_error("bitstream: base rate outside 1..16");
    h.enhancement = info;
  }
  return h;
}

}  // namespace

std::vector<std::uint8_t> pack_indices(std::span<const int> indices, int rate_bits) {
  check_rate(rate_bits);
  const int limit = 1 << rate_bits;
  std::vector<std::uint8_t> out((indices.size() * rate_bits + 7) / 8, 0);
  std::size_t bit = 0;
  for (int idx : indices) {
    if (idx < 0 || idx >= limit)
      throw std::invalid_argument("pack_indices: index does not fit in rate_bits");
    for (int b = rate_bits - 1; b >= 0; --b, ++bit) {
      if ((idx >> b) & 1) out[bit / 8] |= static_cast<std::uint8_t>(0x80 >> (bit % 8));
    }
  }
  return out;
}

std::vector<int> unpack_indices(std::span<const std::uint8_t> bytes, int rate_bits,
                                std::size_t count) {
  check_rate(rate_bits);
  if (bytes.size() * 8 < count * static_cast<std::size_t>(rate_bits))
    throw std::runtime_error("unpack_indices: truncated payload");
  std::vector<int> out(count);
  std::size_t bit = 0;
  for (std::size_t i = 0; i < count; ++i) {
    int idx = 0;
    for (int b = 0; b < rate_bits; ++b, ++bit)
      idx = (idx << 1) | ((bytes[bit / 8] >> (7 - bit % 8)) & 1);
    out[i] = idx;
  }
  return out;
}

std::vector<std::uint8_t> encode_stream(const StreamHeader& header,
                                        std::span<const int> indices) {
  if (indices.size() != header.num_samples)
    throw std::invalid_argument("encode_stream: num_samples disagrees with index count");
  std::vector<std::uint8_t> out;
  append_header(out, header);
  const std::vector<std::uint8_t> payload = pack_indices(indices, header.rate_bits);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

DecodedStream decode_stream(std::span<const std::uint8_t> bytes) {
  ByteReader reader(bytes);
  DecodedStream out;
  out.header = parse_header(reader);
  out.indices = unpack_indices(reader.rest(), out.header.rate_bits, out.header.num_samples);
  return out;
}

std::vector<std::uint8_t> encode_packets(const PacketStream& stream) {
  check_rate(stream.rate_bits);
  StreamHeader h;
  h.codec_id = CodecId::kTracking;
  h.rate_bits = stream.rate_bits;
  h.num_samples = stream.num_samples;

  std::vector<std::uint8_t> out;
  append_header(out, h);
  out.push_back(1);  // packetized flag

  const int index_bytes = (stream.rate_bits + 7) / 8;
  const int limit = 1 << stream.rate_bits;
  std::uint32_t prev_seq = 0;
  bool first = true;
  for (const Packet& p : stream.packets) {
    if (!first && p.seq_no <= prev_seq)
      throw std::invalid_argument("encode_packets: seq_no must be strictly increasing");
    if (p.seq_no >= stream.num_samples)
      throw std::invalid_argument("encode_packets: seq_no beyond sample count");
    if (p.index < 0 || p.index >= limit)
      throw std::invalid_argument("encode_packets: index does not fit in rate_bits");
    append_u32le(out, p.seq_no);
    for (int b = index_bytes - 1; b >= 0; --b)
      out.push_back(static_cast<std::uint8_t>((p.index >> (8 * b)) & 0xff));
    prev_seq = p.seq_no;
    first = false;
  }
  return out;
}

PacketStream decode_packets(std::span<const std::uint8_t> bytes) {
  ByteReader reader(bytes);
  const StreamHeader h = parse_header(reader);
  if (h.codec_id != CodecId::kTracking)
    throw std::runtime_error("decode_packets: not a tracking-codec packet file");
  if (reader.u8() != 1) throw std::runtime_error("decode_packets: missing packetized flag");

  PacketStream out;
  out.rate_bits = h.rate_bits;
  out.num_samples = h.num_samples;

  const int index_bytes = (h.rate_bits + 7) / 8;
  const std::size_t record = 4 + static_cast<std::size_t>(index_bytes);
  if (reader.remaining() % record != 0)
    throw std::runtime_error("decode_packets: truncated packet record");
  const std::size_t n = reader.remaining() / record;
  out.packets.reserve(n);
  std::uint32_t prev_seq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Packet p;
    p.seq_no = reader.u32le();
    int idx = 0;
    for (int b = 0; b < index_bytes; ++b) idx = (idx << 8) | reader.u8();
    p.index = idx;
    if (i > 0 && p.seq_no <= prev_seq)
      throw std::runtime_error("decode_packets: seq_no not strictly increasing");
    if (p.seq_no >= out.num_samples)
      throw std::runtime_error("decode_packets: seq_no beyond sample count");
    if (p.index >= (1 << h.rate_bits))
      throw std::runtime_error("decode_packets: index does not fit in rate_bits");
    prev_seq = p.seq_no;
    out.packets.push_back(p);
  }
  return out;
}

void write_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("write_bytes: cannot open " + path);
  file.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  if (!file) throw std::runtime_error("write_bytes: write failed for " + path);
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream file(path, std::ios::binary | std::ios::ate);
  if (!file) throw std::runtime_error("read_bytes: cannot open " + path);
  const std::streamsize size = file.tellg();
  file.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (size > 0) file.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!file) throw std::runtime_error("read_bytes: read failed for " + path);
  return bytes;
}

}  // namespace hmsq
