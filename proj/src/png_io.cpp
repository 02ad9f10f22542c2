#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "ecgkit/errors.hpp"
#include "ecgkit/raster.hpp"

namespace ecg {

namespace {

constexpr std::array<std::uint8_t, 8> kPngSignature = {0x89, 0x50, 0x4E, 0x47,
                                                       0x0D, 0x0A, 0x1A, 0x0A};

std::uint32_t crc32(const std::uint8_t* data, std::size_t len, std::uint32_t crc = 0) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  crc ^= 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

std::uint32_t adler32(const std::uint8_t* data, std::size_t len) {
  std::uint32_t a = 1, b = 0;
  for (std::size_t i = 0; i < len; ++i) {
    a = (a + data[i]) % 65521u;
    b = (b + a) % 65521u;
  }
  return (b << 16) | a;
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  std::vector<std::uint8_t> body(type, type + 4);
  body.insert(body.end(), data.begin(), data.end());
  out.insert(out.end(), body.begin(), body.end());
  put_be32(out, crc32(body.data(), body.size()));
}

// Zlib stream whose deflate payload is stored (uncompressed) blocks only.
// Trades file size for a byte stream that no compressor version can change.
std::vector<std::uint8_t> zlib_stored(const std::vector<std::uint8_t>& raw) {
  std::vector<std::uint8_t> out;
  out.push_back(0x78);
  out.push_back(0x01);
  std::size_t pos = 0;
  do {
    const std::size_t len = std::min<std::size_t>(raw.size() - pos, 65535);
    const bool final = pos + len == raw.size();
    out.push_back(final ? 0x01 : 0x00);
    out.push_back(static_cast<std::uint8_t>(len & 0xFF));
    out.push_back(static_cast<std::uint8_t>(len >> 8));
    out.push_back(static_cast<std::uint8_t>(~len & 0xFF));
    out.push_back(static_cast<std::uint8_t>((~len >> 8) & 0xFF));
    out.insert(out.end(), raw.begin() + static_cast<std::ptrdiff_t>(pos),
               raw.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  } while (pos < raw.size());
  put_be32(out, adler32(raw.data(), raw.size()));
  return out;
}

}  // namespace

void write_png(const RasterImage& img, const std::filesystem::path& path) {
  if (img.width < 1 || img.height < 1 ||
      img.pixels.size() != static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height))
    throw DomainError("write_png: image dimensions do not match pixel buffer");

  std::vector<std::uint8_t> file(kPngSignature.begin(), kPngSignature.end());

  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(img.width));
  put_be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // color type: grayscale
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter method
  ihdr.push_back(0);  // no interlace
  append_chunk(file, "IHDR", ihdr);

  std::vector<std::uint8_t> scanlines;
  scanlines.reserve(static_cast<std::size_t>(img.height) * (static_cast<std::size_t>(img.width) + 1));
  for (int y = 0; y < img.height; ++y) {
    scanlines.push_back(0);  // filter: none
    const std::size_t row = static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width);
    scanlines.insert(scanlines.end(), img.pixels.begin() + static_cast<std::ptrdiff_t>(row),
                     img.pixels.begin() + static_cast<std::ptrdiff_t>(row + static_cast<std::size_t>(img.width)));
  }
  append_chunk(file, "IDAT", zlib_stored(scanlines));
  append_chunk(file, "IEND", {});

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(file.data()), static_cast<std::streamsize>(file.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

namespace {

struct ByteReader {
  const std::vector<std::uint8_t>& buf;
  std::size_t pos = 0;
  std::uint8_t u8() {
    if (pos >= buf.size()) throw FormatError("png: truncated file");
    return buf[pos++];
  }
  std::uint32_t be32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | u8();
    return v;
  }
  void take(std::uint8_t* dst, std::size_t n) {
    if (pos + n > buf.size()) throw FormatError("png: truncated file");
    std::memcpy(dst, buf.data() + pos, n);
    pos += n;
  }
};

}  // namespace

RasterImage read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  ByteReader r{buf};

  for (std::uint8_t expected : kPngSignature) {
    if (r.u8() != expected) throw FormatError("'" + path.string() + "': not a PNG file");
  }

  RasterImage img;
  std::vector<std::uint8_t> idat;
  bool saw_ihdr = false, saw_iend = false;
  while (!saw_iend) {
    const std::uint32_t len = r.be32();
    char type[5] = {};
    r.take(reinterpret_cast<std::uint8_t*>(type), 4);
    std::vector<std::uint8_t> data(len);
    if (len > 0) r.take(data.data(), len);
    r.be32();  // chunk crc; content is validated structurally below
    const std::string t(type);
    if (t == "IHDR") {
      if (len != 13) throw FormatError("png: bad IHDR length");
      ByteReader h{data};
      img.width = static_cast<int>(h.be32());
      img.height = static_cast<int>(h.be32());
      const int depth = h.u8(), color = h.u8();
      h.u8();
      h.u8();
      const int interlace = h.u8();
      if (depth != 8 || color != 0 || interlace != 0)
        throw FormatError("png: only 8-bit non-interlaced grayscale is supported");
      saw_ihdr = true;
    } else if (t == "IDAT") {
      idat.insert(idat.end(), data.begin(), data.end());
    } else if (t == "IEND") {
      saw_iend = true;
    }
  }
  if (!saw_ihdr) throw FormatError("png: missing IHDR");

  // Inflate, limited to the stored-block streams this library writes.
  ByteReader z{idat};
  z.u8();
  z.u8();  // zlib header
  std::vector<std::uint8_t> raw;
  for (;;) {
    const std::uint8_t hdr = z.u8();
    if ((hdr & 0x06) != 0) throw FormatError("png: compressed deflate blocks are not supported");
    const std::uint32_t len = z.u8() | (static_cast<std::uint32_t>(z.u8()) << 8);
    const std::uint32_t nlen = z.u8() | (static_cast<std::uint32_t>(z.u8()) << 8);
    if ((len ^ 0xFFFF) != nlen) throw FormatError("png: corrupt stored block");
    const std::size_t at = raw.size();
    raw.resize(at + len);
    if (len > 0) z.take(raw.data() + at, len);
    if (hdr & 0x01) break;
  }
  if (adler32(raw.data(), raw.size()) != z.be32())
    throw FormatError("png: adler32 mismatch");

  const std::size_t stride = static_cast<std::size_t>(img.width) + 1;
  if (raw.size() != stride * static_cast<std::size_t>(img.height))
    throw FormatError("png: pixel data size mismatch");
  img.pixels.resize(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    if (raw[static_cast<std::size_t>(y) * stride] != 0)
      throw FormatError("png: only filter type 0 is supported");
    std::memcpy(img.pixels.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width),
                raw.data() + static_cast<std::size_t>(y) * stride + 1,
                static_cast<std::size_t>(img.width));
  }
  return img;
}

}  // namespace ecg
