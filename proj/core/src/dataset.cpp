// Copyright 2026 The EEV Authors
// SPDX-License-Identifier: Apache-2.0

#include "eev/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace eev {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DatasetError("cannot read " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return std::move(s).str();
}

// gzip-transparent read (plain files pass through unchanged).
std::string read_maybe_gz(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw DatasetError("cannot read " + path.string());
  std::string out;
  char buf[1 << 16];
  for (;;) {
    int n = gzread(f, buf, sizeof buf);
    if (n < 0) {
      gzclose(f);
      throw DatasetError("corrupt gzip stream in " + path.string());
    }
    if (n == 0) break;
    out.append(buf, static_cast<std::size_t>(n));
  }
  gzclose(f);
  return out;
}

std::uint32_t be32(const std::string& b, std::size_t pos) {
  if (pos + 4 > b.size()) throw DatasetError("truncated IDX header");
  auto u = [&](std::size_t i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + i])); };
  return u(0) << 24 | u(1) << 16 | u(2) << 8 | u(3);
}

template <typename T>
T le(const std::string& b, std::size_t pos) {
  if (pos + sizeof(T) > b.size()) throw DatasetError("truncated archive");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<T>(static_cast<T>(static_cast<unsigned char>(b[pos + i])) << (8 * i));
  return v;
}

template <typename T>
void put_le(std::string& b, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

Shape3 shape_from_dims(std::span<const std::int64_t> dims, const std::string& what) {
  auto i32 = [](std::int64_t v) { return static_cast<std::int32_t>(v); };
  switch (dims.size()) {
    case 1: return {1, i32(dims[0]), 1};
    case 2: return {i32(dims[0]), i32(dims[1]), 1};
    case 3: return {i32(dims[0]), i32(dims[1]), i32(dims[2])};
    default: throw DatasetError(what + ": unsupported image rank " + std::to_string(dims.size()));
  }
}

void check_range(const std::vector<double>& v, const std::string& what) {
  for (double x : v)
    if (!(x >= 0.0 && x <= 1.0)) throw DatasetError(what + ": pixel value outside [0, 1]");
}

}  // namespace

// --- IDX ---------------------------------------------------------------------------

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  std::string ib = read_maybe_gz(images);
  std::string lb = read_maybe_gz(labels);
  std::uint32_t magic = be32(ib, 0);
  if ((magic >> 8) != 0x08 || (magic & 0xff) < 2 || (magic & 0xff) > 4)
    throw DatasetError(images.string() + ": not an unsigned-byte IDX file of rank 2..4");
  const std::size_t rank = magic & 0xff;
  std::vector<std::int64_t> dims;
  for (std::size_t i = 0; i < rank; ++i) dims.push_back(be32(ib, 4 + 4 * i));
  const std::size_t header = 4 + 4 * rank;
  if (be32(lb, 0) != 0x0801) throw DatasetError(labels.string() + ": not an IDX label file");
  const std::int64_t n = dims[0];
  if (be32(lb, 4) != static_cast<std::uint32_t>(n))
    throw DatasetError("IDX image and label counts differ");
  Dataset d;
  d.shape = shape_from_dims(std::span(dims).subspan(1), images.string());
  const auto size = static_cast<std::size_t>(d.shape.size());
  if (ib.size() < header + static_cast<std::size_t>(n) * size || lb.size() < 8 + static_cast<std::size_t>(n))
    throw DatasetError("truncated IDX data");
  for (std::int64_t i = 0; i < n; ++i) {
    std::vector<double> img(size);
    for (std::size_t p = 0; p < size; ++p)
      img[p] = static_cast<unsigned char>(ib[header + static_cast<std::size_t>(i) * size + p]) / 255.0;
    d.images.push_back(std::move(img));
    d.labels.push_back(static_cast<unsigned char>(lb[8 + static_cast<std::size_t>(i)]));
  }
  return d;
}

// --- npy ---------------------------------------------------------------------------

NpyArray parse_npy(const std::string& b) {
  if (b.size() < 10 || b.compare(0, 6, "\x93NUMPY") != 0) throw DatasetError("not a .npy array");
  const auto major = static_cast<unsigned char>(b[6]);
  std::size_t hlen = 0, start = 0;
  if (major == 1) {
    hlen = le<std::uint16_t>(b, 8);
    start = 10;
  } else if (major == 2 || major == 3) {
    hlen = le<std::uint32_t>(b, 8);
    start = 12;
  } else {
    throw DatasetError(".npy version " + std::to_string(major) + " not supported");
  }
  if (start + hlen > b.size()) throw DatasetError("truncated .npy header");
  const std::string header = b.substr(start, hlen);
  auto field = [&](const std::string& key) {
    auto k = header.find("'" + key + "'");
    if (k == std::string::npos) throw DatasetError(".npy header lacks '" + key + "'");
    auto colon = header.find(':', k);
    return header.substr(colon + 1);
  };
  NpyArray a;
  {
    std::string rest = field("descr");
    auto q1 = rest.find('\'');
    auto q2 = rest.find('\'', q1 + 1);
    a.dtype = rest.substr(q1 + 1, q2 - q1 - 1);
  }
  {
    std::string rest = field("fortran_order");
    rest.erase(0, rest.find_first_not_of(' '));
    if (rest.rfind("True", 0) == 0) throw DatasetError(".npy arrays in Fortran order are not supported");
  }
  {
    std::string rest = field("shape");
    auto open = rest.find('(');
    auto close = rest.find(')');
    std::string dims = rest.substr(open + 1, close - open - 1);
    std::istringstream s(dims);
    std::string tok;
    while (std::getline(s, tok, ',')) {
      tok.erase(std::remove(tok.begin(), tok.end(), ' '), tok.end());
      if (tok.empty()) continue;
      a.shape.push_back(std::stoll(tok));
    }
  }
  std::int64_t count = 1;
  for (auto d : a.shape) count *= d;
  if (a.dtype.size() < 3 || a.dtype[0] == '>')
    throw DatasetError(".npy dtype '" + a.dtype + "' not supported (little-endian only)");
  const char kind = a.dtype[1];
  const int width = std::stoi(a.dtype.substr(2));
  const std::size_t data = start + hlen;
  if (b.size() < data + static_cast<std::size_t>(count) * static_cast<std::size_t>(width))
    throw DatasetError("truncated .npy data");
  a.values.resize(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const std::size_t p = data + i * static_cast<std::size_t>(width);
    double v = 0;
    if (kind == 'f' && width == 4) v = std::bit_cast<float>(le<std::uint32_t>(b, p));
    else if (kind == 'f' && width == 8) v = std::bit_cast<double>(le<std::uint64_t>(b, p));
    else if ((kind == 'u' || kind == 'b') && width == 1) v = static_cast<unsigned char>(b[p]);
    else if (kind == 'u' && width == 2) v = le<std::uint16_t>(b, p);
    else if (kind == 'u' && width == 4) v = le<std::uint32_t>(b, p);
    else if (kind == 'u' && width == 8) v = static_cast<double>(le<std::uint64_t>(b, p));
    else if (kind == 'i' && width == 1) v = static_cast<signed char>(b[p]);
    else if (kind == 'i' && width == 2) v = static_cast<std::int16_t>(le<std::uint16_t>(b, p));
    else if (kind == 'i' && width == 4) v = static_cast<std::int32_t>(le<std::uint32_t>(b, p));
    else if (kind == 'i' && width == 8) v = static_cast<double>(static_cast<std::int64_t>(le<std::uint64_t>(b, p)));
    else throw DatasetError(".npy dtype '" + a.dtype + "' not supported");
    a.values[i] = v;
  }
  return a;
}

std::string encode_npy(const NpyArray& a) {
  const bool integral = !a.dtype.empty() && a.dtype.find_first_of("iub") != std::string::npos;
  std::string header = std::string("{'descr': '") + (integral ? "<i8" : "<f8") +
                       "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < a.shape.size(); ++i) {
    header += std::to_string(a.shape[i]);
    if (i + 1 < a.shape.size() || a.shape.size() == 1) header += ",";
    if (i + 1 < a.shape.size()) header += " ";
  }
  header += "), }";
  // Pad so that the data starts at a multiple of 64.
  while ((10 + header.size() + 1) % 64 != 0) header += ' ';
  header += '\n';
  std::string out = "\x93NUMPY";
  out += '\x01';
  out += '\x00';
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(header.size()));
  out += header;
  for (double v : a.values) {
    if (integral) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(static_cast<std::int64_t>(v)));
    else put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

// --- npz -----------------------------------------------------------------------------

namespace {

struct ZipEntry {
  std::string name;
  std::uint16_t method = 0;
  std::uint32_t crc = 0;
  std::uint64_t compressed = 0;
  std::uint64_t size = 0;
  std::uint64_t local_offset = 0;
};

std::vector<ZipEntry> zip_directory(const std::string& b) {
  if (b.size() < 22) throw DatasetError("archive too small");
  std::size_t eocd = std::string::npos;
  const std::size_t floor = b.size() > 22 + 65535 ? b.size() - 22 - 65535 : 0;
  for (std::size_t p = b.size() - 22 + 1; p-- > floor;)
    if (le<std::uint32_t>(b, p) == 0x06054b50) {
      eocd = p;
      break;
    }
  if (eocd == std::string::npos) throw DatasetError("zip end-of-directory record not found");
  std::uint64_t count = le<std::uint16_t>(b, eocd + 10);
  std::uint64_t cd = le<std::uint32_t>(b, eocd + 16);
  if ((count == 0xffff || cd == 0xffffffff) && eocd >= 20 &&
      le<std::uint32_t>(b, eocd - 20) == 0x07064b50) {
    std::uint64_t z64 = le<std::uint64_t>(b, eocd - 20 + 8);
    if (le<std::uint32_t>(b, static_cast<std::size_t>(z64)) != 0x06064b50)
      throw DatasetError("bad zip64 end-of-directory record");
    count = le<std::uint64_t>(b, static_cast<std::size_t>(z64) + 32);
    cd = le<std::uint64_t>(b, static_cast<std::size_t>(z64) + 48);
  }
  std::vector<ZipEntry> entries;
  auto p = static_cast<std::size_t>(cd);
  for (std::uint64_t i = 0; i < count; ++i) {
    if (le<std::uint32_t>(b, p) != 0x02014b50) throw DatasetError("bad zip central directory");
    ZipEntry e;
    e.method = le<std::uint16_t>(b, p + 10);
    e.crc = le<std::uint32_t>(b, p + 16);
    e.compressed = le<std::uint32_t>(b, p + 20);
    e.size = le<std::uint32_t>(b, p + 24);
    const std::size_t name_len = le<std::uint16_t>(b, p + 28);
    const std::size_t extra_len = le<std::uint16_t>(b, p + 30);
    const std::size_t comment_len = le<std::uint16_t>(b, p + 32);
    e.local_offset = le<std::uint32_t>(b, p + 42);
    if (p + 46 + name_len > b.size()) throw DatasetError("truncated zip central directory");
    e.name = b.substr(p + 46, name_len);
    // zip64 extended information replaces saturated fields, in order.
    std::size_t x = p + 46 + name_len;
    const std::size_t xend = x + extra_len;
    while (x + 4 <= xend) {
      const std::uint16_t id = le<std::uint16_t>(b, x);
      const std::uint16_t len = le<std::uint16_t>(b, x + 2);
      if (id == 0x0001) {
        std::size_t q = x + 4;
        if (e.size == 0xffffffff) { e.size = le<std::uint64_t>(b, q); q += 8; }
        if (e.compressed == 0xffffffff) { e.compressed = le<std::uint64_t>(b, q); q += 8; }
        if (e.local_offset == 0xffffffff) e.local_offset = le<std::uint64_t>(b, q);
      }
      x += 4 + len;
    }
    entries.push_back(std::move(e));
    p = xend + comment_len;
  }
  return entries;
}

std::string zip_extract(const std::string& b, const ZipEntry& e) {
  const auto lh = static_cast<std::size_t>(e.local_offset);
  if (le<std::uint32_t>(b, lh) != 0x04034b50) throw DatasetError("bad zip local header for " + e.name);
  const std::size_t data = lh + 30 + le<std::uint16_t>(b, lh + 26) + le<std::uint16_t>(b, lh + 28);
  if (data + e.compressed > b.size()) throw DatasetError("truncated zip member " + e.name);
  std::string out;
  if (e.method == 0) {
    out = b.substr(data, static_cast<std::size_t>(e.compressed));
  } else if (e.method == 8) {
    out.resize(static_cast<std::size_t>(e.size));
    z_stream zs{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw DatasetError("inflate init failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(b.data() + data));
    zs.avail_in = static_cast<uInt>(e.compressed);
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.total_out != e.size)
      throw DatasetError("corrupt deflate data in " + e.name);
  } else {
    throw DatasetError("zip member " + e.name + " uses unsupported method " + std::to_string(e.method));
  }
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(out.data()), static_cast<uInt>(out.size()));
  if (crc != e.crc) throw DatasetError("CRC mismatch in " + e.name);
  return out;
}

}  // namespace

Dataset load_npz(const std::filesystem::path& path) {
  const std::string b = read_file(path);
  std::optional<NpyArray> images, labels;
  for (const auto& e : zip_directory(b)) {
    if (e.name == "images.npy") images = parse_npy(zip_extract(b, e));
    else if (e.name == "labels.npy") labels = parse_npy(zip_extract(b, e));
  }
  if (!images || !labels) throw DatasetError(path.string() + ": needs 'images' and 'labels' arrays");
  if (images->shape.size() < 2) throw DatasetError(path.string() + ": images must have rank >= 2");
  if (labels->shape.size() != 1 || labels->shape[0] != images->shape[0])
    throw DatasetError(path.string() + ": labels must have shape (N,)");
  Dataset d;
  d.shape = shape_from_dims(std::span(images->shape).subspan(1), path.string());
  const double scale = images->dtype.find('u') != std::string::npos &&
                               images->dtype.back() == '1' ? 1.0 / 255.0 : 1.0;
  const auto size = static_cast<std::size_t>(d.shape.size());
  for (std::int64_t i = 0; i < images->shape[0]; ++i) {
    auto first = images->values.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(i) * size);
    std::vector<double> img(first, first + static_cast<std::ptrdiff_t>(size));
    for (double& x : img) x *= scale;
    check_range(img, path.string());
    d.images.push_back(std::move(img));
    const double l = labels->values[static_cast<std::size_t>(i)];
    if (l != static_cast<std::int32_t>(l)) throw DatasetError(path.string() + ": non-integer label");
    d.labels.push_back(static_cast<std::int32_t>(l));
  }
  return d;
}

void write_npz(const std::filesystem::path& path,
               const std::vector<std::pair<std::string, NpyArray>>& arrays) {
  std::string out, central;
  std::uint16_t count = 0;
  for (const auto& [name, array] : arrays) {
    const std::string data = encode_npy(array);
    const std::string fname = name + ".npy";
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
    const auto offset = static_cast<std::uint32_t>(out.size());
    const auto size = static_cast<std::uint32_t>(data.size());
    put_le<std::uint32_t>(out, 0x04034b50);
    put_le<std::uint16_t>(out, 20);
    put_le<std::uint16_t>(out, 0);
    put_le<std::uint16_t>(out, 0);  // stored
    put_le<std::uint16_t>(out, 0);
    put_le<std::uint16_t>(out, 0x21);
    put_le<std::uint32_t>(out, crc);
    put_le<std::uint32_t>(out, size);
    put_le<std::uint32_t>(out, size);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(fname.size()));
    put_le<std::uint16_t>(out, 0);
    out += fname;
    out += data;

    put_le<std::uint32_t>(central, 0x02014b50);
    put_le<std::uint16_t>(central, 20);
    put_le<std::uint16_t>(central, 20);
    put_le<std::uint16_t>(central, 0);
    put_le<std::uint16_t>(central, 0);
    put_le<std::uint16_t>(central, 0);
    put_le<std::uint16_t>(central, 0x21);
    put_le<std::uint32_t>(central, crc);
    put_le<std::uint32_t>(central, size);
    put_le<std::uint32_t>(central, size);
    put_le<std::uint16_t>(central, static_cast<std::uint16_t>(fname.size()));
    put_le<std::uint16_t>(central, 0);
    put_le<std::uint16_t>(central, 0);
    put_le<std::uint16_t>(central, 0);
    put_le<std::uint16_t>(central, 0);
    put_le<std::uint32_t>(central, 0);
    put_le<std::uint32_t>(central, offset);
    central += fname;
    ++count;
  }
  const auto cd_offset = static_cast<std::uint32_t>(out.size());
  out += central;
  put_le<std::uint32_t>(out, 0x06054b50);
  put_le<std::uint16_t>(out, 0);
  put_le<std::uint16_t>(out, 0);
  put_le<std::uint16_t>(out, count);
  put_le<std::uint16_t>(out, count);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(central.size()));
  put_le<std::uint32_t>(out, cd_offset);
  put_le<std::uint16_t>(out, 0);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DatasetError("cannot write " + path.string());
  f << out;
}

Dataset load_dataset(const std::filesystem::path& path) {
  if (path.extension() == ".npz") return load_npz(path);
  std::string name = path.filename().string();
  auto pos = name.find("images");
  if (pos == std::string::npos)
    throw DatasetError(path.string() + ": expected a .npz archive or an IDX file named '*images*'");
  name.replace(pos, 6, "labels");
  if (auto idx = name.find("idx3"); idx != std::string::npos) name.replace(idx, 4, "idx1");
  if (auto idx = name.find("idx4"); idx != std::string::npos) name.replace(idx, 4, "idx1");
  return load_idx(path, path.parent_path() / name);
}

// --- single images -------------------------------------------------------------------

namespace {

void flatten(const nlohmann::json& j, std::vector<double>& out) {
  if (j.is_array()) {
    for (const auto& e : j) flatten(e, out);
  } else if (j.is_number()) {
    out.push_back(j.get<double>());
  } else {
    throw DatasetError("image JSON: expected numbers or nested arrays");
  }
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  Image img;
  if (path.extension() == ".npy") {
    NpyArray a = parse_npy(read_file(path));
    const bool bytes = a.dtype.find('u') != std::string::npos && a.dtype.back() == '1';
    img.pixels = std::move(a.values);
    if (bytes)
      for (double& x : img.pixels) x /= 255.0;
  } else {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(path.string() + ": " + e.what());
    }
    if (j.is_object()) {
      if (!j.contains("pixels")) throw DatasetError(path.string() + ": missing 'pixels'");
      flatten(j["pixels"], img.pixels);
      if (j.contains("label")) img.label = j["label"].get<std::int32_t>();
    } else {
      flatten(j, img.pixels);
    }
  }
  check_range(img.pixels, path.string());
  return img;
}

}  // namespace eev
