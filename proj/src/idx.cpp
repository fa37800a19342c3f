#include "noether/idx.hpp"

#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <memory>

namespace noether {

namespace {

constexpr std::uint8_t kUnsignedByte = 0x08;

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

// Byte source over either a memory buffer or a gzip/plain file.
class Source {
 public:
  virtual ~Source() = default;
  // Reads up to n bytes; returns the count actually read.
  virtual std::size_t read(std::uint8_t* dst, std::size_t n) = 0;
};

class MemorySource : public Source {
 public:
  explicit MemorySource(const std::vector<std::uint8_t>& b) : bytes_(b) {}
  std::size_t read(std::uint8_t* dst, std::size_t n) override {
    const std::size_t k = std::min(n, bytes_.size() - pos_);
    std::copy_n(bytes_.data() + pos_, k, dst);
    pos_ += k;
    return k;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

class GzSource : public Source {
 public:
  explicit GzSource(const std::string& path) : file_(gzopen(path.c_str(), "rb")) {
    if (!file_) throw InputError("cannot open '" + path + "'");
  }
  ~GzSource() override { gzclose(file_); }
  GzSource(const GzSource&) = delete;
  GzSource& operator=(const GzSource&) = delete;

  std::size_t read(std::uint8_t* dst, std::size_t n) override {
    std::size_t total = 0;
    while (total < n) {
      const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n - total, 1u << 30));
      const int got = gzread(file_, dst + total, chunk);
      if (got < 0) {
        int err = 0;
        throw FormatError(std::string("decompression failed: ") + gzerror(file_, &err), total);
      }
      if (got == 0) break;
      total += static_cast<std::size_t>(got);
    }
    return total;
  }

 private:
  gzFile file_;
};

IdxArray parse(Source& src, std::optional<std::size_t> limit) {
  std::uint64_t offset = 0;
  auto read_exact = [&](std::uint8_t* dst, std::size_t n, const char* what) {
    const std::size_t got = src.read(dst, n);
    if (got != n) throw FormatError(std::string("truncated ") + what, offset + got);
    offset += n;
  };

  std::uint8_t magic[4];
  read_exact(magic, 4, "magic number");
  if (magic[0] != 0 || magic[1] != 0) throw FormatError("bad IDX magic number", 0);
  if (magic[2] != kUnsignedByte)
    throw FormatError("unsupported IDX element type " + std::to_string(magic[2]), 2);
  if (magic[3] == 0) throw FormatError("IDX tensor has no dimensions", 3);

  IdxArray a;
  a.dims.resize(magic[3]);
  for (auto& d : a.dims) {
    std::uint8_t b[4];
    read_exact(b, 4, "dimension header");
    d = read_be32(b);
  }
  if (limit && *limit < a.dims[0]) a.dims[0] = static_cast<std::uint32_t>(*limit);

  const std::size_t bytes = a.records() * a.record_size();
  a.data.resize(bytes);
  read_exact(a.data.data(), bytes, "payload");
  return a;
}

}  // namespace

std::size_t IdxArray::record_size() const {
  std::size_t n = 1;
  for (std::size_t i = 1; i < dims.size(); ++i) n *= dims[i];
  return n;
}

IdxArray parse_idx(const std::vector<std::uint8_t>& bytes, std::optional<std::size_t> limit) {
  MemorySource src(bytes);
  return parse(src, limit);
}

IdxArray load_idx(const std::string& path, std::optional<std::size_t> limit) {
  GzSource src(path);
  return parse(src, limit);
}

std::vector<std::uint8_t> serialize_idx(const IdxArray& a) {
  if (a.dims.empty() || a.dims.size() > 255) throw InputError("IDX needs 1..255 dimensions");
  if (a.data.size() != a.records() * a.record_size())
    throw InputError("IDX payload size does not match dims");
  std::vector<std::uint8_t> out = {0, 0, kUnsignedByte, static_cast<std::uint8_t>(a.dims.size())};
  for (auto d : a.dims) put_be32(out, d);
  out.insert(out.end(), a.data.begin(), a.data.end());
  return out;
}

void write_idx(const std::string& path, const IdxArray& a) {
  const auto bytes = serialize_idx(a);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write '" + path + "'");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw InputError("write failed for '" + path + "'");
}

Matrix<double> idx_images(const IdxArray& a) {
  const auto n = static_cast<Index>(a.records());
  const auto m = static_cast<Index>(a.record_size());
  Matrix<double> out(n, m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j)
      out(i, j) = a.data[static_cast<std::size_t>(i * m + j)] / 255.0;
  return out;
}

std::vector<int> idx_labels(const IdxArray& a) {
  if (a.dims.size() != 1) throw InputError("label array must be 1-D");
  return {a.data.begin(), a.data.end()};
}

std::shared_ptr<Dataset<double>> load_idx_dataset(const std::string& images,
                                                  const std::string& labels,
                                                  std::optional<std::size_t> limit) {
  const IdxArray img = load_idx(images, limit);
  const IdxArray lab = load_idx(labels, limit);
  if (img.records() != lab.records())
    throw InputError("image and label files hold different record counts");
  auto data = std::make_shared<Dataset<double>>();
  data->inputs = idx_images(img);
  data->labels = idx_labels(lab);
  data->provenance = images + " + " + labels;
  return data;
}

}  // namespace noether
