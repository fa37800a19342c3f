#ifndef NOETHER_IDX_HPP
#define NOETHER_IDX_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "noether/loss.hpp"

namespace noether {

/// An unsigned-byte IDX tensor: big-endian header (0x00 0x00 0x08 ndim),
/// ndim big-endian u32 dims, row-major payload.
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  std::size_t records() const { return dims.empty() ? 0 : dims[0]; }
  /// Bytes per record (product of the trailing dims).
  std::size_t record_size() const;
};

/// Parses an IDX stream held in memory. `limit` keeps the first N records.
IdxArray parse_idx(const std::vector<std::uint8_t>& bytes,
                   std::optional<std::size_t> limit = std::nullopt);

/// Reads an IDX file, gzip-compressed or plain.
IdxArray load_idx(const std::string& path, std::optional<std::size_t> limit = std::nullopt);

std::vector<std::uint8_t> serialize_idx(const IdxArray& a);
void write_idx(const std::string& path, const IdxArray& a);

/// One row per record, pixel values scaled to [0, 1].
Matrix<double> idx_images(const IdxArray& a);

/// Class indices of a 1-D label array.
std::vector<int> idx_labels(const IdxArray& a);

/// Images and labels as a classification set (first `limit` records).
std::shared_ptr<Dataset<double>> load_idx_dataset(const std::string& images,
                                                  const std::string& labels,
                                                  std::optional<std::size_t> limit);

}  // namespace noether

#endif  // NOETHER_IDX_HPP
