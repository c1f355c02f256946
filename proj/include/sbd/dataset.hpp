#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sbd/common.hpp"

namespace sbd {

/// One named tensor inside a dataset container. Complex data is stored as
/// interleaved (re, im) doubles; shape describes the logical element grid.
struct DatasetRecord {
  enum class DType : std::uint8_t { kF64 = 0, kC128 = 1 };

  std::string name;
  DType dtype = DType::kF64;
  std::vector<std::uint64_t> shape;
  Vec data;  // kF64: prod(shape) values; kC128: 2 * prod(shape) interleaved

  std::uint64_t element_count() const;
  CVec as_complex() const;

  static DatasetRecord real(std::string name, const Vec& values);
  static DatasetRecord complex(std::string name, const CVec& values);
};

/// Writes the versioned binary container plus a "<path>.meta" text sidecar of
/// "key = value" lines (generator config, seed, split label).
void save_dataset(const std::string& path, const std::vector<DatasetRecord>& records,
                  const std::map<std::string, std::string>& sidecar = {});

/// Loads all records; FormatError on magic/version mismatch, IoError with the
/// failing byte offset on truncation. No partial data is returned.
std::vector<DatasetRecord> load_dataset(const std::string& path);

std::map<std::string, std::string> load_sidecar(const std::string& path);

/// Convenience split enforcement: loads the container and checks its sidecar
/// "split" label. Mismatch raises FormatError.
std::vector<DatasetRecord> load_dataset_checked(const std::string& path,
                                                const std::string& expected_split);

}  // namespace sbd
