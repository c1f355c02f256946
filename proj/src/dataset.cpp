#include "sbd/dataset.hpp"

#include <cstring>
#include <fstream>

namespace sbd {

namespace {

constexpr char kMagic[4] = {'S', 'B', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::string& path) : f_(path, std::ios::binary), path_(path) {
    if (!f_) throw IoError("save_dataset: cannot open " + path);
  }
  void bytes(const void* p, size_t n) {
    f_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!f_) throw IoError("save_dataset: write failed for " + path_);
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    bytes(b, 8);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }

 private:
  std::ofstream f_;
  std::string path_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : f_(path, std::ios::binary), path_(path) {
    if (!f_) throw IoError("load_dataset: cannot open " + path);
  }
  void bytes(void* p, size_t n) {
    f_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!f_)
      throw IoError("load_dataset: truncated at byte offset " + std::to_string(offset_) + " in " +
                    path_);
    offset_ += n;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

 private:
  std::ifstream f_;
  std::string path_;
  std::uint64_t offset_ = 0;
};

}  // namespace

std::uint64_t DatasetRecord::element_count() const {
  std::uint64_t n = 1;
  for (std::uint64_t d : shape) n *= d;
  return n;
}

CVec DatasetRecord::as_complex() const {
  if (dtype != DType::kC128) throw FormatError("DatasetRecord: not complex data");
  const Eigen::Index n = data.size() / 2;
  CVec z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = {data[2 * i], data[2 * i + 1]};
  return z;
}

DatasetRecord DatasetRecord::real(std::string name, const Vec& values) {
  DatasetRecord r;
  r.name = std::move(name);
  r.dtype = DType::kF64;
  r.shape = {static_cast<std::uint64_t>(values.size())};
  r.data = values;
  return r;
}

DatasetRecord DatasetRecord::complex(std::string name, const CVec& values) {
  DatasetRecord r;
  r.name = std::move(name);
  r.dtype = DType::kC128;
  r.shape = {static_cast<std::uint64_t>(values.size())};
  r.data.resize(2 * values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    r.data[2 * i] = values[i].real();
    r.data[2 * i + 1] = values[i].imag();
  }
  return r;
}

void save_dataset(const std::string& path, const std::vector<DatasetRecord>& records,
                  const std::map<std::string, std::string>& sidecar) {
  Writer w(path);
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.u64(records.size());
  for (const DatasetRecord& r : records) {
    const std::uint64_t values =
        r.element_count() * (r.dtype == DatasetRecord::DType::kC128 ? 2 : 1);
    if (static_cast<std::uint64_t>(r.data.size()) != values)
      throw FormatError("save_dataset: record '" + r.name + "' shape/data mismatch");
    w.u32(static_cast<std::uint32_t>(r.name.size()));
    w.bytes(r.name.data(), r.name.size());
    w.u8(static_cast<std::uint8_t>(r.dtype));
    w.u8(static_cast<std::uint8_t>(r.shape.size()));
    for (std::uint64_t d : r.shape) w.u64(d);
    for (Eigen::Index i = 0; i < r.data.size(); ++i) w.f64(r.data[i]);
  }
  if (!sidecar.empty()) {
    std::ofstream meta(path + ".meta");
    if (!meta) throw IoError("save_dataset: cannot open sidecar for " + path);
    for (const auto& [k, v] : sidecar) meta << k << " = " << v << "\n";
  }
}

std::vector<DatasetRecord> load_dataset(const std::string& path) {
  Reader rd(path);
  char magic[4];
  rd.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("load_dataset: bad magic in " + path);
  const std::uint32_t version = rd.u32();
  if (version != kVersion)
    throw FormatError("load_dataset: unsupported version " + std::to_string(version));
  const std::uint64_t count = rd.u64();
  std::vector<DatasetRecord> records;
  records.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    DatasetRecord r;
    const std::uint32_t name_len = rd.u32();
    r.name.resize(name_len);
    if (name_len > 0) rd.bytes(r.name.data(), name_len);
    const std::uint8_t dtype = rd.u8();
    if (dtype > 1) throw FormatError("load_dataset: unknown dtype");
    r.dtype = static_cast<DatasetRecord::DType>(dtype);
    const std::uint8_t ndim = rd.u8();
    r.shape.resize(ndim);
    for (int i = 0; i < ndim; ++i) r.shape[i] = rd.u64();
    const std::uint64_t values =
        r.element_count() * (r.dtype == DatasetRecord::DType::kC128 ? 2 : 1);
    r.data.resize(static_cast<Eigen::Index>(values));
    for (std::uint64_t i = 0; i < values; ++i) r.data[static_cast<Eigen::Index>(i)] = rd.f64();
    records.push_back(std::move(r));
  }
  return records;
}

std::map<std::string, std::string> load_sidecar(const std::string& path) {
  std::ifstream meta(path + ".meta");
  if (!meta) throw IoError("load_sidecar: cannot open sidecar for " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return kv;
}

std::vector<DatasetRecord> load_dataset_checked(const std::string& path,
                                                const std::string& expected_split) {
  const auto sidecar = load_sidecar(path);
  const auto it = sidecar.find("split");
  if (it == sidecar.end() || it->second != expected_split)
    throw FormatError("load_dataset_checked: split label mismatch for " + path + " (want " +
                      expected_split + ")");
  return load_dataset(path);
}

}  // namespace sbd
