#include "ppfl/snapshot.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

namespace ppfl::snapshot {

using numkit::BlockShape;
using numkit::Matrix;
using numkit::ParamVector;

namespace {

constexpr char kMagic[8] = {'P', 'F', 'S', 'N', 'A', 'P', '1', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw FormatError("snapshot: cannot open " + path + " for writing");
  }

  void u32(std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    bytes(b, 4);
  }

  void f64(double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    bytes(b, 8);
  }

  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(reinterpret_cast<const unsigned char*>(s.data()), s.size());
  }

  void bytes(const unsigned char* p, std::size_t n) {
    out_.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw FormatError("snapshot: write failed");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw FormatError("snapshot: cannot open " + path);
  }

  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }

  double f64() {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
  }

  std::string str() {
    const std::uint32_t n = u32();
    std::string s(n, '\0');
    if (n) bytes(reinterpret_cast<unsigned char*>(s.data()), n);
    return s;
  }

  void bytes(unsigned char* p, std::size_t n) {
    in_.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError("snapshot: " + path_ + " truncated at byte offset " +
                        std::to_string(offset_ + static_cast<std::size_t>(std::max<std::streamsize>(in_.gcount(), 0))));
    }
    offset_ += n;
  }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t offset_ = 0;
};

struct NamedArray {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<double> data;
};

void write_array(Writer& w, const std::string& name, std::uint32_t rows, std::uint32_t cols,
                 const double* data) {
  w.str(name);
  w.u32(rows);
  w.u32(cols);
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  for (std::size_t i = 0; i < n; ++i) w.f64(data[i]);
}

// Block shapes ride along as a k x 2 array so ParamVectors reload with their
// structure intact.
std::vector<double> shapes_as_doubles(const ParamVector& v) {
  std::vector<double> out;
  out.reserve(v.shapes.size() * 2);
  for (const BlockShape& s : v.shapes) {
    out.push_back(static_cast<double>(s.rows));
    out.push_back(static_cast<double>(s.cols));
  }
  return out;
}

ParamVector rebuild_param(const NamedArray& values, const NamedArray& shape_arr) {
  std::vector<BlockShape> shapes;
  for (std::uint32_t i = 0; i < shape_arr.rows; ++i) {
    shapes.push_back({static_cast<int>(shape_arr.data[2 * i]),
                      static_cast<int>(shape_arr.data[2 * i + 1])});
  }
  return ParamVector(values.data, shapes);
}

Matrix rebuild_matrix(const NamedArray& a) {
  Matrix m(static_cast<int>(a.rows), static_cast<int>(a.cols));
  for (std::size_t i = 0; i < a.data.size(); ++i) m.data[i] = a.data[i];
  return m;
}

}  // namespace

void save_round(const std::string& path, const RoundSnapshot& snap) {
  Writer w(path);
  w.bytes(reinterpret_cast<const unsigned char*>(kMagic), 8);
  w.u32(kVersion);

  const auto prev_shapes = shapes_as_doubles(snap.w_prev);
  const auto up_shapes = shapes_as_doubles(snap.w_upload);
  w.u32(7);
  write_array(w, "w_prev", 1, static_cast<std::uint32_t>(snap.w_prev.size()),
              snap.w_prev.data.data());
  write_array(w, "w_prev_shapes", static_cast<std::uint32_t>(prev_shapes.size() / 2), 2,
              prev_shapes.data());
  write_array(w, "w_upload", 1, static_cast<std::uint32_t>(snap.w_upload.size()),
              snap.w_upload.data.data());
  write_array(w, "w_upload_shapes", static_cast<std::uint32_t>(up_shapes.size() / 2), 2,
              up_shapes.data());
  write_array(w, "eta", 1, 1, &snap.eta);
  write_array(w, "batch_inputs", static_cast<std::uint32_t>(snap.batch.inputs.rows),
              static_cast<std::uint32_t>(snap.batch.inputs.cols), snap.batch.inputs.data.data());
  write_array(w, "batch_labels", static_cast<std::uint32_t>(snap.batch.labels.rows),
              static_cast<std::uint32_t>(snap.batch.labels.cols), snap.batch.labels.data.data());

  w.u32(static_cast<std::uint32_t>(snap.meta.size()));
  for (const auto& [k, v] : snap.meta) {
    w.str(k);
    w.str(v);
  }
}

RoundSnapshot load_round(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.bytes(reinterpret_cast<unsigned char*>(magic), 8);
  if (std::memcmp(magic, kMagic, 8) != 0) {
    throw FormatError("snapshot: " + path + " does not start with the PFSNAP1 magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw FormatError("snapshot: " + path + " has version " + std::to_string(version) +
                      ", this reader supports version " + std::to_string(kVersion));
  }

  std::map<std::string, NamedArray> arrays;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    NamedArray a;
    a.rows = r.u32();
    a.cols = r.u32();
    a.data.resize(static_cast<std::size_t>(a.rows) * a.cols);
    for (double& v : a.data) v = r.f64();
    arrays[name] = std::move(a);
  }

  for (const char* required : {"w_prev", "w_prev_shapes", "w_upload", "w_upload_shapes", "eta",
                               "batch_inputs", "batch_labels"}) {
    if (!arrays.count(required)) {
      throw FormatError("snapshot: " + path + " is missing the '" + required + "' array");
    }
  }

  RoundSnapshot snap;
  snap.w_prev = rebuild_param(arrays["w_prev"], arrays["w_prev_shapes"]);
  snap.w_upload = rebuild_param(arrays["w_upload"], arrays["w_upload_shapes"]);
  snap.eta = arrays["eta"].data.at(0);
  snap.batch.inputs = rebuild_matrix(arrays["batch_inputs"]);
  snap.batch.labels = rebuild_matrix(arrays["batch_labels"]);

  const std::uint32_t meta_count = r.u32();
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    std::string k = r.str();
    std::string v = r.str();
    snap.meta.emplace_back(std::move(k), std::move(v));
  }
  return snap;
}

}  // namespace ppfl::snapshot
