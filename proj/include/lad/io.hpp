#pragma once

// File formats.
//
// Cube files: a JSON header plus a raw little-endian payload, band
// interleaved by pixel. Header keys:
//   format      "lad-cube"          (magic)
//   version     1
//   dims        [rows, cols] or [depth, rows, cols]
//   bands       m
//   dtype       "f64" | "f32" | "u16"
//   layout      "bip"
//   byte_order  "little"
//   payload     payload file name, relative to the header's directory
//   band_labels [m strings]
//   provenance  free-form object
// Payload size is exactly pixels * bands * sizeof(dtype).
//
// Model files: the same header/payload split with format "lad-model"; every
// matrix is stored as row-major f64 in the payload and indexed by the
// header's "arrays" table ({offset, rows, cols} in elements).
//
// Masks: binary PGM ("P5"), 8-bit, 0 for background and 255 for anomalous.
// 3D masks stack depth slices vertically and record their extents in a
// "# dims D R C" comment.

#include "lad/eval.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace lad::io {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

enum class DType { f64, f32, u16 };

inline const char* to_string(DType d) {
  switch (d) {
    case DType::f64: return "f64";
    case DType::f32: return "f32";
    case DType::u16: return "u16";
  }
  return "?";
}

inline DType parse_dtype(const std::string& s) {
  if (s == "f64") return DType::f64;
  if (s == "f32") return DType::f32;
  if (s == "u16") return DType::u16;
  throw Error(ErrorCode::format, "unknown dtype", {{"dtype", s}});
}

inline std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::f64: return 8;
    case DType::f32: return 4;
    case DType::u16: return 2;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Byte-level helpers
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
T byteswap(T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  std::reverse(bytes, bytes + sizeof(T));
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

template <class T>
void put_le(std::string& out, T value) {
  if constexpr (std::endian::native == std::endian::big) value = byteswap(value);
  const auto* p = reinterpret_cast<const char*>(&value);
  out.append(p, sizeof(T));
}

template <class T>
T get_le(const char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) value = byteswap(value);
  return value;
}

template <class T>
T get_be(const char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::little) value = byteswap(value);
  return value;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open file for reading", {{"path", path.string()}});
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline json parse_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::format, std::string("malformed JSON header: ") + e.what(), {{"path", path.string()}});
  }
}

/// Path of the payload that belongs to a header path.
inline fs::path payload_path_for(const fs::path& header, const char* extension) {
  fs::path out = header;
  if (out.extension() == ".json") out.replace_extension(extension);
  else out += extension;
  return out;
}

template <class T>
T require(const json& header, const char* key, const fs::path& path) {
  if (!header.contains(key)) throw Error(ErrorCode::format, std::string("header is missing key '") + key + "'", {{"path", path.string()}});
  try {
    return header.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::format, std::string("header key '") + key + "' has the wrong type", {{"path", path.string()}});
  }
}

}  // namespace detail

/// Writes `contents` to a temporary sibling and renames it over `path`.
inline void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot open file for writing", {{"path", tmp.string()}});
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::io, "write failed", {{"path", tmp.string()}});
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::io, "cannot rename temporary file", {{"path", path.string()}, {"reason", ec.message()}});
}

inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Cubes
// ---------------------------------------------------------------------------

inline void write_cube(const ImageCube& cube, const fs::path& path, DType dtype = DType::f64,
                       const json& provenance = json::object()) {
  const fs::path payload = detail::payload_path_for(path, ".raw");
  std::string bytes;
  bytes.reserve(cube.data().size() * dtype_size(dtype));
  for (std::size_t k = 0; k < cube.data().size(); ++k) {
    const double v = cube.data()[k];
    switch (dtype) {
      case DType::f64: detail::put_le(bytes, v); break;
      case DType::f32: detail::put_le(bytes, static_cast<float>(v)); break;
      case DType::u16:
        if (v < 0.0 || v > 65535.0 || v != std::floor(v)) {
          throw Error(ErrorCode::format, "value cannot be stored as u16",
                      {{"pixel", std::to_string(k / cube.bands())}, {"value", std::to_string(v)}});
        }
        detail::put_le(bytes, static_cast<std::uint16_t>(v));
        break;
    }
  }
  json header;
  header["format"] = "lad-cube";
  header["version"] = 1;
  header["dims"] = cube.dims();
  header["bands"] = cube.bands();
  header["dtype"] = to_string(dtype);
  header["layout"] = "bip";
  header["byte_order"] = "little";
  header["payload"] = payload.filename().string();
  header["band_labels"] = cube.band_labels();
  header["provenance"] = provenance;
  write_file_atomic(payload, bytes);
  write_file_atomic(path, dump_json(header));
}

struct CubeHeader {
  Dims dims;
  std::size_t bands = 0;
  DType dtype = DType::f64;
  std::vector<std::string> band_labels;
  json provenance = json::object();
  fs::path payload;
};

inline CubeHeader read_cube_header(const fs::path& path) {
  const json header = detail::parse_json(path);
  if (header.value("format", "") != "lad-cube") {
    throw Error(ErrorCode::format, "not a lad-cube header", {{"path", path.string()}});
  }
  CubeHeader out;
  out.dims = detail::require<Dims>(header, "dims", path);
  out.bands = detail::require<std::size_t>(header, "bands", path);
  out.dtype = parse_dtype(detail::require<std::string>(header, "dtype", path));
  if (header.value("layout", "bip") != "bip" || header.value("byte_order", "little") != "little") {
    throw Error(ErrorCode::format, "only little-endian band-interleaved-by-pixel payloads are supported",
                {{"path", path.string()}});
  }
  if (out.dims.size() != 2 && out.dims.size() != 3) throw Error(ErrorCode::format, "dims must have 2 or 3 entries", {{"path", path.string()}});
  for (auto d : out.dims) {
    if (d == 0) throw Error(ErrorCode::format, "header dims must be positive", {{"path", path.string()}});
  }
  if (out.bands == 0) throw Error(ErrorCode::format, "header bands must be positive", {{"path", path.string()}});
  if (header.contains("band_labels")) out.band_labels = header["band_labels"].get<std::vector<std::string>>();
  if (header.contains("provenance")) out.provenance = header["provenance"];
  out.payload = path.parent_path() / detail::require<std::string>(header, "payload", path);
  return out;
}

inline ImageCube read_cube(const fs::path& path) {
  const CubeHeader header = read_cube_header(path);
  const std::string bytes = detail::read_file(header.payload);
  const std::size_t count = pixel_count(header.dims) * header.bands;
  const std::size_t expected = count * dtype_size(header.dtype);
  if (bytes.size() != expected) {
    throw Error(ErrorCode::format, "payload size does not match the header",
                {{"path", header.payload.string()},
                 {"expected_bytes", std::to_string(expected)},
                 {"actual_bytes", std::to_string(bytes.size())}});
  }
  std::vector<double> data(count);
  const std::size_t step = dtype_size(header.dtype);
  for (std::size_t k = 0; k < count; ++k) {
    const char* p = bytes.data() + k * step;
    switch (header.dtype) {
      case DType::f64: data[k] = detail::get_le<double>(p); break;
      case DType::f32: data[k] = static_cast<double>(detail::get_le<float>(p)); break;
      case DType::u16: data[k] = static_cast<double>(detail::get_le<std::uint16_t>(p)); break;
    }
    if (!std::isfinite(data[k])) {
      throw Error(ErrorCode::non_finite, "cube payload contains a non-finite value",
                  {{"path", header.payload.string()}, {"pixel", std::to_string(k / header.bands)},
                   {"band", std::to_string(k % header.bands)}});
    }
  }
  return ImageCube(header.dims, header.bands, std::move(data), header.band_labels);
}

inline void write_scores(const ScoreMap& scores, const fs::path& path, const json& provenance = json::object()) {
  write_cube(ImageCube(scores.dims(), 1, scores.scores(), {"score"}), path, DType::f64, provenance);
}

inline ScoreMap read_scores(const fs::path& path) {
  const ImageCube cube = read_cube(path);
  if (cube.bands() != 1) throw Error(ErrorCode::format, "score files carry exactly one band", {{"path", path.string()}});
  return ScoreMap(cube.dims(), cube.data());
}

/// Integer class labels from a single-band cube.
inline std::vector<int> read_labels(const fs::path& path) {
  const ImageCube cube = read_cube(path);
  if (cube.bands() != 1) throw Error(ErrorCode::format, "label files carry exactly one band", {{"path", path.string()}});
  std::vector<int> labels(cube.pixels());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double v = cube.data()[i];
    if (v != std::round(v) || std::abs(v) > 1e9) {
      throw Error(ErrorCode::format, "label is not an integer", {{"pixel", std::to_string(i)}});
    }
    labels[i] = static_cast<int>(v);
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Band selection
// ---------------------------------------------------------------------------

/// The 20 AVIRIS water-absorption bands (1-based): 108-112, 154-167, 224.
inline std::vector<std::size_t> aviris_water_bands() {
  std::vector<std::size_t> out;
  for (std::size_t b = 108; b <= 112; ++b) out.push_back(b);
  for (std::size_t b = 154; b <= 167; ++b) out.push_back(b);
  out.push_back(224);
  return out;
}

/// Drops the listed 1-based bands, keeping the others in order.
inline ImageCube discard_bands(const ImageCube& cube, const std::vector<std::size_t>& one_based) {
  std::set<std::size_t> drop;
  for (auto b : one_based) {
    if (b < 1 || b > cube.bands()) {
      throw Error(ErrorCode::invalid_argument, "band index out of range (bands are 1-based)",
                  {{"band", std::to_string(b)}, {"bands", std::to_string(cube.bands())}});
    }
    drop.insert(b - 1);
  }
  if (drop.empty()) return cube;
  if (drop.size() == cube.bands()) throw Error(ErrorCode::invalid_argument, "cannot discard every band");

  std::vector<std::size_t> keep;
  for (std::size_t b = 0; b < cube.bands(); ++b) {
    if (!drop.count(b)) keep.push_back(b);
  }
  std::vector<double> data;
  data.reserve(cube.pixels() * keep.size());
  for (std::size_t i = 0; i < cube.pixels(); ++i) {
    const auto px = cube.pixel(i);
    for (auto b : keep) data.push_back(px(static_cast<Eigen::Index>(b)));
  }
  std::vector<std::string> labels;
  for (auto b : keep) labels.push_back(cube.band_labels()[b]);
  return ImageCube(cube.dims(), keep.size(), std::move(data), std::move(labels));
}

// ---------------------------------------------------------------------------
// Masks (PGM)
// ---------------------------------------------------------------------------

inline std::string encode_pgm(const Mask& mask) {
  const Dims& dims = mask.dims();
  const std::size_t cols = dims.back();
  const std::size_t height = mask.size() / cols;
  std::string out = "P5\n";
  if (dims.size() == 3) out += "# dims " + std::to_string(dims[0]) + " " + std::to_string(dims[1]) + " " + std::to_string(dims[2]) + "\n";
  out += std::to_string(cols) + " " + std::to_string(height) + "\n255\n";
  for (auto v : mask.values()) out.push_back(static_cast<char>(v ? 255 : 0));
  return out;
}

inline void write_mask(const Mask& mask, const fs::path& path) { write_file_atomic(path, encode_pgm(mask)); }

/// Nonzero samples read as 1.
inline Mask decode_pgm(const std::string& bytes, const std::string& origin = "<memory>") {
  std::size_t pos = 0;
  std::optional<Dims> comment_dims;
  auto fail = [&](const std::string& why) { return Error(ErrorCode::format, "malformed PGM: " + why, {{"path", origin}}); };
  auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        const std::size_t end = bytes.find('\n', pos);
        std::istringstream line(bytes.substr(pos + 1, end == std::string::npos ? std::string::npos : end - pos - 1));
        std::string tag;
        std::size_t d = 0, r = 0, c = 0;
        if (line >> tag >> d >> r >> c && tag == "dims") comment_dims = Dims{d, r, c};
        pos = end == std::string::npos ? bytes.size() : end + 1;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> std::size_t {
    skip_space_and_comments();
    std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw fail("expected an integer");
    return static_cast<std::size_t>(std::stoull(bytes.substr(start, pos - start)));
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw fail("missing P5 magic");
  pos = 2;
  const std::size_t width = read_int();
  const std::size_t height = read_int();
  const std::size_t maxval = read_int();
  if (maxval == 0 || maxval > 255) throw fail("only 8-bit PGM is supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) throw fail("header not terminated");
  ++pos;
  if (bytes.size() - pos != width * height) {
    throw Error(ErrorCode::format, "PGM payload size does not match the header",
                {{"path", origin}, {"expected_bytes", std::to_string(width * height)},
                 {"actual_bytes", std::to_string(bytes.size() - pos)}});
  }
  Dims dims{height, width};
  if (comment_dims) {
    if ((*comment_dims)[0] * (*comment_dims)[1] != height || (*comment_dims)[2] != width) throw fail("dims comment disagrees with size");
    dims = *comment_dims;
  }
  std::vector<std::uint8_t> values(width * height);
  for (std::size_t k = 0; k < values.size(); ++k) values[k] = bytes[pos + k] != 0 ? 1 : 0;
  return Mask(dims, std::move(values));
}

inline Mask read_mask(const fs::path& path) { return decode_pgm(detail::read_file(path), path.string()); }

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

namespace detail {

class ArrayWriter {
 public:
  void add(const std::string& name, const Matrix& m) {
    arrays_[name] = {{"offset", offset_}, {"rows", m.rows()}, {"cols", m.cols()}};
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) put_le(bytes_, m(r, c));
    }
    offset_ += static_cast<std::size_t>(m.size());
  }
  void add(const std::string& name, const Vector& v) { add(name, Matrix(v)); }

  const json& table() const { return arrays_; }
  const std::string& bytes() const { return bytes_; }

 private:
  json arrays_ = json::object();
  std::string bytes_;
  std::size_t offset_ = 0;
};

class ArrayReader {
 public:
  ArrayReader(json table, std::string bytes, fs::path origin)
      : table_(std::move(table)), bytes_(std::move(bytes)), origin_(std::move(origin)) {}

  bool has(const std::string& name) const { return table_.contains(name); }

  Matrix matrix(const std::string& name) const {
    if (!has(name)) throw Error(ErrorCode::format, "model payload is missing array '" + name + "'", {{"path", origin_.string()}});
    const auto& entry = table_.at(name);
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    const std::size_t need = (offset + static_cast<std::size_t>(rows * cols)) * sizeof(double);
    if (need > bytes_.size()) {
      throw Error(ErrorCode::format, "model payload is truncated",
                  {{"path", origin_.string()}, {"expected_bytes", std::to_string(need)},
                   {"actual_bytes", std::to_string(bytes_.size())}});
    }
    Matrix out(rows, cols);
    const char* p = bytes_.data() + offset * sizeof(double);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c, p += sizeof(double)) out(r, c) = get_le<double>(p);
    }
    return out;
  }
  Vector vector(const std::string& name) const {
    Matrix m = matrix(name);
    if (m.cols() != 1) throw Error(ErrorCode::format, "array '" + name + "' is not a vector", {{"path", origin_.string()}});
    return m.col(0);
  }

 private:
  json table_;
  std::string bytes_;
  fs::path origin_;
};

inline Connectivity parse_connectivity(int c) {
  switch (c) {
    case 0: return Connectivity::none;
    case 4: return Connectivity::four;
    case 6: return Connectivity::six;
    default: throw Error(ErrorCode::format, "connectivity must be 0, 4 or 6", {{"value", std::to_string(c)}});
  }
}

}  // namespace detail

/// A persisted model: background statistics, a graph model, or both.
struct ModelFile {
  std::optional<BackgroundStats> stats;
  std::optional<GraphModel> graph;
  json provenance = json::object();
};

inline void write_model(const ModelFile& model, const fs::path& path) {
  const fs::path payload = detail::payload_path_for(path, ".bin");
  detail::ArrayWriter arrays;
  json header;
  header["format"] = "lad-model";
  header["version"] = 1;
  header["dtype"] = "f64";
  header["byte_order"] = "little";
  header["payload"] = payload.filename().string();
  if (model.stats) {
    const auto& s = *model.stats;
    json meta;
    meta["bands"] = s.bands();
    meta["ridge"] = s.ridge;
    meta["rcond"] = s.rcond ? json(*s.rcond) : json(nullptr);
    header["background"] = meta;
    arrays.add("background.mean", s.mean);
    arrays.add("background.covariance", s.covariance);
    if (s.precision) arrays.add("background.precision", *s.precision);
  }
  if (model.graph) {
    const auto& g = *model.graph;
    json meta;
    meta["topology"] = to_string(g.topology());
    meta["connectivity"] = static_cast<int>(g.weights.connectivity);
    meta["bands"] = g.bands();
    meta["order"] = g.order();
    meta["variant"] = to_string(g.variant);
    meta["clamped_weights"] = g.weights.clamped;
    meta["eigensystem"] = g.eigen.has_value();
    header["graph"] = meta;
    arrays.add("graph.weights", g.weights.w);
    arrays.add("graph.degree", g.degree);
    arrays.add("graph.laplacian", g.laplacian);
    arrays.add("graph.mean", g.mean);
    if (g.eigen) {
      arrays.add("graph.eigenvalues", g.eigen->values);
      arrays.add("graph.eigenvectors", g.eigen->vectors);
    }
  }
  header["arrays"] = arrays.table();
  header["provenance"] = model.provenance;
  write_file_atomic(payload, arrays.bytes());
  write_file_atomic(path, dump_json(header));
}

inline ModelFile read_model(const fs::path& path) {
  const json header = detail::parse_json(path);
  if (header.value("format", "") != "lad-model") throw Error(ErrorCode::format, "not a lad-model header", {{"path", path.string()}});
  const fs::path payload = path.parent_path() / detail::require<std::string>(header, "payload", path);
  const detail::ArrayReader arrays(header.value("arrays", json::object()), detail::read_file(payload), payload);
  ModelFile out;
  if (header.contains("provenance")) out.provenance = header["provenance"];
  if (header.contains("background")) {
    const auto& meta = header["background"];
    BackgroundStats s;
    s.mean = arrays.vector("background.mean");
    s.covariance = arrays.matrix("background.covariance");
    s.ridge = meta.value("ridge", 0.0);
    if (meta.contains("rcond") && !meta["rcond"].is_null()) s.rcond = meta["rcond"].get<double>();
    if (arrays.has("background.precision")) s.precision = arrays.matrix("background.precision");
    out.stats = std::move(s);
  }
  if (header.contains("graph")) {
    const auto& meta = header["graph"];
    WeightMatrix w;
    w.w = arrays.matrix("graph.weights");
    w.topology = meta.value("topology", "spectral") == "spectral" ? Topology::spectral : Topology::spatial_spectral;
    w.connectivity = detail::parse_connectivity(meta.value("connectivity", 0));
    w.bands = meta.value("bands", std::size_t{0});
    w.clamped = meta.value("clamped_weights", std::size_t{0});
    validate(w);
    GraphModel g;
    g.weights = std::move(w);
    g.degree = arrays.vector("graph.degree");
    g.laplacian = arrays.matrix("graph.laplacian");
    g.variant = meta.value("variant", "symmetric_normalized") == "combinatorial" ? LaplacianVariant::combinatorial
                                                                                  : LaplacianVariant::symmetric_normalized;
    g.mean = arrays.vector("graph.mean");
    if (arrays.has("graph.eigenvalues")) {
      g.eigen = Eigensystem{arrays.vector("graph.eigenvalues"), arrays.matrix("graph.eigenvectors")};
    }
    out.graph = std::move(g);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string roc_csv(const std::vector<RocPoint>& roc) {
  std::string out = "fpr,tpr,t\n";
  for (const auto& p : roc) out += format_double(p.fpr) + "," + format_double(p.tpr) + "," + format_double(p.t) + "\n";
  return out;
}

inline json confusion_json(const Confusion& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

inline json report_json(const EvalReport& r) {
  json j;
  j["t"] = r.t;
  j["counts"] = confusion_json(r.confusion);
  j["soi"] = r.soi;
  j["best"] = {{"t", r.best.t}, {"soi", r.best.soi}};
  j["roc_points"] = r.roc.size();
  return j;
}

// ---------------------------------------------------------------------------
// ENVI-style rasters
// ---------------------------------------------------------------------------

/// Reads a raster described by an ENVI-style text header (samples, lines,
/// bands, data type, interleave, byte order, header offset) into a cube.
/// The data file defaults to the header path without its ".hdr" extension.
inline ImageCube read_envi(const fs::path& header_path, std::optional<fs::path> data_path = {}) {
  const std::string text = detail::read_file(header_path);
  std::map<std::string, std::string> fields;
  {
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string::npos) end = text.size();
      std::string line = text.substr(pos, end - pos);
      pos = end + 1;
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
      };
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (!value.empty() && value.front() == '{') {
        while (value.find('}') == std::string::npos && pos < text.size()) {
          end = text.find('\n', pos);
          if (end == std::string::npos) end = text.size();
          value += " " + trim(text.substr(pos, end - pos));
          pos = end + 1;
        }
      }
      std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
      fields[key] = value;
    }
  }
  auto number = [&](const char* key, std::optional<std::size_t> fallback = {}) -> std::size_t {
    auto it = fields.find(key);
    if (it == fields.end()) {
      if (fallback) return *fallback;
      throw Error(ErrorCode::format, std::string("ENVI header is missing '") + key + "'", {{"path", header_path.string()}});
    }
    return static_cast<std::size_t>(std::stoull(it->second));
  };
  const std::size_t samples = number("samples");
  const std::size_t lines = number("lines");
  const std::size_t bands = number("bands");
  const std::size_t type = number("data type");
  const std::size_t offset = number("header offset", 0);
  const bool big_endian = number("byte order", 0) == 1;
  std::string interleave = fields.count("interleave") ? fields["interleave"] : "bsq";
  std::transform(interleave.begin(), interleave.end(), interleave.begin(), [](unsigned char c) { return std::tolower(c); });

  std::size_t size = 0;
  switch (type) {
    case 1: size = 1; break;
    case 2: case 12: size = 2; break;
    case 3: case 4: size = 4; break;
    case 5: size = 8; break;
    default: throw Error(ErrorCode::format, "unsupported ENVI data type", {{"data type", std::to_string(type)}});
  }

  fs::path data_file = data_path ? *data_path : header_path;
  if (!data_path) {
    if (data_file.extension() == ".hdr") data_file.replace_extension("");
    else throw Error(ErrorCode::invalid_argument, "pass the data file explicitly for headers without a .hdr extension");
  }
  const std::string bytes = detail::read_file(data_file);
  const std::size_t count = samples * lines * bands;
  if (bytes.size() < offset + count * size) {
    throw Error(ErrorCode::format, "ENVI data file is shorter than its header describes",
                {{"path", data_file.string()}, {"expected_bytes", std::to_string(offset + count * size)},
                 {"actual_bytes", std::to_string(bytes.size())}});
  }
  auto sample = [&](std::size_t k) -> double {
    const char* p = bytes.data() + offset + k * size;
    auto get = [&](auto tag) {
      using T = decltype(tag);
      return static_cast<double>(big_endian ? detail::get_be<T>(p) : detail::get_le<T>(p));
    };
    switch (type) {
      case 1: return static_cast<double>(static_cast<unsigned char>(*p));
      case 2: return get(std::int16_t{});
      case 3: return get(std::int32_t{});
      case 4: return get(float{});
      case 5: return get(double{});
      case 12: return get(std::uint16_t{});
    }
    return 0.0;
  };
  std::vector<double> data(count);
  for (std::size_t l = 0; l < lines; ++l) {
    for (std::size_t s = 0; s < samples; ++s) {
      for (std::size_t b = 0; b < bands; ++b) {
        std::size_t k = 0;
        if (interleave == "bip") k = (l * samples + s) * bands + b;
        else if (interleave == "bil") k = (l * bands + b) * samples + s;
        else if (interleave == "bsq") k = (b * lines + l) * samples + s;
        else throw Error(ErrorCode::format, "unknown ENVI interleave", {{"interleave", interleave}});
        data[(l * samples + s) * bands + b] = sample(k);
      }
    }
  }
  return ImageCube({lines, samples}, bands, std::move(data));
}

}  // namespace lad::io
