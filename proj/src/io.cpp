// Copyright Contributors to the spgs Project
// SPDX-License-Identifier: Apache-2.0
//
#include "spgs/io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include <Eigen/LU>

namespace spgs {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// ---- little-endian byte streams -------------------------------------------

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) buf_.push_back(static_cast<char>((v >> (8 * k)) & 0xffu));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void bytes(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
  void f64(double v) {
    const std::uint64_t b = std::bit_cast<std::uint64_t>(v);
    u32(static_cast<std::uint32_t>(b));
    u32(static_cast<std::uint32_t>(b >> 32));
  }
  void tensor(const Tensor& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) f32(t.data()[i]);
  }
  void tensor64(const Tensor& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) f64(t.data()[i]);
  }
  const std::vector<char>& data() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> data) : buf_(std::move(data)) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + k])) << (8 * k);
    pos_ += 4;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  double f64() {
    const std::uint64_t lo = u32();
    const std::uint64_t hi = u32();
    return std::bit_cast<double>(lo | (hi << 32));
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  Tensor tensor(Eigen::Index rows, Eigen::Index cols) {
    need(static_cast<std::size_t>(rows * cols) * 4);
    Tensor t(rows, cols);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = f32();
    return t;
  }
  Tensor tensor64(Eigen::Index rows, Eigen::Index cols) {
    need(static_cast<std::size_t>(rows * cols) * 8);
    Tensor t(rows, cols);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = f64();
    return t;
  }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw Error("unexpected end of file");
  }
  std::vector<char> buf_;
  std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::string& path, const std::vector<char>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error("write failed: " + path);
}

std::uint32_t checked_count(std::uint32_t v, std::uint32_t limit, const char* what) {
  if (v > limit) throw Error(std::string("implausible ") + what);
  return v;
}

// ---- PLY helpers ------------------------------------------------------------

struct PlyProperty {
  std::string name;
  std::string type;
  std::size_t offset = 0;
  std::size_t size = 0;
};

std::size_t ply_type_size(const std::string& t) {
  static const std::map<std::string, std::size_t> sizes = {
      {"char", 1},  {"uchar", 1},  {"int8", 1},  {"uint8", 1},  {"short", 2},   {"ushort", 2},
      {"int16", 2}, {"uint16", 2}, {"int", 4},   {"uint", 4},   {"int32", 4},   {"uint32", 4},
      {"float", 4}, {"float32", 4}, {"double", 8}, {"float64", 8}};
  auto it = sizes.find(t);
  if (it == sizes.end()) throw Error("malformed ply header: unknown type " + t);
  return it->second;
}

double ply_read_value(const char* p, const std::string& t) {
  auto le = [&](int n) {
    std::uint64_t v = 0;
    for (int k = 0; k < n; ++k) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[k])) << (8 * k);
    return v;
  };
  if (t == "float" || t == "float32") return std::bit_cast<float>(static_cast<std::uint32_t>(le(4)));
  if (t == "double" || t == "float64") return std::bit_cast<double>(le(8));
  if (t == "uchar" || t == "uint8") return static_cast<double>(le(1));
  if (t == "char" || t == "int8") return static_cast<double>(static_cast<std::int8_t>(le(1)));
  if (t == "ushort" || t == "uint16") return static_cast<double>(le(2));
  if (t == "short" || t == "int16") return static_cast<double>(static_cast<std::int16_t>(le(2)));
  if (t == "uint" || t == "uint32") return static_cast<double>(le(4));
  return static_cast<double>(static_cast<std::int32_t>(le(4)));
}

// ---- misc ---------------------------------------------------------------------

Vec3 json_vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw Error(std::string(what) + " must be a 3-vector");
  Vec3 v(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  if (!v.allFinite()) throw Error(std::string(what) + " must be finite");
  return v;
}

void write_net(ByteWriter& w, const MotionNet& net) {
  const MotionNetConfig& c = net.config();
  w.u32(c.width);
  w.u32(c.depth);
  w.u32(c.pos_freqs);
  w.u32(c.time_freqs);
  const MlpParams& p = net.mlp().params();
  w.u32(static_cast<std::uint32_t>(p.weights.size()));
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    w.u32(static_cast<std::uint32_t>(p.weights[l].rows()));
    w.u32(static_cast<std::uint32_t>(p.weights[l].cols()));
    w.tensor(p.weights[l]);
    w.tensor(p.biases[l]);
  }
}

MotionNet read_net(ByteReader& r) {
  MotionNetConfig c;
  c.width = static_cast<int>(checked_count(r.u32(), 1u << 16, "network width"));
  c.depth = static_cast<int>(checked_count(r.u32(), 256, "network depth"));
  c.pos_freqs = static_cast<int>(checked_count(r.u32(), 64, "frequency count"));
  c.time_freqs = static_cast<int>(checked_count(r.u32(), 64, "frequency count"));
  MotionNet net(c, 0);
  MlpParams& p = net.mlp().params();
  const std::uint32_t layers = r.u32();
  if (layers != p.weights.size()) throw Error("network layer count mismatch");
  for (std::size_t l = 0; l < layers; ++l) {
    const auto rows = r.u32(), cols = r.u32();
    if (rows != p.weights[l].rows() || cols != p.weights[l].cols()) throw Error("network layer shape mismatch");
    p.weights[l] = r.tensor(rows, cols);
    p.biases[l] = r.tensor(1, cols);
  }
  return net;
}

enum : std::uint32_t {
  kHasSuperpoints = 1u << 0,
  kHasDeform = 1u << 1,
  kHasNonrigid = 1u << 2,
  kHasCache = 1u << 3,
  kCacheOnly = 1u << 4,
};

}  // namespace

// ---- PLY --------------------------------------------------------------------

void save_ply(const std::string& path, const GaussianCloud& cloud, const PlyColors* colors) {
  cloud.validate();
  const int P = cloud.size();
  const int B = cloud.sh_coeffs();
  if (colors && static_cast<int>(colors->rgb.size()) != P) throw Error("color count mismatch");
  std::ostringstream h;
  h << "ply\nformat binary_little_endian 1.0\nelement vertex " << P << "\n";
  for (const char* n : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"})
    h << "property float " << n << "\n";
  for (int k = 0; k < 3 * (B - 1); ++k) h << "property float f_rest_" << k << "\n";
  h << "property float opacity\n";
  for (int k = 0; k < 3; ++k) h << "property float scale_" << k << "\n";
  for (int k = 0; k < 4; ++k) h << "property float rot_" << k << "\n";
  if (colors) h << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  h << "end_header\n";
  const std::string header = h.str();
  ByteWriter w;
  w.bytes(header.data(), header.size());
  for (int i = 0; i < P; ++i) {
    for (int k = 0; k < 3; ++k) w.f32(cloud.positions(i, k));
    for (int k = 0; k < 3; ++k) w.f32(0.0);
    for (int c = 0; c < 3; ++c) w.f32(cloud.sh(i, c));
    // f_rest is channel-major: all coefficients of red, then green, then blue.
    for (int c = 0; c < 3; ++c)
      for (int b = 1; b < B; ++b) w.f32(cloud.sh(i, 3 * b + c));
    w.f32(cloud.opacity_logits(i, 0));
    for (int k = 0; k < 3; ++k) w.f32(cloud.log_scales(i, k));
    for (int k = 0; k < 4; ++k) w.f32(cloud.rotations(i, k));
    if (colors) w.bytes(reinterpret_cast<const char*>(colors->rgb[i].data()), 3);
  }
  write_file(path, w.data());
}

GaussianCloud load_ply(const std::string& path) {
  const std::vector<char> raw = read_file(path);
  const std::string text(raw.begin(), raw.end());
  const std::size_t end = text.find("end_header\n");
  if (text.rfind("ply\n", 0) != 0 || end == std::string::npos) throw Error("malformed ply header");
  std::istringstream header(text.substr(0, end));
  std::string line;
  std::getline(header, line);
  long long count = -1;
  bool in_vertex = false, binary_le = false;
  std::vector<PlyProperty> props;
  std::size_t stride = 0;
  while (std::getline(header, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (tok == "element") {
      std::string name;
      long long n = -1;
      ls >> name >> n;
      in_vertex = name == "vertex";
      if (in_vertex) count = n;
      else if (count >= 0) break;  // later elements are ignored
      else throw Error("malformed ply header: vertex element must come first");
    } else if (tok == "property" && in_vertex) {
      std::string type, name;
      ls >> type;
      if (type == "list") throw Error("malformed ply header: list properties unsupported");
      ls >> name;
      const std::size_t sz = ply_type_size(type);
      props.push_back({name, type, stride, sz});
      stride += sz;
    } else if (tok == "comment" || tok == "obj_info" || tok.empty()) {
      continue;
    } else if (tok != "property") {
      throw Error("malformed ply header: " + line);
    }
  }
  if (!binary_le) throw Error("malformed ply header: only binary_little_endian is supported");
  if (count < 1) throw Error("wrong element count");
  std::map<std::string, const PlyProperty*> by_name;
  for (const auto& p : props) by_name[p.name] = &p;
  int rest = 0;
  while (by_name.count("f_rest_" + std::to_string(rest))) ++rest;
  int degree = -1;
  for (int d = 0; d <= 3; ++d)
    if (3 * (sh_coeff_count(d) - 1) == rest) degree = d;
  if (degree < 0) throw Error("unsupported f_rest property count");
  auto need = [&](const std::string& n) {
    auto it = by_name.find(n);
    if (it == by_name.end()) throw Error("missing property " + n);
    return it->second;
  };
  const std::size_t body = end + std::string("end_header\n").size();
  if (raw.size() - body < static_cast<std::size_t>(count) * stride) throw Error("wrong element count");
  GaussianCloud cloud(static_cast<int>(count), degree);
  const int B = sh_coeff_count(degree);
  std::vector<const PlyProperty*> pos, dc, scale, rot, frest;
  for (const char* n : {"x", "y", "z"}) pos.push_back(need(n));
  for (int c = 0; c < 3; ++c) dc.push_back(need("f_dc_" + std::to_string(c)));
  for (int k = 0; k < 3; ++k) scale.push_back(need("scale_" + std::to_string(k)));
  for (int k = 0; k < 4; ++k) rot.push_back(need("rot_" + std::to_string(k)));
  for (int k = 0; k < rest; ++k) frest.push_back(need("f_rest_" + std::to_string(k)));
  const PlyProperty* opacity = need("opacity");
  for (long long i = 0; i < count; ++i) {
    const char* row = raw.data() + body + static_cast<std::size_t>(i) * stride;
    auto get = [&](const PlyProperty* p) { return ply_read_value(row + p->offset, p->type); };
    for (int k = 0; k < 3; ++k) cloud.positions(i, k) = get(pos[k]);
    for (int c = 0; c < 3; ++c) cloud.sh(i, c) = get(dc[c]);
    for (int c = 0; c < 3; ++c)
      for (int b = 1; b < B; ++b) cloud.sh(i, 3 * b + c) = get(frest[c * (B - 1) + (b - 1)]);
    cloud.opacity_logits(i, 0) = get(opacity);
    for (int k = 0; k < 3; ++k) cloud.log_scales(i, k) = get(scale[k]);
    for (int k = 0; k < 4; ++k) cloud.rotations(i, k) = get(rot[k]);
  }
  return cloud;
}

// ---- PNG --------------------------------------------------------------------

void save_image(const std::string& path, const Image& image) {
  if (image.width <= 0 || image.height <= 0) throw Error("cannot save an empty image");
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw Error("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw Error("png encode failed: " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(image.width) * 3);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(image.at(x, y, c), 0.0, 1.0);
        row[static_cast<std::size_t>(x) * 3 + c] = static_cast<png_byte>(std::lround(v * 255.0));
      }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

Image load_image(const std::string& path, const Vec3& background) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw Error("cannot open " + path);
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp) != 8 || png_sig_cmp(sig, 0, 8)) {
    std::fclose(fp);
    throw Error("png decode failed: " + path);
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw Error("png decode failed: " + path);
  }
  png_init_io(png, fp);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (png_get_bit_depth(png, info) < 8) png_set_packing(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_filler(png, 0xff, PNG_FILLER_AFTER);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  std::vector<png_byte> pixels(static_cast<std::size_t>(w) * h * 4);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * w * 4;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const png_byte* p = rows[y] + static_cast<std::size_t>(x) * 4;
      const double a = p[3] / 255.0;
      for (int c = 0; c < 3; ++c)
        img.at(x, y, c) = p[3] == 255 ? p[c] / 255.0 : (p[c] / 255.0) * a + background[c] * (1.0 - a);
    }
  return img;
}

// ---- Dataset ----------------------------------------------------------------

Dataset load_dataset(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw Error("dataset directory not found: " + dir);
  const fs::path train_json = root / "transforms_train.json";
  if (!fs::exists(train_json)) throw Error("missing " + train_json.string());

  struct Pending {
    Frame frame;
    double raw_time;
    bool train;
  };
  std::vector<Pending> pending;
  Dataset data;
  bool have_bg = false;
  std::string points;
  for (const auto& [file, train] : {std::pair{std::string("transforms_train.json"), true},
                                    std::pair{std::string("transforms_test.json"), false}}) {
    const fs::path p = root / file;
    if (!fs::exists(p)) continue;
    json j;
    try {
      std::ifstream in(p);
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw Error("invalid json in " + p.string() + ": " + e.what());
    }
    if (!j.contains("camera_angle_x") || !j.contains("frames")) throw Error(p.string() + ": missing camera_angle_x or frames");
    const double fov = j["camera_angle_x"].get<double>();
    if (!(fov > 0.0 && fov < M_PI)) throw Error(p.string() + ": camera_angle_x out of range");
    if (j.contains("background") && !have_bg) {
      data.background = json_vec3(j["background"], "background");
      have_bg = true;
    }
    if (j.contains("points") && points.empty()) points = j["points"].get<std::string>();
    const std::string conv = j.value("camera_convention", std::string("opengl"));
    if (conv != "opengl" && conv != "opencv") throw Error("unknown camera_convention " + conv);
    for (const auto& fj : j["frames"]) {
      Pending pf;
      pf.train = train;
      pf.raw_time = fj.value("time", 0.0);
      if (!std::isfinite(pf.raw_time)) throw Error("non-finite frame time");
      const std::string rel = fj.at("file_path").get<std::string>();
      pf.frame.name = rel;
      Mat4 c2w;
      const auto& m = fj.at("transform_matrix");
      if (!m.is_array() || m.size() != 4) throw Error("transform_matrix must be 4x4");
      for (int r = 0; r < 4; ++r) {
        if (!m[r].is_array() || m[r].size() != 4) throw Error("transform_matrix must be 4x4");
        for (int c = 0; c < 4; ++c) c2w(r, c) = m[r][c].get<double>();
      }
      if (!c2w.allFinite()) throw Error("non-finite transform_matrix in " + rel);
      if (conv == "opengl") c2w.col(1) *= -1.0, c2w.col(2) *= -1.0;
      Mat4 w2c = Mat4::Identity();
      const Mat3 R = c2w.topLeftCorner<3, 3>().transpose();
      w2c.topLeftCorner<3, 3>() = R;
      w2c.topRightCorner<3, 1>() = -R * c2w.topRightCorner<3, 1>();
      pf.frame.camera.world_to_camera = w2c;
      fs::path img = root / rel;
      if (!fs::exists(img) && fs::exists(img.string() + ".png")) img = img.string() + ".png";
      int width = fj.value("w", j.value("w", 0)), height = fj.value("h", j.value("h", 0));
      if (fs::exists(img)) {
        pf.frame.image = load_image(img.string(), data.background);
        width = pf.frame.image->width;
        height = pf.frame.image->height;
      } else if (train) {
        throw Error("missing image " + img.string());
      }
      if (width <= 0 || height <= 0) throw Error("frame " + rel + " has no image and no size");
      pf.frame.camera.width = width;
      pf.frame.camera.height = height;
      pf.frame.camera.fx = pf.frame.camera.fy = focal_from_fov(fov, width);
      pf.frame.camera.cx = 0.5 * width;
      pf.frame.camera.cy = 0.5 * height;
      pf.frame.camera.validate();
      pending.push_back(std::move(pf));
    }
  }
  if (pending.empty()) throw Error("dataset has no frames");
  double tmin = pending[0].raw_time, tmax = tmin;
  for (const auto& p : pending) tmin = std::min(tmin, p.raw_time), tmax = std::max(tmax, p.raw_time);
  for (auto& p : pending) {
    p.frame.time = tmax > tmin ? (p.raw_time - tmin) / (tmax - tmin) : 0.0;
    (p.train ? data.train_frames : data.test_frames).push_back(std::move(p.frame));
  }
  if (!points.empty()) data.initial_points = load_ply((root / points).string());
  data.finalize();
  return data;
}

// ---- Checkpoint ---------------------------------------------------------------

void save_checkpoint(const std::string& path, const SpgsModel& source) {
  SpgsModel model = source;
  model.quantize_to_float();
  const GaussianCloud& c = model.cloud;
  c.validate();
  ByteWriter w;
  w.bytes("SPGS", 4);
  w.u32(kCheckpointVersion);
  const bool has_deform = !model.deform.mlp().params().weights.empty();
  std::uint32_t flags = 0;
  if (model.superpoints) flags |= kHasSuperpoints;
  if (has_deform) flags |= kHasDeform;
  if (model.nonrigid) flags |= kHasNonrigid;
  if (model.cache) flags |= kHasCache;
  if (model.cache_only) flags |= kCacheOnly;
  w.u32(flags);
  w.u32(static_cast<std::uint32_t>(c.size()));
  w.u32(static_cast<std::uint32_t>(c.sh_degree));
  w.tensor(c.positions);
  w.tensor(c.log_scales);
  w.tensor(c.rotations);
  w.tensor(c.opacity_logits);
  w.tensor(c.sh);
  w.u32(static_cast<std::uint32_t>(model.train_times.size()));
  for (double t : model.train_times) w.f64(t);
  if (model.superpoints) {
    const SuperpointModel& sp = *model.superpoints;
    if (sp.gaussians() != c.size()) throw Error("association does not match the cloud");
    w.u32(static_cast<std::uint32_t>(sp.count()));
    w.u32(static_cast<std::uint32_t>(sp.k()));
    w.tensor(sp.positions);
    for (Eigen::Index i = 0; i < sp.neighbors.size(); ++i) w.i32(sp.neighbors.data()[i]);
    w.tensor(sp.logits);
  }
  if (has_deform) write_net(w, model.deform);
  if (model.nonrigid) write_net(w, *model.nonrigid);
  if (model.cache) {
    const DeformationCache& dc = *model.cache;
    w.u32(static_cast<std::uint32_t>(dc.times.size()));
    w.u32(static_cast<std::uint32_t>(dc.superpoint_count()));
    for (double t : dc.times) w.f64(t);
    for (const Tensor& m : dc.motions) w.tensor64(m);
  }
  write_file(path, w.data());
}

SpgsModel load_checkpoint(const std::string& path) {
  ByteReader r(read_file(path));
  if (r.bytes(4) != "SPGS") throw Error("not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t flags = r.u32();
  SpgsModel model;
  const int P = static_cast<int>(checked_count(r.u32(), 1u << 28, "gaussian count"));
  const int deg = static_cast<int>(checked_count(r.u32(), 3, "sh degree"));
  GaussianCloud& c = model.cloud;
  c = GaussianCloud(P, deg);
  c.positions = r.tensor(P, 3);
  c.log_scales = r.tensor(P, 3);
  c.rotations = r.tensor(P, 4);
  c.opacity_logits = r.tensor(P, 1);
  c.sh = r.tensor(P, 3 * sh_coeff_count(deg));
  const std::uint32_t T = checked_count(r.u32(), 1u << 20, "timestep count");
  for (std::uint32_t k = 0; k < T; ++k) model.train_times.push_back(r.f64());
  if (flags & kHasSuperpoints) {
    SuperpointModel sp;
    const int M = static_cast<int>(checked_count(r.u32(), 1u << 24, "superpoint count"));
    const int K = static_cast<int>(checked_count(r.u32(), 1024, "neighbor count"));
    sp.positions = r.tensor(M, 3);
    sp.neighbors.resize(P, K);
    for (Eigen::Index i = 0; i < sp.neighbors.size(); ++i) sp.neighbors.data()[i] = r.i32();
    sp.logits = r.tensor(P, K);
    sp.validate();
    model.superpoints = std::move(sp);
  }
  if (flags & kHasDeform) model.deform = read_net(r);
  if (flags & kHasNonrigid) model.nonrigid = read_net(r);
  if (flags & kHasCache) {
    DeformationCache dc;
    const std::uint32_t Tc = checked_count(r.u32(), 1u << 20, "cache timestep count");
    const std::uint32_t M = checked_count(r.u32(), 1u << 24, "cache superpoint count");
    for (std::uint32_t k = 0; k < Tc; ++k) dc.times.push_back(r.f64());
    for (std::uint32_t k = 0; k < Tc; ++k) dc.motions.push_back(r.tensor64(M, 6));
    dc.validate();
    model.cache = std::move(dc);
  }
  model.cache_only = (flags & kCacheOnly) != 0;
  if (!r.at_end()) throw Error("trailing bytes in checkpoint");
  return model;
}

// ---- Trajectories ---------------------------------------------------------------

void save_trajectories(const std::string& path, const Trajectories& traj) {
  traj.validate();
  ByteWriter w;
  w.bytes("SPTJ", 4);
  w.u32(kTrajectoryVersion);
  const int P = traj.gaussians();
  w.u32(static_cast<std::uint32_t>(P));
  w.u32(static_cast<std::uint32_t>(traj.times.size()));
  for (double t : traj.times) w.f32(t);
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    for (int i = 0; i < P; ++i) {
      for (int c = 0; c < 3; ++c) w.f32(traj.positions[k](i, c));
      for (int c = 0; c < 4; ++c) w.f32(traj.rotations[k](i, c));
    }
  write_file(path, w.data());
}

Trajectories load_trajectories(const std::string& path) {
  ByteReader r(read_file(path));
  if (r.bytes(4) != "SPTJ") throw Error("not a trajectory file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kTrajectoryVersion) throw Error("unsupported trajectory version " + std::to_string(version));
  const int P = static_cast<int>(checked_count(r.u32(), 1u << 28, "gaussian count"));
  const std::uint32_t T = checked_count(r.u32(), 1u << 20, "timestep count");
  Trajectories tr;
  for (std::uint32_t k = 0; k < T; ++k) tr.times.push_back(r.f32());
  for (std::uint32_t k = 0; k < T; ++k) {
    Tensor pos(P, 3), rot(P, 4);
    for (int i = 0; i < P; ++i) {
      for (int c = 0; c < 3; ++c) pos(i, c) = r.f32();
      for (int c = 0; c < 4; ++c) rot(i, c) = r.f32();
      const double n = rot.row(i).norm();
      if (!(n > 0.0)) throw Error("degenerate quaternion");
      if (std::abs(n - 1.0) > 1e-6) rot.row(i) /= n;
    }
    tr.positions.push_back(std::move(pos));
    tr.rotations.push_back(std::move(rot));
  }
  if (!r.at_end()) throw Error("trajectory count mismatch (trailing bytes)");
  tr.validate();
  return tr;
}

}  // namespace spgs
