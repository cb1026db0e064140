#include "mlat/config.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace mlat {

namespace {

// Field lists shared by the reader and the writer.

template <class V, class C>
void fields(V& v, C& c, DeviceConfig*) {
  v("rows", c.rows);
  v("cols", c.cols);
  v("chamber_pitch_um", c.chamber_pitch_um);
  v("sag_height_um", c.sag_height_um);
  v("sag_diameter_um", c.sag_diameter_um);
  v("refractive_index", c.refractive_index);
  v("lens_aperture_um", c.lens_aperture_um);
  v("object_distance_um", c.object_distance_um);
  v("lens_image_distance_um", c.lens_image_distance_um);
  v("pinhole_diameter_um", c.pinhole_diameter_um);
  v("pinhole_image_distance_um", c.pinhole_image_distance_um);
  v("focal_tolerance", c.focal_tolerance);
}

template <class V, class C>
void fields(V& v, C& c, SensorConfig*) {
  v("pixel_pitch_um", c.pixel_pitch_um);
  v("tile_width", c.tile_width);
  v("tile_height", c.tile_height);
  v("bit_depth", c.bit_depth);
  v("noise_sigma", c.noise_sigma);
  v("supersample", c.supersample);
  v("crop_px", c.crop_px);
}

template <class V, class C>
void fields(V& v, C& c, PatternConfig*) {
  v("cell_um", c.cell_um);
  v("seed", c.seed);
}

template <class V, class C>
void fields(V& v, C& c, LayerConfig*) {
  v("grid_cols", c.grid_cols);
  v("grid_rows", c.grid_rows);
  v("decay_exponent", c.decay_exponent);
  v("k_n", c.k_n);
  v("k_t", c.k_t);
  v("max_depth_mm", c.max_depth_mm);
  v("nominal_z_mm", c.nominal_z_mm);
}

template <class V, class C>
void fields(V& v, C& c, PipelineConfig*) {
  v("grid_cols", c.grid_cols);
  v("grid_rows", c.grid_rows);
  v("search_radius", c.search_radius);
  v("area_method", c.area_method);
  v("variance_floor", c.variance_floor);
  v("depth_noise_floor", c.depth_noise_floor);
}

template <class V, class C>
void fields(V& v, C& c, SweepZConfig*) {
  v("z_start_mm", c.z_start_mm);
  v("z_stop_mm", c.z_stop_mm);
  v("steps", c.steps);
  v("dot_diameter_um", c.dot_diameter_um);
  v("dot_offset_um", c.dot_offset_um);
}

template <class V, class C>
void fields(V& v, C& c, SweepXYConfig*) {
  v("heights_mm", c.heights_mm);
  v("offsets_um", c.offsets_um);
  v("dot_diameter_um", c.dot_diameter_um);
}

template <class V, class C>
void fields(V& v, C& c, IndentNormalConfig*) {
  v("radius_um", c.radius_um);
  v("depths_mm", c.depths_mm);
  v("positions_um", c.positions_um);
  v("held_out_depth_mm", c.held_out_depth_mm);
}

template <class V, class C>
void fields(V& v, C& c, IndentTangentialConfig*) {
  v("radius_um", c.radius_um);
  v("depths_mm", c.depths_mm);
  v("offsets_um", c.offsets_um);
  v("direction_deg", c.direction_deg);
}

template <class V, class C>
void fields(V& v, C& c, DepthDemoConfig*) {
  v("glyphs", c.glyphs);
  v("glyph_cell_um", c.glyph_cell_um);
  v("depth_mm", c.depth_mm);
  v("calibration_depth_mm", c.calibration_depth_mm);
  v("two_stage_mm", c.two_stage_mm);
  v("grid_cols", c.grid_cols);
  v("grid_rows", c.grid_rows);
  v("footprint_fraction", c.footprint_fraction);
}

template <class V, class C>
void fields(V& v, C& c, MetrologyConfig*) {
  v("edge_z_mm", c.edge_z_mm);
  v("edge_angle_deg", c.edge_angle_deg);
  v("roi_px", c.roi_px);
  v("criterion", c.criterion);
  v("foci_seeds", c.foci_seeds);
  v("foci_tolerance", c.foci_tolerance);
  v("foci_noise_sigma", c.foci_noise_sigma);
}

template <class V, class C>
void fields(V& v, C& c, IndenterConfig*) {
  v("shape", c.shape);
  v("radius_um", c.radius_um);
  v("width_um", c.width_um);
  v("gap_um", c.gap_um);
  v("arc_deg", c.arc_deg);
  v("glyph", c.glyph);
  v("glyph_cell_um", c.glyph_cell_um);
  v("x_um", c.x_um);
  v("y_um", c.y_um);
  v("depth_mm", c.depth_mm);
  v("tx_um", c.tx_um);
  v("ty_um", c.ty_um);
}

template <class V, class C>
void fields(V& v, C& c, RenderConfig*) {
  v("z_mm", c.z_mm);
  v("indenter", c.indenter);
  v("bit_depth", c.bit_depth);
}

template <class V, class C>
void fields(V& v, C& c, StitchConfig*) {
  v("input", c.input);
}

template <class V, class C>
void fields(V& v, C& c, ExperimentConfig*) {
  v("experiment", c.experiment);
  v("seed", c.seed);
  v("output_dir", c.output_dir);
  v("device", c.device);
  v("sensor", c.sensor);
  v("pattern", c.pattern);
  v("layer", c.layer);
  v("pipeline", c.pipeline);
  v("sweep_z", c.sweep_z);
  v("sweep_xy", c.sweep_xy);
  v("indent_normal", c.indent_normal);
  v("indent_tangential", c.indent_tangential);
  v("depth_demo", c.depth_demo);
  v("metrology", c.metrology);
  v("render", c.render);
  v("stitch", c.stitch);
}

// ---------------------------------------------------------------------------

struct Writer {
  Json& out;

  template <class T>
  void operator()(const char* key, const T& value) { out[key] = encode(value); }

  static Json encode(double v) { return v; }
  static Json encode(int v) { return v; }
  static Json encode(std::uint64_t v) { return v; }
  static Json encode(const std::string& v) { return v; }
  static Json encode(const std::vector<double>& v) { return v; }
  static Json encode(const std::vector<std::vector<double>>& v) { return v; }
  static Json encode(const std::optional<double>& v) { return v ? Json(*v) : Json("auto"); }
  static Json encode(const std::optional<std::uint64_t>& v) { return v ? Json(*v) : Json(nullptr); }
  template <class T>
  static Json encode(const std::optional<T>& v) {
    return v ? encode(*v) : Json(nullptr);
  }
  template <class T>
  static Json encode(const T& section) {
    Json j = Json::object();
    Writer w{j};
    fields(w, section, static_cast<T*>(nullptr));
    return j;
  }
};

struct Reader {
  const Json& in;
  std::string path;
  std::set<std::string> seen;

  template <class T>
  void operator()(const char* key, T& value) {
    seen.insert(key);
    if (!in.contains(key)) return;
    decode(in.at(key), value, path.empty() ? key : path + "." + key);
  }

  void finish() const {
    for (const auto& item : in.items())
      if (!seen.count(item.key()) && item.key() != "include")
        throw ConfigError("unknown key '" + (path.empty() ? item.key() : path + "." + item.key()) + "'");
  }

  [[noreturn]] static void bad(const std::string& where, const char* want) {
    throw ConfigError("'" + where + "' must be " + want);
  }

  static void decode(const Json& j, double& v, const std::string& where) {
    if (!j.is_number()) bad(where, "a number");
    v = j.get<double>();
    if (!std::isfinite(v)) bad(where, "finite");
  }
  static void decode(const Json& j, int& v, const std::string& where) {
    if (!j.is_number_integer()) bad(where, "an integer");
    v = j.get<int>();
  }
  static void decode(const Json& j, std::uint64_t& v, const std::string& where) {
    if (!j.is_number_unsigned()) bad(where, "a non-negative integer");
    v = j.get<std::uint64_t>();
  }
  static void decode(const Json& j, std::string& v, const std::string& where) {
    if (!j.is_string()) bad(where, "a string");
    v = j.get<std::string>();
  }
  static void decode(const Json& j, std::vector<double>& v, const std::string& where) {
    if (!j.is_array()) bad(where, "an array of numbers");
    v.clear();
    for (std::size_t i = 0; i < j.size(); ++i) {
      double x = 0;
      decode(j[i], x, where + "[" + std::to_string(i) + "]");
      v.push_back(x);
    }
  }
  static void decode(const Json& j, std::vector<std::vector<double>>& v, const std::string& where) {
    if (!j.is_array()) bad(where, "an array of arrays");
    v.clear();
    for (std::size_t i = 0; i < j.size(); ++i) {
      std::vector<double> row;
      decode(j[i], row, where + "[" + std::to_string(i) + "]");
      v.push_back(row);
    }
  }
  static void decode(const Json& j, std::optional<double>& v, const std::string& where) {
    if (j.is_string() && j.get<std::string>() == "auto") {
      v.reset();
      return;
    }
    double x = 0;
    decode(j, x, where);
    v = x;
  }
  static void decode(const Json& j, std::optional<std::uint64_t>& v, const std::string& where) {
    if (j.is_null()) {
      v.reset();
      return;
    }
    std::uint64_t x = 0;
    decode(j, x, where);
    v = x;
  }
  template <class T>
  static void decode(const Json& j, std::optional<T>& v, const std::string& where) {
    if (j.is_null()) {
      v.reset();
      return;
    }
    T x;
    decode(j, x, where);
    v = x;
  }
  template <class T>
  static void decode(const Json& j, T& section, const std::string& where) {
    if (!j.is_object()) bad(where, "an object");
    Reader r{j, where, {}};
    fields(r, section, static_cast<T*>(nullptr));
    r.finish();
  }
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

void validate(const ExperimentConfig& c) {
  static const std::set<std::string> names{"",          "sweep-z",    "sweep-xy", "indent-normal",
                                           "indent-tangential", "depth-demo", "metrology", "stitch",
                                           "render"};
  require(names.count(c.experiment) > 0, "unknown experiment '" + c.experiment + "'");
  require(!c.output_dir.empty(), "output_dir must not be empty");

  const auto& d = c.device;
  require(d.rows > 0 && d.cols > 0, "device.rows and device.cols must be positive");
  require(!d.chamber_pitch_um || *d.chamber_pitch_um > 0, "device.chamber_pitch_um must be positive");
  require(d.sag_height_um > 0 && d.sag_diameter_um > 0 && d.sag_height_um <= d.sag_diameter_um / 2,
          "device sag height/diameter must describe a cap no taller than a hemisphere");
  require(d.refractive_index > 1, "device.refractive_index must exceed 1");
  require(d.lens_aperture_um > 0 && d.pinhole_diameter_um > 0, "apertures must be positive");
  require(d.object_distance_um > 0 && d.pinhole_image_distance_um > 0, "distances must be positive");
  require(!d.lens_image_distance_um || *d.lens_image_distance_um > 0, "device.lens_image_distance_um must be positive");
  require(d.focal_tolerance >= 0 && d.focal_tolerance < 0.5, "device.focal_tolerance must lie in [0, 0.5)");

  const auto& s = c.sensor;
  require(s.pixel_pitch_um > 0, "sensor.pixel_pitch_um must be positive");
  require(s.tile_width > 0 && s.tile_height > 0, "sensor tile size must be positive");
  require(s.bit_depth == 8 || s.bit_depth == 16, "sensor.bit_depth must be 8 or 16");
  require(s.noise_sigma >= 0, "sensor.noise_sigma must be non-negative");
  require(s.supersample >= 1 && s.supersample <= 16, "sensor.supersample must lie in [1, 16]");
  require(s.crop_px >= 0 && 2 * s.crop_px < std::min(s.tile_width, s.tile_height), "sensor.crop_px too large");

  require(c.pattern.cell_um > 0, "pattern.cell_um must be positive");
  require(c.layer.grid_cols >= 2 && c.layer.grid_rows >= 2, "layer grid must be at least 2x2");
  require(c.layer.decay_exponent > 0 && c.layer.k_n > 0 && c.layer.k_t > 0, "layer constants must be positive");
  require(c.layer.max_depth_mm > 0, "layer.max_depth_mm must be positive");
  require(c.layer.nominal_z_mm > 0, "layer.nominal_z_mm must be positive");

  const auto& p = c.pipeline;
  require(p.grid_cols >= 1 && p.grid_rows >= 1, "pipeline grid must be positive");
  require(p.search_radius >= 1, "pipeline.search_radius must be positive");
  require(p.area_method == "quad" || p.area_method == "blob", "pipeline.area_method must be 'quad' or 'blob'");
  require(p.variance_floor >= 0 && p.depth_noise_floor >= 0, "pipeline floors must be non-negative");

  require(c.sweep_z.steps >= 2, "sweep_z.steps must be at least 2");
  require(c.sweep_z.z_stop_mm != c.sweep_z.z_start_mm, "sweep_z range is empty");
  require(c.sweep_z.dot_diameter_um > 0, "sweep_z.dot_diameter_um must be positive");
  require(c.sweep_z.dot_offset_um.size() == 2, "sweep_z.dot_offset_um must have two entries");
  require(!c.sweep_xy.heights_mm.empty(), "sweep_xy.heights_mm must not be empty");
  require(c.sweep_xy.offsets_um.size() >= 2, "sweep_xy.offsets_um needs at least two entries");
  require(c.sweep_xy.dot_diameter_um > 0, "sweep_xy.dot_diameter_um must be positive");

  const auto& n = c.indent_normal;
  require(n.radius_um > 0, "indent_normal.radius_um must be positive");
  require(n.depths_mm.size() >= 2 && !n.positions_um.empty(), "indent_normal needs two depths and a position");
  for (const auto& pos : n.positions_um) require(pos.size() == 2, "indent_normal.positions_um entries need two values");
  for (double v : n.depths_mm) require(v >= 0, "indent_normal.depths_mm must be non-negative");
  require(n.held_out_depth_mm > 0, "indent_normal.held_out_depth_mm must be positive");

  const auto& t = c.indent_tangential;
  require(t.radius_um > 0, "indent_tangential.radius_um must be positive");
  require(!t.depths_mm.empty() && t.offsets_um.size() >= 2, "indent_tangential needs depths and two offsets");

  const auto& g = c.depth_demo;
  require(!g.glyphs.empty(), "depth_demo.glyphs must not be empty");
  for (char ch : g.glyphs) require(has_glyph(ch), std::string("depth_demo: no glyph for '") + ch + "'");
  require(g.glyph_cell_um > 0 && g.depth_mm > 0 && g.calibration_depth_mm > 0, "depth_demo sizes must be positive");
  require(g.two_stage_mm.size() == 2, "depth_demo.two_stage_mm must have two entries");
  require(g.grid_cols >= 1 && g.grid_rows >= 1, "depth_demo grid must be positive");
  require(g.footprint_fraction > 0 && g.footprint_fraction < 1, "depth_demo.footprint_fraction must lie in (0, 1)");

  const auto& m = c.metrology;
  require(!m.edge_z_mm.empty(), "metrology.edge_z_mm must not be empty");
  require(m.roi_px >= 32, "metrology.roi_px must be at least 32");
  require(m.criterion > 0 && m.criterion < 1, "metrology.criterion must lie in (0, 1)");
  require(m.foci_seeds >= 1 && m.foci_tolerance >= 0 && m.foci_noise_sigma >= 0, "metrology foci settings invalid");

  require(c.render.z_mm > 0, "render.z_mm must be positive");
  require(c.render.bit_depth == 8 || c.render.bit_depth == 16, "render.bit_depth must be 8 or 16");
  if (c.render.indenter) {
    static const std::set<std::string> shapes{"sphere", "corner", "two_points", "coin_edge", "glyph"};
    require(shapes.count(c.render.indenter->shape) > 0, "render.indenter.shape unknown");
    require(c.render.indenter->glyph.size() == 1, "render.indenter.glyph must be one character");
  }
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

Json resolve(const std::filesystem::path& path, int depth) {
  if (depth > 8) throw ConfigError("include nesting too deep at " + path.string());
  Json doc = read_json_file(path);
  if (!doc.is_object()) throw ConfigError(path.string() + ": top level must be an object");
  if (!doc.contains("include")) return doc;

  const Json inc = doc["include"];
  std::vector<std::string> files;
  if (inc.is_string()) files.push_back(inc.get<std::string>());
  else if (inc.is_array()) {
    for (const auto& f : inc) {
      if (!f.is_string()) throw ConfigError("'include' entries must be strings");
      files.push_back(f.get<std::string>());
    }
  } else {
    throw ConfigError("'include' must be a string or an array of strings");
  }
  doc.erase("include");
  Json merged = Json::object();
  for (const auto& f : files) merged.merge_patch(resolve(path.parent_path() / f, depth + 1));
  merged.merge_patch(doc);
  return merged;
}

}  // namespace

Json ExperimentConfig::to_json() const { return Writer::encode(*this); }

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(to_json().dump()); }

DeviceGeometry ExperimentConfig::device_geometry(double nominal_z_um) const {
  DeviceGeometry g;
  g.rows = device.rows;
  g.cols = device.cols;
  g.lens = LensSpec<double>::from_sag(device.sag_height_um, device.sag_diameter_um, device.refractive_index);
  g.lens_aperture_um = device.lens_aperture_um;
  if (!(device.object_distance_um > g.lens.focal_length_f))
    throw ConfigError("device.object_distance_um must exceed the focal length");
  g.lens_image_distance_um = device.lens_image_distance_um
                                 ? *device.lens_image_distance_um
                                 : thin_lens_image_distance(g.lens.focal_length_f, device.object_distance_um);
  g.pinhole = PinholeSpec<double>(device.pinhole_diameter_um);
  g.pinhole_image_distance_um = device.pinhole_image_distance_um;
  const double rest_u = mm_to_um(layer.nominal_z_mm) - g.lens_image_distance_um;
  if (!(rest_u > 0)) throw ConfigError("layer.nominal_z_mm must exceed the lens image distance");
  const double m = g.lens_image_distance_um / rest_u;
  g.chamber_pitch_um = device.chamber_pitch_um
                           ? *device.chamber_pitch_um
                           : double(sensor.tile_width - 2 * sensor.crop_px) * sensor.pixel_pitch_um / m;
  g.nominal_z_um = nominal_z_um;
  if (device.focal_tolerance > 0) {
    std::mt19937_64 rng(seed ^ 0xF0C1ull);
    std::uniform_real_distribution<double> tol(-device.focal_tolerance, device.focal_tolerance);
    for (int i = 0; i < g.rows * g.cols; ++i) g.focal_perturbation.push_back(tol(rng));
  }
  return g;
}

SensorSpec ExperimentConfig::sensor_spec() const {
  SensorSpec s;
  s.pixel_pitch_um = sensor.pixel_pitch_um;
  s.tile_width = sensor.tile_width;
  s.tile_height = sensor.tile_height;
  s.bit_depth = sensor.bit_depth;
  s.noise_sigma = sensor.noise_sigma;
  s.noise_seed = seed;
  s.supersample = sensor.supersample;
  return s;
}

TouchLayer ExperimentConfig::touch_layer(const DeviceGeometry& g) const {
  TouchLayer t;
  t.width_um = g.width_um();
  t.height_um = g.height_um();
  t.grid_cols = layer.grid_cols;
  t.grid_rows = layer.grid_rows;
  t.decay_exponent = layer.decay_exponent;
  t.k_n = layer.k_n;
  t.k_t = layer.k_t;
  t.max_depth_um = mm_to_um(layer.max_depth_mm);
  return t;
}

FlowParams ExperimentConfig::flow_params() const {
  FlowParams f;
  f.grid_cols = pipeline.grid_cols;
  f.grid_rows = pipeline.grid_rows;
  f.search_radius = pipeline.search_radius;
  f.variance_floor = pipeline.variance_floor;
  f.tile_width = sensor.tile_width - 2 * sensor.crop_px;
  f.tile_height = sensor.tile_height - 2 * sensor.crop_px;
  return f;
}

AreaSegmentation ExperimentConfig::area_params() const {
  AreaSegmentation a;
  a.grid_cols = pipeline.grid_cols;
  a.grid_rows = pipeline.grid_rows;
  a.search_radius = pipeline.search_radius;
  a.method = pipeline.area_method == "blob" ? AreaMethod::blob : AreaMethod::quad;
  a.tile_width = sensor.tile_width - 2 * sensor.crop_px;
  a.tile_height = sensor.tile_height - 2 * sensor.crop_px;
  return a;
}

ExperimentConfig parse_config(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  Reader::decode(doc, c, "");
  validate(c);
  return c;
}

Json resolve_includes(const std::filesystem::path& path) { return resolve(path, 0); }

ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(resolve_includes(path)); }

}  // namespace mlat
