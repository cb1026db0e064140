#include "mlat/experiments.hpp"

#include "mlat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace mlat {

namespace {

constexpr int kSchemaVersion = 1;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

const char* mode_name(ImagingMode m) { return m == ImagingMode::lens ? "lens" : "pinhole"; }

std::vector<std::pair<std::string, std::string>> csv_meta(const ExperimentConfig& c) {
  return {{"schema_version", std::to_string(kSchemaVersion)},
          {"experiment", c.experiment},
          {"config_hash", hash_hex(c.hash())},
          {"seed", std::to_string(c.seed)}};
}

RunReport new_report(const ExperimentConfig& c, const std::string& name) {
  RunReport r;
  r.experiment = name;
  r.config_hash = c.hash();
  r.seed = c.seed;
  return r;
}

std::string frame_name(const char* stem, int frame, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05d.%s", stem, frame, ext);
  return buf;
}

Eigen::ArrayXd as_array(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::ArrayXd>(v.data(), Eigen::Index(v.size()));
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + std::ptrdiff_t(mid)));
  return m;
}

ImagingMode primary_mode(const RunOptions& o) { return o.modes.empty() ? ImagingMode::lens : o.modes.front(); }

Blob largest_blob(const ImageF& gray, const std::string& where) {
  const auto blobs = detect_blobs(gray, otsu_threshold(gray), 8);
  if (blobs.empty()) throw PipelineError("blob lost " + where);
  return *std::max_element(blobs.begin(), blobs.end(), [](const Blob& a, const Blob& b) { return a.area < b.area; });
}

MarkerPattern single_dot(const Vec2& center, double diameter_um) {
  MarkerPattern p;
  p.kind = PatternKind::dot_grid;
  p.dot_pitch_um = 1e6;
  p.dot_radius_um = 0.5 * diameter_um;
  p.dot_origin_um = center;
  return p;
}

struct Measurement {
  double af = 0, tf = 0, flow_sum = 0;
};

Measurement measure(const ImageF& ref, const ImageF& cur, const AreaSegmentation& area, const FlowParams& flow) {
  Measurement m;
  m.af = area_factor(segment_area_patches(ref, cur, area));
  const FlowField f = compute_flow(ref, cur, flow);
  m.tf = tangential_factor(f);
  for (const auto& v : f.vectors) m.flow_sum += v.norm();
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

bool RunReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

void RunReport::check(const std::string& name, double value, const std::string& relation, double limit) {
  bool ok = false;
  if (relation == "<=") ok = value <= limit;
  else if (relation == ">=") ok = value >= limit;
  else if (relation == "<") ok = value < limit;
  else if (relation == ">") ok = value > limit;
  else if (relation == "==") ok = value == limit;
  else throw std::invalid_argument("RunReport::check: unknown relation " + relation);
  checks.push_back({name, value, limit, relation, ok});
}

Json RunReport::to_json() const {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["experiment"] = experiment;
  j["config_hash"] = hash_hex(config_hash);
  j["seed"] = seed;
  j["metrics"] = metrics;
  Json cs = Json::array();
  for (const auto& c : checks)
    cs.push_back({{"name", c.name},
                  {"value", std::isfinite(c.value) ? Json(c.value) : Json(nullptr)},
                  {"relation", c.relation},
                  {"limit", c.limit},
                  {"passed", c.passed}});
  j["checks"] = cs;
  j["passed"] = passed();
  return j;
}

// ---------------------------------------------------------------------------

Rig::Rig(const ExperimentConfig& config, double z_um, ImagingMode mode)
    : device_(config.device_geometry(z_um)),
      sensor_(config.sensor_spec()),
      layer_(config.touch_layer(device_)),
      mode_(mode),
      z_um_(z_um),
      crop_(config.sensor.crop_px) {}

double Rig::px_per_um() const { return device_.magnification_at(mode_, z_um_) / sensor_.pixel_pitch_um; }

RawMosaic Rig::mosaic(const PatternFn& pattern, const DeformationField* field, int frame) const {
  std::shared_ptr<const DeformationField> f;
  if (field) f = std::make_shared<DeformationField>(*field);
  return render_array(DeformedScene(pattern, z_um_, f), device_, sensor_, mode_, frame);
}

RgbImage Rig::stitched(const PatternFn& pattern, const DeformationField* field, int frame) const {
  return stitch(mosaic(pattern, field, frame), crop_);
}

PatternFn texture_pattern(const ExperimentConfig& config, const Rig& rig) {
  MarkerPattern p;
  p.kind = PatternKind::random_color;
  p.width_um = rig.layer().width_um;
  p.height_um = rig.layer().height_um;
  p.cell_um = config.pattern.cell_um;
  p.seed = config.pattern.seed ? *config.pattern.seed : config.seed;
  return make_pattern(p);
}

Indenter make_indenter(const IndenterConfig& c, const Vec2& center) {
  Indenter ind;
  if (c.shape == "sphere") ind.shape = IndenterShape::sphere;
  else if (c.shape == "corner") ind.shape = IndenterShape::corner;
  else if (c.shape == "two_points") ind.shape = IndenterShape::two_points;
  else if (c.shape == "coin_edge") ind.shape = IndenterShape::coin_edge;
  else if (c.shape == "glyph") ind.shape = IndenterShape::glyph;
  else throw ConfigError("unknown indenter shape '" + c.shape + "'");
  ind.radius_um = c.radius_um;
  ind.width_um = c.width_um;
  ind.gap_um = c.gap_um;
  ind.arc_deg = c.arc_deg;
  ind.glyph = c.glyph.empty() ? '1' : c.glyph[0];
  ind.glyph_cell_um = c.glyph_cell_um;
  ind.x_um = center.x() + c.x_um;
  ind.y_um = center.y() + c.y_um;
  ind.depth_um = mm_to_um(c.depth_mm);
  ind.tx_um = c.tx_um;
  ind.ty_um = c.ty_um;
  return ind;
}

// ---------------------------------------------------------------------------

SweepZResult run_sweep_z(const ExperimentConfig& config, const RunOptions& options) {
  const auto& sc = config.sweep_z;
  if (sc.steps < 2) throw ConfigError("sweep_z.steps must be at least 2");
  SweepZResult res;
  res.report = new_report(config, "sweep-z");
  std::optional<CsvWriter> csv;
  if (!options.out_dir.empty())
    csv.emplace(options.out_dir / "sweep_z.csv", csv_meta(config),
                std::vector<std::string>{"mode", "z_mm", "area_px", "centroid_x_px", "centroid_y_px", "radial_px"});

  for (ImagingMode mode : options.modes) {
    SweepZSeries s;
    s.mode = mode;
    std::vector<double> analytic;
    for (int k = 0; k < sc.steps; ++k) {
      const double z_mm = sc.z_start_mm + (sc.z_stop_mm - sc.z_start_mm) * k / (sc.steps - 1);
      const Rig rig(config, mm_to_um(z_mm), mode);
      const VisionUnit unit = rig.device().unit(rig.device().rows / 2, rig.device().cols / 2);
      const Vec2 dot = unit.optical_center_um + Vec2(sc.dot_offset_um[0], sc.dot_offset_um[1]);
      const DeformedScene scene(make_pattern(single_dot(dot, sc.dot_diameter_um)), rig.z_um());
      const RgbImage tile = render_unit(scene, rig.device(), unit, rig.sensor(), mode, k);
      std::ostringstream where;
      where << "at Z = " << z_mm << " mm (" << mode_name(mode) << ")";
      const Blob b = largest_blob(luminance(tile), where.str());
      const Vec2 centre(0.5 * (tile.cols() - 1), 0.5 * (tile.rows() - 1));
      s.z_mm.push_back(z_mm);
      s.area_px.push_back(b.area);
      s.radial_px.push_back((b.centroid - centre).norm());
      const double m = rig.device().magnification_at(mode, rig.z_um());
      const double d_px = sc.dot_diameter_um * m / rig.sensor().pixel_pitch_um;
      analytic.push_back(0.25 * std::numbers::pi * d_px * d_px);
      if (csv)
        csv->row({mode_name(mode), CsvWriter::format(z_mm), CsvWriter::format(b.area),
                  CsvWriter::format(b.centroid.x()), CsvWriter::format(b.centroid.y()),
                  CsvWriter::format(s.radial_px.back())});
    }
    s.area_fit = fit_linear(as_array(s.z_mm), as_array(s.area_px));
    s.analytic_slope = fit_linear(as_array(s.z_mm), as_array(analytic)).slope;

    const std::string tag = mode_name(mode);
    res.report.metrics[tag] = {{"area_slope_px2_per_mm", s.area_fit.slope},
                               {"area_r_squared", s.area_fit.r_squared},
                               {"analytic_slope_px2_per_mm", s.analytic_slope}};
    if (mode == ImagingMode::lens) {
      res.report.check("lens_area_r_squared", s.area_fit.r_squared, ">=", 0.95);
      const Rig near(config, mm_to_um(s.z_mm.front()), mode), far(config, mm_to_um(s.z_mm.back()), mode);
      const double m_ratio = near.device().magnification_at(mode, near.z_um()) /
                             far.device().magnification_at(mode, far.z_um());
      const double radial_err = std::abs((s.radial_px.front() / s.radial_px.back()) / m_ratio - 1.0);
      const double area_err = std::abs((s.area_px.front() / s.area_px.back()) / (m_ratio * m_ratio) - 1.0);
      res.report.metrics[tag]["centroid_ratio_rel_error"] = radial_err;
      res.report.metrics[tag]["area_ratio_rel_error"] = area_err;
      res.report.check("lens_centroid_ratio_rel_error", radial_err, "<=", 0.02);
      res.report.check("lens_area_ratio_rel_error", area_err, "<=", 0.02);
    }
    res.series.push_back(std::move(s));
  }

  const SweepZSeries* lens = nullptr;
  const SweepZSeries* pin = nullptr;
  for (const auto& s : res.series) (s.mode == ImagingMode::lens ? lens : pin) = &s;
  if (lens && pin) {
    res.gradient_ratio = lens->area_fit.slope / pin->area_fit.slope;
    res.analytic_gradient_ratio = lens->analytic_slope / pin->analytic_slope;
    res.report.metrics["gradient_ratio"] = res.gradient_ratio;
    res.report.metrics["analytic_gradient_ratio"] = res.analytic_gradient_ratio;
    res.report.check("gradient_ratio_rel_error", std::abs(res.gradient_ratio / res.analytic_gradient_ratio - 1.0),
                     "<=", 0.10);
    res.report.check("pinhole_r_squared_below_lens", pin->area_fit.r_squared, "<", lens->area_fit.r_squared);
  }
  return res;
}

// ---------------------------------------------------------------------------

SweepXYResult run_sweep_xy(const ExperimentConfig& config, const RunOptions& options) {
  const auto& sc = config.sweep_xy;
  SweepXYResult res;
  res.report = new_report(config, "sweep-xy");
  std::optional<CsvWriter> csv;
  if (!options.out_dir.empty())
    csv.emplace(options.out_dir / "sweep_xy.csv", csv_meta(config),
                std::vector<std::string>{"mode", "height_mm", "offset_um", "centroid_x_px", "shift_px"});

  int frame = 0;
  for (ImagingMode mode : options.modes) {
    for (double h : sc.heights_mm) {
      const Rig rig(config, mm_to_um(h), mode);
      const VisionUnit unit = rig.device().unit(rig.device().rows / 2, rig.device().cols / 2);
      SweepXYLine line;
      line.mode = mode;
      line.height_mm = h;
      line.analytic_gradient = rig.device().magnification_at(mode, rig.z_um()) / rig.sensor().pixel_pitch_um;
      std::vector<double> cx;
      for (double off : sc.offsets_um) {
        const DeformedScene scene(make_pattern(single_dot(unit.optical_center_um + Vec2(off, 0), sc.dot_diameter_um)),
                                  rig.z_um());
        const RgbImage tile = render_unit(scene, rig.device(), unit, rig.sensor(), mode, frame++);
        std::ostringstream where;
        where << "at height " << h << " mm, offset " << off << " um (" << mode_name(mode) << ")";
        cx.push_back(largest_blob(luminance(tile), where.str()).centroid.x());
      }
      // zero offset (or the first one) is the origin; sign flipped to the upright orientation
      std::size_t origin = 0;
      for (std::size_t i = 0; i < sc.offsets_um.size(); ++i)
        if (sc.offsets_um[i] == 0) origin = i;
      for (std::size_t i = 0; i < cx.size(); ++i) {
        line.offset_um.push_back(sc.offsets_um[i] - sc.offsets_um[origin]);
        line.shift_px.push_back(-(cx[i] - cx[origin]));
        if (csv)
          csv->row({mode_name(mode), CsvWriter::format(h), CsvWriter::format(line.offset_um.back()),
                    CsvWriter::format(cx[i]), CsvWriter::format(line.shift_px.back())});
      }
      line.fit = fit_linear(as_array(line.offset_um), as_array(line.shift_px));
      res.report.metrics[mode_name(mode)][CsvWriter::format(h)] = {
          {"gradient_px_per_um", line.fit.slope},
          {"analytic_px_per_um", line.analytic_gradient},
          {"r_squared", line.fit.r_squared}};
      res.lines.push_back(std::move(line));
    }
  }

  std::vector<const SweepXYLine*> lens;
  for (const auto& l : res.lines)
    if (l.mode == ImagingMode::lens) lens.push_back(&l);
  std::sort(lens.begin(), lens.end(), [](auto* a, auto* b) { return a->height_mm < b->height_mm; });
  if (!lens.empty()) {
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < lens.size(); ++i) margin = std::min(margin, lens[i - 1]->fit.slope - lens[i]->fit.slope);
    if (lens.size() > 1) res.report.check("lens_gradient_strictly_decreasing", margin, ">", 0.0);

    // single step at the first height
    const SweepXYLine& a = *lens.front();
    for (std::size_t i = 0; i < a.offset_um.size(); ++i) {
      if (a.offset_um[i] == 0) continue;
      const double err = std::abs(a.shift_px[i] - a.offset_um[i] * a.analytic_gradient);
      res.report.check("single_step_shift_error_px", err, "<=", 0.25);
      break;
    }
  }
  for (const auto& l : res.lines) {
    if (l.mode != ImagingMode::lens) continue;
    for (const auto& p : res.lines) {
      if (p.mode != ImagingMode::pinhole || p.height_mm != l.height_mm) continue;
      const double measured = l.fit.slope / p.fit.slope;
      const double analytic = l.analytic_gradient / p.analytic_gradient;
      res.report.metrics["ratio"][CsvWriter::format(l.height_mm)] = {{"measured", measured}, {"analytic", analytic}};
      res.report.check("xy_ratio_rel_error_" + CsvWriter::format(l.height_mm) + "mm",
                       std::abs(measured / analytic - 1.0), "<=", 0.10);
    }
  }
  return res;
}

// ---------------------------------------------------------------------------

namespace {

void write_af_tf(const ExperimentConfig& config, const std::filesystem::path& dir,
                 const std::vector<IndentFrame>& frames) {
  CsvWriter series(dir / "af_tf.csv", csv_meta(config), {"frame", "AF", "TF", "F_n_true", "F_t_true"});
  CsvWriter index(dir / "frames.csv", csv_meta(config),
                  {"frame", "position", "x_um", "y_um", "depth_mm", "offset_um", "flow_magnitude_sum"});
  for (const auto& f : frames) {
    series.row({double(f.frame), f.af, f.tf, f.f_n, f.f_t});
    index.row({double(f.frame), double(f.position), f.x_um, f.y_um, f.depth_mm, f.offset_um, f.flow_magnitude_sum});
  }
}

}  // namespace

IndentNormalResult run_indent_normal(const ExperimentConfig& config, const RunOptions& options) {
  const auto& nc = config.indent_normal;
  IndentNormalResult res;
  res.report = new_report(config, "indent-normal");
  const Rig rig(config, mm_to_um(config.layer.nominal_z_mm), primary_mode(options));
  const PatternFn pattern = texture_pattern(config, rig);
  const AreaSegmentation area = config.area_params();
  const FlowParams flow = config.flow_params();

  const RgbImage ref_rgb = rig.stitched(pattern, nullptr, 0);
  const ImageF ref = luminance(ref_rgb);
  int frame = 1;

  auto press = [&](int position, const Vec2& at, double depth_mm, bool keep_image) {
    Indenter ind;
    ind.shape = IndenterShape::sphere;
    ind.radius_um = nc.radius_um;
    ind.x_um = at.x();
    ind.y_um = at.y();
    ind.depth_um = mm_to_um(depth_mm);
    const DeformationField field = indent(ind, rig.layer());
    const RgbImage img = rig.stitched(pattern, &field, frame);
    const Measurement m = measure(ref, luminance(img), area, flow);
    IndentFrame f;
    f.frame = frame++;
    f.position = position;
    f.x_um = at.x();
    f.y_um = at.y();
    f.depth_mm = depth_mm;
    f.af = m.af;
    f.tf = m.tf;
    f.flow_magnitude_sum = m.flow_sum;
    f.f_n = field.normal_force_mN;
    f.f_t = field.tangential_force_mN;
    if (keep_image && !options.out_dir.empty()) write_ppm(options.out_dir / frame_name("stitched", f.frame, "ppm"), img);
    return f;
  };

  const double dmin = *std::min_element(nc.depths_mm.begin(), nc.depths_mm.end());
  const double dmax = *std::max_element(nc.depths_mm.begin(), nc.depths_mm.end());
  const IndentFrame zero = press(-1, rig.layer_center(), 0.0, false);
  res.frames.push_back(zero);
  for (std::size_t p = 0; p < nc.positions_um.size(); ++p) {
    const Vec2 at = rig.layer_center() + Vec2(nc.positions_um[p][0], nc.positions_um[p][1]);
    for (double d : nc.depths_mm)
      res.frames.push_back(press(int(p), at, d, p == 0 && (d == dmin || d == dmax)));
  }

  std::vector<double> af, tf, fn, ft;
  for (const auto& f : res.frames) {
    af.push_back(f.af);
    tf.push_back(f.tf);
    fn.push_back(f.f_n);
    ft.push_back(f.f_t);
  }
  res.model = calibrate_force(as_array(af), as_array(tf), as_array(fn), as_array(ft), config.hash());
  res.pooled = res.model.normal;

  std::vector<double> slopes;
  for (std::size_t p = 0; p < nc.positions_um.size(); ++p) {
    std::vector<double> x, y;
    for (const auto& f : res.frames)
      if (f.position == int(p)) {
        x.push_back(f.af);
        y.push_back(f.f_n);
      }
    res.per_position.push_back(fit_linear(as_array(x), as_array(y)));
    slopes.push_back(res.per_position.back().slope);
  }

  // held-out depth at the position closest to the layer centre
  std::size_t central = 0;
  for (std::size_t p = 1; p < nc.positions_um.size(); ++p)
    if (std::hypot(nc.positions_um[p][0], nc.positions_um[p][1]) <
        std::hypot(nc.positions_um[central][0], nc.positions_um[central][1]))
      central = p;
  res.held_out = press(-1, rig.layer_center() + Vec2(nc.positions_um[central][0], nc.positions_um[central][1]),
                       nc.held_out_depth_mm, false);
  res.held_out_prediction = res.model.predict_normal(res.held_out.af);

  const double af_min_depth = [&] {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& f : res.frames)
      if (f.position >= 0 && f.depth_mm == dmin) v = std::min(v, std::abs(f.af));
    return v;
  }();
  const double slope_spread = *std::max_element(slopes.begin(), slopes.end()) /
                                  *std::min_element(slopes.begin(), slopes.end()) - 1.0;
  const double held_err = std::abs(res.held_out_prediction / res.held_out.f_n - 1.0);

  res.report.metrics = {{"pooled", to_json(res.pooled)},
                        {"zero_depth_af", zero.af},
                        {"per_position_slope_spread", slope_spread},
                        {"held_out",
                         {{"depth_mm", nc.held_out_depth_mm},
                          {"af", res.held_out.af},
                          {"f_n_true", res.held_out.f_n},
                          {"f_n_predicted", res.held_out_prediction}}}};
  res.report.check("pooled_af_fn_r_squared", res.pooled.r_squared, ">=", 0.97);
  res.report.check("zero_depth_af_over_min_depth_af", std::abs(zero.af) / af_min_depth, "<=", 0.1);
  res.report.check("per_position_slope_spread", slope_spread, "<=", 0.15);
  res.report.check("held_out_force_rel_error", held_err, "<=", 0.10);

  if (!options.out_dir.empty()) {
    std::vector<IndentFrame> all = res.frames;
    all.push_back(res.held_out);
    write_af_tf(config, options.out_dir, all);
    write_json(options.out_dir / "calibration.json", to_json(res.model));
  }
  return res;
}

// ---------------------------------------------------------------------------

IndentTangentialResult run_indent_tangential(const ExperimentConfig& config, const RunOptions& options) {
  const auto& tc = config.indent_tangential;
  IndentTangentialResult res;
  res.report = new_report(config, "indent-tangential");
  const Rig rig(config, mm_to_um(config.layer.nominal_z_mm), primary_mode(options));
  const PatternFn pattern = texture_pattern(config, rig);
  const AreaSegmentation area = config.area_params();
  const FlowParams flow = config.flow_params();
  const ImageF ref = luminance(rig.stitched(pattern, nullptr, 0));
  const double dir = tc.direction_deg * std::numbers::pi / 180.0;

  int frame = 1;
  for (std::size_t di = 0; di < tc.depths_mm.size(); ++di) {
    for (double off : tc.offsets_um) {
      Indenter ind;
      ind.shape = IndenterShape::sphere;
      ind.radius_um = tc.radius_um;
      ind.x_um = rig.layer_center().x();
      ind.y_um = rig.layer_center().y();
      ind.depth_um = mm_to_um(tc.depths_mm[di]);
      ind.tx_um = off * std::cos(dir);
      ind.ty_um = off * std::sin(dir);
      const DeformationField field = indent(ind, rig.layer());
      const Measurement m = measure(ref, luminance(rig.stitched(pattern, &field, frame)), area, flow);
      IndentFrame f;
      f.frame = frame++;
      f.position = int(di);
      f.x_um = ind.x_um;
      f.y_um = ind.y_um;
      f.depth_mm = tc.depths_mm[di];
      f.offset_um = off;
      f.af = m.af;
      f.tf = m.tf;
      f.flow_magnitude_sum = m.flow_sum;
      f.f_n = field.normal_force_mN;
      f.f_t = field.tangential_force_mN;
      res.frames.push_back(f);
    }
  }

  std::vector<double> tf, ft;
  for (const auto& f : res.frames) {
    tf.push_back(f.tf);
    ft.push_back(f.f_t);
  }
  res.pooled = fit_linear(as_array(tf), as_array(ft));

  // TF must grow with depth at every common non-zero offset
  std::vector<double> depths = tc.depths_mm;
  std::sort(depths.begin(), depths.end());
  double order_margin = std::numeric_limits<double>::infinity();
  for (double off : tc.offsets_um) {
    if (off == 0) continue;
    double prev = -std::numeric_limits<double>::infinity();
    for (double d : depths)
      for (const auto& f : res.frames)
        if (f.depth_mm == d && f.offset_um == off) {
          order_margin = std::min(order_margin, f.tf - prev);
          prev = f.tf;
        }
  }
  res.depth_ordered = order_margin > 0;

  double normal_tf_ratio = 0;
  for (const auto& f : res.frames)
    if (f.offset_um == 0 && f.flow_magnitude_sum > 0) normal_tf_ratio = std::max(normal_tf_ratio, f.tf / f.flow_magnitude_sum);

  res.report.metrics = {{"pooled", to_json(res.pooled)},
                        {"depth_order_margin", order_margin},
                        {"normal_frames_tf_over_flow_sum", normal_tf_ratio}};
  res.report.check("pooled_tf_ft_r_squared", res.pooled.r_squared, ">=", 0.9);
  res.report.check("tf_depth_order_margin", order_margin, ">", 0.0);
  res.report.check("normal_frames_tf_over_flow_sum", normal_tf_ratio, "<=", 0.02);

  if (!options.out_dir.empty()) {
    write_af_tf(config, options.out_dir, res.frames);
    CalibrationModel model;
    model.tangential = res.pooled;
    model.config_hash = config.hash();
    std::vector<double> af, fn;
    for (const auto& f : res.frames) {
      af.push_back(f.af);
      fn.push_back(f.f_n);
    }
    model.normal = fit_linear(as_array(af), as_array(fn));
    write_json(options.out_dir / "calibration.json", to_json(model));
  }
  return res;
}

// ---------------------------------------------------------------------------

namespace {

struct DepthProbe {
  DepthMap map;
  AreaPatchGrid grid;
  double af = 0;
};

// Depth map sampled at the field nodes (layer coordinates).
ImageD depth_at_nodes(const DepthMap& map, const DeformationField& field, double px_per_um) {
  ImageD out(field.rows(), field.cols());
  for (Eigen::Index i = 0; i < field.rows(); ++i)
    for (Eigen::Index j = 0; j < field.cols(); ++j) {
      const Vec2 p = field.node_position(i, j) * px_per_um;
      out(i, j) = bilinear(map.depth_um, p.x() - 0.5, p.y() - 0.5);
    }
  return out;
}

}  // namespace

DepthDemoResult run_depth_demo(const ExperimentConfig& config, const RunOptions& options) {
  const auto& dc = config.depth_demo;
  DepthDemoResult res;
  res.report = new_report(config, "depth-demo");
  const Rig rig(config, mm_to_um(config.layer.nominal_z_mm), primary_mode(options));
  const PatternFn pattern = texture_pattern(config, rig);
  AreaSegmentation area = config.area_params();
  area.grid_cols = dc.grid_cols;
  area.grid_rows = dc.grid_rows;
  area.consistency_px = 1.0;
  const ImageF ref = luminance(rig.stitched(pattern, nullptr, 0));
  const double u = rig.z_um() - rig.device().image_distance(rig.mode());
  const int W = int(ref.cols()), H = int(ref.rows());
  int frame = 1;

  auto probe = [&](const DeformationField* field, double scale) {
    DepthProbe p;
    const ImageF cur = luminance(rig.stitched(pattern, field, frame++));
    p.grid = segment_area_patches(ref, cur, area);
    p.af = area_factor(p.grid);
    p.map = depth_map(p.grid, scale, u, W, H, config.pipeline.depth_noise_floor);
    return p;
  };
  // on the optical axis of the unit nearest the layer centre
  const Vec2 axis = rig.device().unit(rig.device().rows / 2, (rig.device().cols - 1) / 2).optical_center_um;
  auto press_field = [&](IndenterShape shape, char glyph, double depth_mm) {
    Indenter ind;
    ind.shape = shape;
    ind.glyph = glyph;
    ind.glyph_cell_um = dc.glyph_cell_um;
    ind.width_um = kGlyphCols * dc.glyph_cell_um;
    ind.x_um = axis.x();
    ind.y_um = axis.y();
    ind.depth_um = mm_to_um(depth_mm);
    return indent(ind, rig.layer());
  };
  auto inside_median = [&](const ImageD& nodes, const ImageF& mask) {
    std::vector<double> v;
    for (Eigen::Index i = 0; i < nodes.size(); ++i)
      if (mask.data()[i] > 0.5f) v.push_back(nodes.data()[i]);
    return median(v);
  };

  // scale from a square press of known depth
  {
    const DeformationField field = press_field(IndenterShape::corner, '0', dc.calibration_depth_mm);
    const DepthProbe p = probe(&field, 1.0);
    const ImageD nodes = depth_at_nodes(p.map, field, rig.px_per_um());
    const double raw = inside_median(nodes, footprint_mask(field, field.dz.abs().maxCoeff(), 0.99));
    if (!(raw > 0)) throw PipelineError("depth-demo: calibration press not detected");
    res.scale = mm_to_um(dc.calibration_depth_mm) / raw;
  }

  {
    const DeformationField zero = DeformationField::zero(rig.layer());
    const DepthProbe p = probe(&zero, res.scale);
    res.unpressed_rms_um = std::sqrt(p.map.depth_um.cast<double>().square().mean());
  }

  std::optional<CsvWriter> csv;
  if (!options.out_dir.empty())
    csv.emplace(options.out_dir / "depth_demo.csv", csv_meta(config),
                std::vector<std::string>{"case", "glyph", "press_depth_mm", "iou", "recovered_depth_um", "AF"});

  auto emit_map = [&](const std::string& stem, const DepthMap& map, char glyph, double depth_mm) {
    if (options.out_dir.empty()) return;
    const double counts = 0.1;  // um per count
    write_pgm16(options.out_dir / (stem + ".pgm"), map.depth_um, counts);
    write_json(options.out_dir / (stem + ".json"),
               {{"um_per_count", counts},
                {"depth_scale", map.scale},
                {"method", map.method},
                {"glyph", std::string(1, glyph)},
                {"press_depth_um", mm_to_um(depth_mm)},
                {"config_hash", hash_hex(config.hash())},
                {"seed", config.seed}});
  };

  double worst_iou = 1;
  for (char g : dc.glyphs) {
    const DeformationField field = press_field(IndenterShape::glyph, g, dc.depth_mm);
    const DepthProbe p = probe(&field, res.scale);
    const double press = mm_to_um(dc.depth_mm);
    const ImageD nodes = depth_at_nodes(p.map, field, rig.px_per_um());
    const ImageF truth = footprint_mask(field, press, dc.footprint_fraction);
    const ImageF found = (nodes >= dc.footprint_fraction * press).cast<float>();
    const double inter = (truth * found).sum();
    const double uni = (truth + found).min(1.0f).sum();
    GlyphDepth gd;
    gd.glyph = g;
    gd.depth_mm = dc.depth_mm;
    gd.iou = uni > 0 ? inter / uni : 0.0;
    gd.recovered_um = inside_median(nodes, truth);
    worst_iou = std::min(worst_iou, gd.iou);
    res.glyphs.push_back(gd);
    emit_map(std::string("depth_") + g, p.map, g, dc.depth_mm);
    if (csv)
      csv->row({"glyph", std::string(1, g), CsvWriter::format(dc.depth_mm), CsvWriter::format(gd.iou),
                CsvWriter::format(gd.recovered_um), CsvWriter::format(p.af)});
    res.report.metrics["glyphs"][std::string(1, g)] = {{"iou", gd.iou}, {"recovered_um", gd.recovered_um}};
  }

  for (int s = 0; s < 2; ++s) {
    const DeformationField field = press_field(IndenterShape::glyph, '1', dc.two_stage_mm[std::size_t(s)]);
    const DepthProbe p = probe(&field, res.scale);
    const ImageD nodes = depth_at_nodes(p.map, field, rig.px_per_um());
    const ImageF truth = footprint_mask(field, mm_to_um(dc.two_stage_mm[std::size_t(s)]), dc.footprint_fraction);
    res.stage_af[s] = p.af;
    res.stage_depth_um[s] = inside_median(nodes, truth);
    emit_map("depth_stage" + std::to_string(s + 1), p.map, '1', dc.two_stage_mm[std::size_t(s)]);
    if (csv)
      csv->row({"stage" + std::to_string(s + 1), "1", CsvWriter::format(dc.two_stage_mm[std::size_t(s)]), "nan",
                CsvWriter::format(res.stage_depth_um[s]), CsvWriter::format(p.af)});
  }
  res.true_step_um = mm_to_um(dc.two_stage_mm[1] - dc.two_stage_mm[0]);
  res.recovered_step_um = res.stage_depth_um[1] - res.stage_depth_um[0];

  res.report.metrics["scale"] = res.scale;
  res.report.metrics["unpressed_rms_um"] = res.unpressed_rms_um;
  res.report.metrics["two_stage"] = {{"af_gap", res.stage_af[1] - res.stage_af[0]},
                                     {"recovered_step_um", res.recovered_step_um},
                                     {"true_step_um", res.true_step_um}};
  res.report.check("min_glyph_iou", worst_iou, ">=", 0.6);
  res.report.check("two_stage_step_error_um", std::abs(res.recovered_step_um - res.true_step_um), "<=", 20.0);
  res.report.check("unpressed_rms_um", res.unpressed_rms_um, "<=", 10.0);
  return res;
}

// ---------------------------------------------------------------------------

namespace {

// Transfer function of the renderer's blur kernel times its supersampling
// along the edge normal n.
double kernel_transfer(const DiskKernel& k, int supersample, const Vec2& n, double f) {
  using C = std::complex<double>;
  const ImageD dense = k.dense();
  const Eigen::Index R = dense.rows() / 2;
  C acc = 0;
  double total = 0;
  for (Eigen::Index i = 0; i < dense.rows(); ++i)
    for (Eigen::Index j = 0; j < dense.cols(); ++j) {
      const double w = dense(i, j);
      if (w == 0) continue;
      const double t = double(j - R) * n.x() + double(i - R) * n.y();
      acc += w * std::polar(1.0, -2 * std::numbers::pi * f * t);
      total += w;
    }
  C box = 0;
  for (int a = 0; a < supersample; ++a)
    for (int b = 0; b < supersample; ++b) {
      const double ox = (b + 0.5) / supersample - 0.5, oy = (a + 0.5) / supersample - 0.5;
      box += std::polar(1.0, -2 * std::numbers::pi * f * (ox * n.x() + oy * n.y()));
    }
  return std::abs(acc / total) * std::abs(box) / double(supersample * supersample);
}

}  // namespace

MetrologyResult run_metrology(const ExperimentConfig& config, const RunOptions& options) {
  const auto& mc = config.metrology;
  MetrologyResult res;
  res.report = new_report(config, "metrology");
  std::optional<CsvWriter> csv;
  if (!options.out_dir.empty())
    csv.emplace(options.out_dir / "metrology.csv", csv_meta(config),
                std::vector<std::string>{"z_mm", "blur_px", "resolution_lpmm", "bar_contrast", "kernel_max_error"});

  int frame = 0;
  for (double z_mm : mc.edge_z_mm) {
    const Rig rig(config, mm_to_um(z_mm), ImagingMode::lens);
    const VisionUnit unit = rig.device().unit(rig.device().rows / 2, rig.device().cols / 2);
    const double pp = rig.sensor().pixel_pitch_um;
    const double m = rig.device().magnification_at(ImagingMode::lens, rig.z_um());
    MetrologyLevel lvl;
    lvl.z_mm = z_mm;
    lvl.blur_px = blur_diameter_um(rig.device(), unit, ImagingMode::lens, rig.z_um()) / pp;

    MarkerPattern edge;
    edge.kind = PatternKind::edge_target;
    edge.center_um = unit.optical_center_um;
    edge.edge_angle_deg = mc.edge_angle_deg;
    const RgbImage edge_tile =
        render_unit(DeformedScene(make_pattern(edge), rig.z_um()), rig.device(), unit, rig.sensor(), ImagingMode::lens, frame++);
    const int T = rig.sensor().tile_width, TH = rig.sensor().tile_height;
    const Roi roi{(TH - mc.roi_px) / 2, (T - mc.roi_px) / 2, mc.roi_px, mc.roi_px};
    SlantedEdgeOptions so;
    so.pixel_pitch_um = pp;
    lvl.curve = slanted_edge_mtf(luminance(edge_tile), roi, mc.edge_angle_deg, so);

    const double theta = mc.edge_angle_deg * std::numbers::pi / 180.0;
    const Vec2 normal(std::cos(theta), -std::sin(theta));
    const DiskKernel kernel = make_disk_kernel(lvl.blur_px);
    for (std::size_t k = 0; k < lvl.curve.samples.size(); ++k) {
      const double f = lvl.curve.cycles_per_pixel(k);
      if (f > 0.25 + 1e-12) break;
      lvl.kernel_max_error = std::max(
          lvl.kernel_max_error,
          std::abs(lvl.curve.samples[k].modulation - kernel_transfer(kernel, rig.sensor().supersample, normal, f)));
    }

    try {
      lvl.resolution_lp_per_mm = resolution_at_criterion(lvl.curve, mc.criterion);
    } catch (const std::runtime_error& e) {
      throw PipelineError(std::string("metrology: ") + e.what());
    }
    const double f_px = lvl.resolution_lp_per_mm * pp / 1000.0;
    MarkerPattern bars;
    bars.kind = PatternKind::bar_target;
    bars.center_um = unit.optical_center_um;
    bars.bar_lp_per_mm = f_px * 1000.0 / pp * m;
    bars.bar_orientation = BarOrientation::vertical;
    const RgbImage bar_tile =
        render_unit(DeformedScene(make_pattern(bars), rig.z_um()), rig.device(), unit, rig.sensor(), ImagingMode::lens, frame++);
    const int bar_h = std::min(mc.roi_px, int(4.0 / f_px));
    lvl.bar_contrast = bar_contrast(luminance(bar_tile), Roi{(TH - bar_h) / 2, (T - mc.roi_px) / 2, bar_h, mc.roi_px},
                                    f_px, BarAxis::x);

    const std::string tag = CsvWriter::format(z_mm);
    res.report.metrics["levels"][tag] = {{"blur_px", lvl.blur_px},
                                         {"resolution_lpmm", lvl.resolution_lp_per_mm},
                                         {"bar_contrast", lvl.bar_contrast},
                                         {"kernel_max_error", lvl.kernel_max_error}};
    res.report.check("kernel_mtf_max_error_" + tag + "mm", lvl.kernel_max_error, "<=", 0.05);
    res.report.check("bar_contrast_deviation_" + tag + "mm", std::abs(lvl.bar_contrast - mc.criterion), "<=", 0.05);
    if (csv) csv->row({z_mm, lvl.blur_px, lvl.resolution_lp_per_mm, lvl.bar_contrast, lvl.kernel_max_error});
    if (!options.out_dir.empty()) {
      write_mtf_csv(options.out_dir / ("mtf_z" + tag + "mm.csv"), lvl.curve, csv_meta(config));
      write_ppm(options.out_dir / ("edge_z" + tag + "mm.ppm"), edge_tile);
      write_ppm(options.out_dir / ("bars_z" + tag + "mm.ppm"), bar_tile);
    }
    res.levels.push_back(std::move(lvl));
  }

  // Foci uniformity Monte-Carlo over focal tolerance seeds.
  std::optional<CsvWriter> foci_csv;
  if (!options.out_dir.empty())
    foci_csv.emplace(options.out_dir / "foci.csv", csv_meta(config), std::vector<std::string>{"trial", "uniformity"});
  int passes = 0;
  for (int s = 0; s < mc.foci_seeds; ++s) {
    ExperimentConfig trial = config;
    trial.seed = config.seed * 1000003ull + std::uint64_t(s);
    trial.device.focal_tolerance = mc.foci_tolerance;
    const Rig rig(trial, mm_to_um(config.layer.nominal_z_mm), ImagingMode::lens);
    SensorSpec sensor = rig.sensor();
    sensor.noise_sigma = mc.foci_noise_sigma;
    const FociResult foci = foci_image(rig.device(), sensor, ImagingMode::lens);
    const double u = uniformity(as_array(foci.peaks));
    res.foci_uniformity.push_back(u);
    if (u <= 0.10) ++passes;
    if (foci_csv) foci_csv->row({double(s), u});
    if (s == 0 && !options.out_dir.empty()) write_ppm(options.out_dir / "foci.ppm", foci.mosaic.assemble());
  }
  res.foci_pass_fraction = double(passes) / double(mc.foci_seeds);
  res.report.metrics["foci"] = {{"pass_fraction", res.foci_pass_fraction},
                                {"worst_uniformity", *std::max_element(res.foci_uniformity.begin(), res.foci_uniformity.end())}};
  res.report.check("foci_pass_fraction", res.foci_pass_fraction, ">=", 0.9);
  return res;
}

// ---------------------------------------------------------------------------

RunReport run_render(const ExperimentConfig& config, const RunOptions& options) {
  RunReport rep = new_report(config, "render");
  for (ImagingMode mode : options.modes) {
    const Rig rig(config, mm_to_um(config.render.z_mm), mode);
    const PatternFn pattern = texture_pattern(config, rig);
    std::optional<DeformationField> field;
    if (config.render.indenter) {
      field = indent(make_indenter(*config.render.indenter, rig.layer_center()), rig.layer());
      rep.metrics["indenter"] = field->indenter;
      rep.metrics["normal_force_mN"] = field->normal_force_mN;
      rep.metrics["tangential_force_mN"] = field->tangential_force_mN;
    }
    const RawMosaic mosaic = rig.mosaic(pattern, field ? &*field : nullptr, 0);
    const RgbImage stitched = stitch(mosaic, rig.crop_px());
    rep.metrics[mode_name(mode)] = {{"mosaic", {mosaic.rows, mosaic.cols}},
                                    {"stitched_size", {stitched.cols(), stitched.rows()}}};
    if (!options.out_dir.empty()) {
      const auto dir = options.modes.size() > 1 ? options.out_dir / mode_name(mode) : options.out_dir;
      for (int r = 0; r < mosaic.rows; ++r)
        for (int c = 0; c < mosaic.cols; ++c)
          write_ppm(dir / ("unit_" + std::to_string(r) + "_" + std::to_string(c) + ".ppm"), mosaic.tile(r, c),
                    config.render.bit_depth);
      write_ppm(dir / frame_name("mosaic", 0, "ppm"), mosaic.assemble(), config.render.bit_depth);
      write_ppm(dir / frame_name("stitched", 0, "ppm"), stitched, config.render.bit_depth);
    }
  }
  return rep;
}

RunReport run_stitch(const ExperimentConfig& config, const RunOptions& options) {
  if (config.stitch.input.empty()) throw ConfigError("stitch.input is required");
  RunReport rep = new_report(config, "stitch");
  RgbImage raw;
  try {
    raw = read_ppm(config.stitch.input);
  } catch (const std::runtime_error& e) {
    throw PipelineError(e.what());
  }
  const RawMosaic mosaic = RawMosaic::split(raw, config.device.rows, config.device.cols);
  const RgbImage out = stitch(mosaic, config.sensor.crop_px);
  rep.metrics["stitched_size"] = {out.cols(), out.rows()};
  if (!options.out_dir.empty()) write_ppm(options.out_dir / frame_name("stitched", 0, "ppm"), out);
  return rep;
}

RunReport run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const std::string& e = config.experiment;
  RunReport rep;
  if (e == "sweep-z") rep = run_sweep_z(config, options).report;
  else if (e == "sweep-xy") rep = run_sweep_xy(config, options).report;
  else if (e == "indent-normal") rep = run_indent_normal(config, options).report;
  else if (e == "indent-tangential") rep = run_indent_tangential(config, options).report;
  else if (e == "depth-demo") rep = run_depth_demo(config, options).report;
  else if (e == "metrology") rep = run_metrology(config, options).report;
  else if (e == "render") rep = run_render(config, options);
  else if (e == "stitch") rep = run_stitch(config, options);
  else throw ConfigError("unknown experiment '" + e + "'");
  if (!options.out_dir.empty()) write_json(options.out_dir / "summary.json", rep.to_json());
  return rep;
}

}  // namespace mlat
