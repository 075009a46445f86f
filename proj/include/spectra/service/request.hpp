#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spectra/core/error.hpp"
#include "spectra/core/pyramid.hpp"
#include "spectra/core/types.hpp"
#include "spectra/mlic/mlic.hpp"
#include "spectra/shading/curvature_shade.hpp"
#include "spectra/shading/lines.hpp"
#include "spectra/shading/sbs.hpp"
#include "spectra/shading/toon.hpp"

namespace spectra::service {

enum class RenderMode { sbs, curvature, lines, toon, mlic, lambertian };
enum class OutputFormat { png, pfm };
enum class LineKind { suggestive, discontinuity, principal };

inline const char* to_string(RenderMode m) {
  switch (m) {
    case RenderMode::sbs: return "sbs";
    case RenderMode::curvature: return "curvature";
    case RenderMode::lines: return "lines";
    case RenderMode::toon: return "toon";
    case RenderMode::mlic: return "mlic";
    case RenderMode::lambertian: return "lambertian";
  }
  return "?";
}

struct FieldError {
  std::string field;
  std::string message;
};

/// Invalid request parameters, one entry per offending field.
class ValidationError : public ParameterError {
public:
  explicit ValidationError(std::vector<FieldError> errors)
      : ParameterError(summary(errors)), errors_(std::move(errors)) {}
  ValidationError(std::string field, std::string message)
      : ValidationError(std::vector<FieldError>{{std::move(field), std::move(message)}}) {}
  const std::vector<FieldError>& errors() const { return errors_; }

private:
  static std::string summary(const std::vector<FieldError>& errors) {
    std::string s = "invalid parameters:";
    for (const auto& e : errors) s += " " + e.field + " (" + e.message + ")";
    return s;
  }
  std::vector<FieldError> errors_;
};

/// Typed parameters for every mode. Only the record matching the mode is meaningful.
struct RenderParams {
  PyramidParams pyramid{};
  shading::SbsParams sbs{};
  bool layered_color = false;
  shading::CurvatureShadeParams curvature{};
  double th_curvature = 0.02;
  shading::LineParams lines{};
  LineKind line_kind = LineKind::suggestive;
  shading::ToonParams toon{};
  mlic::MlicParams mlic{};
  LightDirection light = LightDirection::normalize({-0.37, -0.47, 0.8});
  /// Band used by single-band modes; empty picks the visible band.
  std::string band;
  /// Near-infrared bands in use; empty picks every nir band of the dataset.
  std::vector<std::string> nir;
  /// Focus-search rectangle [x0, y0, x1, y1), half-open, in pixels.
  std::optional<std::array<int, 4>> focus_region;
};

struct RenderRequest {
  std::string dataset;
  RenderMode mode = RenderMode::sbs;
  OutputFormat format = OutputFormat::png;
  RenderParams params;
  /// Parameters as received, kept for cache keys and echoing.
  nlohmann::json raw = nlohmann::json::object();
};

namespace detail {

/// Reads fields out of a JSON object, collecting errors instead of throwing.
class FieldReader {
public:
  FieldReader(const nlohmann::json& obj, std::vector<FieldError>& errors) : obj_(obj), errors_(errors) {}

  template <class T>
  void number(const char* key, T& out, const std::function<bool(double)>& ok, const char* rule) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    const auto& v = obj_.at(key);
    if (!v.is_number()) return fail(key, "must be a number");
    const double d = v.get<double>();
    if (std::is_integral_v<T> && d != std::floor(d)) return fail(key, "must be an integer");
    if (!std::isfinite(d) || !ok(d)) return fail(key, rule);
    out = static_cast<T>(d);
  }

  void boolean(const char* key, bool& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    if (!obj_.at(key).is_boolean()) return fail(key, "must be a boolean");
    out = obj_.at(key).get<bool>();
  }

  void string(const char* key, std::string& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    if (!obj_.at(key).is_string()) return fail(key, "must be a string");
    out = obj_.at(key).get<std::string>();
  }

  template <class E>
  void choice(const char* key, E& out, const std::vector<std::pair<const char*, E>>& options) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    std::string allowed;
    for (const auto& [name, value] : options) allowed += (allowed.empty() ? "" : "|") + std::string(name);
    if (!obj_.at(key).is_string()) return fail(key, "must be one of " + allowed);
    const auto s = obj_.at(key).get<std::string>();
    for (const auto& [name, value] : options)
      if (s == name) {
        out = value;
        return;
      }
    fail(key, "must be one of " + allowed);
  }

  void light(const char* key, LightDirection& out) {
    std::array<double, 3> v{};
    if (!triple(key, v, [](double) { return true; }, "must be [x, y, z] numbers")) return;
    const Vec3 d{v[0], v[1], v[2]};
    if (!(norm(d) > 0.0)) return fail(key, "must be a non-zero vector");
    out = LightDirection::normalize(d);
  }

  void color(const char* key, Color3& out) {
    std::array<double, 3> v{};
    if (!triple(key, v, [](double d) { return d >= 0.0 && d <= 1.0; }, "must be three numbers in [0, 1]")) return;
    out = {static_cast<float>(v[0]), static_cast<float>(v[1]), static_cast<float>(v[2])};
  }

  void numbers(const char* key, std::vector<double>& out, const std::function<bool(double)>& ok, const char* rule) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    const auto& v = obj_.at(key);
    if (!v.is_array()) return fail(key, rule);
    std::vector<double> tmp;
    for (const auto& e : v) {
      if (!e.is_number() || !std::isfinite(e.get<double>()) || !ok(e.get<double>())) return fail(key, rule);
      tmp.push_back(e.get<double>());
    }
    out = std::move(tmp);
  }

  void strings(const char* key, std::vector<std::string>& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    const auto& v = obj_.at(key);
    if (!v.is_array()) return fail(key, "must be a list of strings");
    std::vector<std::string> tmp;
    for (const auto& e : v) {
      if (!e.is_string()) return fail(key, "must be a list of strings");
      tmp.push_back(e.get<std::string>());
    }
    out = std::move(tmp);
  }

  void region(const char* key, std::optional<std::array<int, 4>>& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    const auto& v = obj_.at(key);
    const char* rule = "must be [x0, y0, x1, y1] with x0 < x1 and y0 < y1";
    if (!v.is_array() || v.size() != 4) return fail(key, rule);
    std::array<int, 4> r{};
    for (std::size_t i = 0; i < 4; ++i) {
      if (!v[i].is_number_integer()) return fail(key, rule);
      r[i] = v[i].get<int>();
    }
    if (r[0] >= r[2] || r[1] >= r[3]) return fail(key, rule);
    out = r;
  }

  void reject_unknown() {
    for (const auto& [k, v] : obj_.items())
      if (!seen_.count(k)) fail(k, "unknown parameter");
  }

  void fail(const std::string& key, const std::string& msg) { errors_.push_back({key, msg}); }

private:
  bool triple(const char* key, std::array<double, 3>& v, const std::function<bool(double)>& ok, const char* rule) {
    seen_.insert(key);
    if (!obj_.contains(key)) return false;
    const auto& j = obj_.at(key);
    if (!j.is_array() || j.size() != 3) return fail(key, rule), false;
    for (std::size_t i = 0; i < 3; ++i) {
      if (!j[i].is_number() || !std::isfinite(j[i].get<double>()) || !ok(j[i].get<double>()))
        return fail(key, rule), false;
      v[i] = j[i].get<double>();
    }
    return true;
  }

  const nlohmann::json& obj_;
  std::vector<FieldError>& errors_;
  std::set<std::string> seen_;
};

inline bool positive(double v) { return v > 0.0; }
inline bool non_negative(double v) { return v >= 0.0; }
inline bool unit_interval(double v) { return v > 0.0 && v <= 1.0; }

inline void read_pyramid(FieldReader& r, PyramidParams& p) {
  r.number("levels", p.levels, [](double v) { return v >= 1 && v <= 12; }, "must be an integer in [1, 12]");
  r.number("base_width_px", p.base_width_px, [](double v) { return v >= 1; }, "must be >= 1");
}

inline void read_sbs(FieldReader& r, RenderParams& out) {
  auto& p = out.sbs;
  read_pyramid(r, out.pyramid);
  r.number("a", p.a, positive, "must be > 0");
  r.number("f", p.f, [](double v) { return v >= -1.0 && v <= 1.0; }, "must be in [-1, 1]");
  r.number("r", p.r, [](double v) { return v >= 1; }, "must be an integer >= 1");
  r.number("th", p.th, non_negative, "must be >= 0");
  r.number("th_curvature", p.th_curvature, non_negative, "must be >= 0");
  r.choice<shading::LightStrategy>("strategy", p.strategy,
                                   {{"enhancement_map", shading::LightStrategy::enhancement_map},
                                    {"multilight", shading::LightStrategy::multilight},
                                    {"focus", shading::LightStrategy::focus},
                                    {"static_principal", shading::LightStrategy::static_principal}});
  r.light("light", p.l_global);
  r.choice<shading::BandCombine>("combine", p.combine,
                                 {{"narrow", shading::BandCombine::narrow}, {"broad", shading::BandCombine::broad}});
  r.boolean("reselect_per_level", p.reselect_per_level);
  r.boolean("clamp_dots", p.clamp_dots);
  r.number("principal_elevation_deg", p.principal_elevation_deg, [](double v) { return v > 0.0 && v <= 90.0; },
           "must be in (0, 90]");
  r.number("focus_azimuths", p.focus_azimuths, [](double v) { return v >= 1 && v <= 360; }, "must be in [1, 360]");
  r.number("focus_elevations", p.focus_elevations, [](double v) { return v >= 1 && v <= 90; }, "must be in [1, 90]");
  r.number("blend", p.blend, [](double v) { return v >= 0.0 && v <= 1.0; }, "must be in [0, 1]");
  r.boolean("layered_color", out.layered_color);
  r.strings("nir", out.nir);
}

inline void read_curvature(FieldReader& r, RenderParams& out) {
  read_pyramid(r, out.pyramid);
  r.number("Q", out.curvature.Q, positive, "must be > 0");
  r.choice<enhancement::CurvatureMeasure>(
      "measure", out.curvature.measure,
      {{"mean", enhancement::CurvatureMeasure::mean}, {"normal", enhancement::CurvatureMeasure::normal}});
  r.numbers("weights", out.curvature.weights, non_negative, "must be a list of numbers >= 0");
  r.number("th_curvature", out.th_curvature, non_negative, "must be >= 0");
  r.strings("nir", out.nir);
}

inline void read_lines(FieldReader& r, RenderParams& out) {
  auto& p = out.lines;
  r.choice<LineKind>("kind", out.line_kind,
                     {{"suggestive", LineKind::suggestive},
                      {"discontinuity", LineKind::discontinuity},
                      {"principal", LineKind::principal}});
  r.string("band", out.band);
  r.number("mean_radius", p.mean_radius, non_negative, "must be an integer >= 0");
  r.number("neighborhood", p.neighborhood, [](double v) { return v >= 3 && std::fmod(v, 2.0) == 1.0; },
           "must be an odd integer >= 3");
  r.number("darker_fraction", p.darker_fraction, unit_interval, "must be in (0, 1]");
  r.number("view_threshold", p.view_threshold, unit_interval, "must be in (0, 1]");
  r.number("normal_threshold", p.normal_threshold, unit_interval, "must be in (0, 1]");
  r.boolean("literal_darker", p.literal_darker);
  r.boolean("strict_minimum", p.strict_minimum);
  r.number("curvature_floor", p.curvature_floor, non_negative, "must be >= 0");
}

inline void read_toon(FieldReader& r, RenderParams& out) {
  auto& p = out.toon;
  r.number("k", p.k, [](double v) { return v >= 2 && v <= 64; }, "must be an integer in [2, 64]");
  r.color("blend", p.blend);
  r.light("light", p.light);
  r.number("max_iterations", p.max_iterations, [](double v) { return v >= 1; }, "must be an integer >= 1");
  r.number("passes", p.bilateral.passes, [](double v) { return v >= 0 && v <= 50; }, "must be an integer in [0, 50]");
  r.strings("nir", out.nir);
}

inline void read_mlic(FieldReader& r, RenderParams& out) {
  auto& p = out.mlic;
  r.number("beta", p.beta, unit_interval, "must be in (0, 1]");
  r.number("y_th", p.y_th, non_negative, "must be >= 0");
  r.light("light", p.l_input);
  r.number("noise_percentile", p.noise_percentile, [](double v) { return v >= 0.0 && v < 1.0; }, "must be in [0, 1)");
  r.number("sigma_angle_deg", p.sigma_angle_deg, positive, "must be > 0");
  r.number("scales", p.scales, [](double v) { return v >= 2 && v <= 10; }, "must be an integer in [2, 10]");
  r.number("sigma_spatial", p.sigma_spatial, positive, "must be > 0");
  r.number("sigma_range", p.sigma_range, positive, "must be > 0");
  r.boolean("traditional", p.traditional);
  r.choice<mlic::DetailWeighting>("weighting", p.weighting,
                                  {{"gradient", mlic::DetailWeighting::gradient},
                                   {"uniform", mlic::DetailWeighting::uniform}});
}

inline void read_lambertian(FieldReader& r, RenderParams& out) {
  r.light("light", out.light);
  r.string("band", out.band);
}

} // namespace detail

/// Parses the parameter object for a mode. Throws ValidationError listing every bad field.
inline RenderParams parse_params(RenderMode mode, const nlohmann::json& params) {
  std::vector<FieldError> errors;
  RenderParams out;
  if (!params.is_object()) throw ValidationError("params", "must be an object");
  detail::FieldReader r(params, errors);
  std::optional<std::array<int, 4>> region;
  switch (mode) {
    case RenderMode::sbs:
      detail::read_sbs(r, out);
      r.region("focus_region", region);
      break;
    case RenderMode::curvature: detail::read_curvature(r, out); break;
    case RenderMode::lines: detail::read_lines(r, out); break;
    case RenderMode::toon: detail::read_toon(r, out); break;
    case RenderMode::mlic: detail::read_mlic(r, out); break;
    case RenderMode::lambertian: detail::read_lambertian(r, out); break;
  }
  r.reject_unknown();
  if (!errors.empty()) throw ValidationError(std::move(errors));
  out.focus_region = region;
  return out;
}

/// Parses {"dataset", "mode", "format"?, "params"?}.
inline RenderRequest parse_render_request(const nlohmann::json& body) {
  if (!body.is_object()) throw ValidationError("body", "must be a JSON object");
  std::vector<FieldError> errors;
  RenderRequest req;
  detail::FieldReader r(body, errors);
  r.string("dataset", req.dataset);
  if (!body.contains("dataset")) errors.push_back({"dataset", "is required"});
  if (!body.contains("mode")) errors.push_back({"mode", "is required"});
  r.choice<RenderMode>("mode", req.mode,
                       {{"sbs", RenderMode::sbs},
                        {"curvature", RenderMode::curvature},
                        {"lines", RenderMode::lines},
                        {"toon", RenderMode::toon},
                        {"mlic", RenderMode::mlic},
                        {"lambertian", RenderMode::lambertian}});
  r.choice<OutputFormat>("format", req.format, {{"png", OutputFormat::png}, {"pfm", OutputFormat::pfm}});
  if (body.contains("params")) req.raw = body.at("params");
  for (const auto& [k, v] : body.items())
    if (k != "dataset" && k != "mode" && k != "format" && k != "params") errors.push_back({k, "unknown field"});
  if (!errors.empty()) throw ValidationError(std::move(errors));
  req.params = parse_params(req.mode, req.raw);
  return req;
}

namespace detail {

inline nlohmann::json vec_json(const Vec3& v) { return {v.x, v.y, v.z}; }

template <class E>
std::string enum_name(E v, const std::vector<std::pair<const char*, E>>& options) {
  for (const auto& [name, value] : options)
    if (value == v) return name;
  return "?";
}

} // namespace detail

/// Every parameter the mode will use, defaults included.
inline nlohmann::json effective_params(RenderMode mode, const RenderParams& p) {
  using nlohmann::json;
  const json pyramid{{"levels", p.pyramid.levels}, {"base_width_px", p.pyramid.base_width_px}};
  switch (mode) {
    case RenderMode::sbs: {
      const auto& s = p.sbs;
      json j = pyramid;
      j.update({{"a", s.a},
                {"f", s.f},
                {"r", s.r},
                {"th", s.th},
                {"th_curvature", s.th_curvature},
                {"strategy", detail::enum_name<shading::LightStrategy>(
                                 s.strategy, {{"enhancement_map", shading::LightStrategy::enhancement_map},
                                              {"multilight", shading::LightStrategy::multilight},
                                              {"focus", shading::LightStrategy::focus},
                                              {"static_principal", shading::LightStrategy::static_principal}})},
                {"light", detail::vec_json(s.l_global.vec())},
                {"combine", s.combine == shading::BandCombine::narrow ? "narrow" : "broad"},
                {"reselect_per_level", s.reselect_per_level},
                {"clamp_dots", s.clamp_dots},
                {"principal_elevation_deg", s.principal_elevation_deg},
                {"focus_azimuths", s.focus_azimuths},
                {"focus_elevations", s.focus_elevations},
                {"blend", s.blend},
                {"layered_color", p.layered_color},
                {"nir", p.nir}});
      if (p.focus_region) j["focus_region"] = *p.focus_region;
      return j;
    }
    case RenderMode::curvature: {
      json j = pyramid;
      j.update({{"Q", p.curvature.Q},
                {"measure", p.curvature.measure == enhancement::CurvatureMeasure::mean ? "mean" : "normal"},
                {"weights", p.curvature.weights},
                {"th_curvature", p.th_curvature},
                {"nir", p.nir}});
      return j;
    }
    case RenderMode::lines: {
      const auto& l = p.lines;
      return {{"kind", detail::enum_name<LineKind>(p.line_kind, {{"suggestive", LineKind::suggestive},
                                                                 {"discontinuity", LineKind::discontinuity},
                                                                 {"principal", LineKind::principal}})},
              {"band", p.band},
              {"mean_radius", l.mean_radius},
              {"neighborhood", l.neighborhood},
              {"darker_fraction", l.darker_fraction},
              {"view_threshold", l.view_threshold},
              {"normal_threshold", l.normal_threshold},
              {"literal_darker", l.literal_darker},
              {"strict_minimum", l.strict_minimum},
              {"curvature_floor", l.curvature_floor}};
    }
    case RenderMode::toon: {
      const auto& t = p.toon;
      return {{"k", t.k},
              {"blend", {t.blend[0], t.blend[1], t.blend[2]}},
              {"light", detail::vec_json(t.light.vec())},
              {"max_iterations", t.max_iterations},
              {"passes", t.bilateral.passes},
              {"nir", p.nir}};
    }
    case RenderMode::mlic: {
      const auto& m = p.mlic;
      return {{"beta", m.beta},
              {"y_th", m.y_th},
              {"light", detail::vec_json(m.l_input.vec())},
              {"noise_percentile", m.noise_percentile},
              {"sigma_angle_deg", m.sigma_angle_deg},
              {"scales", m.scales},
              {"sigma_spatial", m.sigma_spatial},
              {"sigma_range", m.sigma_range},
              {"traditional", m.traditional},
              {"weighting", m.weighting == mlic::DetailWeighting::gradient ? "gradient" : "uniform"}};
    }
    case RenderMode::lambertian: return {{"light", detail::vec_json(p.light.vec())}, {"band", p.band}};
  }
  return json::object();
}

} // namespace spectra::service
