#pragma once

#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spectra/core/manifest.hpp"
#include "spectra/core/pfm.hpp"
#include "spectra/core/png.hpp"
#include "spectra/enhancement/contrast.hpp"
#include "spectra/enhancement/curvature.hpp"
#include "spectra/photometric/highlight.hpp"
#include "spectra/registration/align.hpp"
#include "spectra/service/registry.hpp"
#include "spectra/service/render.hpp"
#include "spectra/service/request.hpp"
#include "spectra/service/server.hpp"
#include "spectra/synth/preset.hpp"
#include "spectra/synth/report.hpp"

namespace spectra::service {

namespace cli {

inline constexpr int kUsage = 2;
inline constexpr int kInvalid = 3;
inline constexpr int kLoad = 4;
inline constexpr int kFailure = 1;

enum class FlagType { number, text, numbers, list, boolean };

struct FlagSpec {
  const char* key;
  FlagType type;
  const char* help;
};

inline std::string flag_name(const std::string& key) {
  std::string s = key;
  std::replace(s.begin(), s.end(), '_', '-');
  return "--" + s;
}

inline std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);) out.push_back(item);
  return out;
}

inline std::vector<double> parse_numbers(const std::string& s, const std::string& flag) {
  std::vector<double> out;
  for (const auto& item : split(s)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ValidationError(flag, "'" + s + "' is not a comma-separated number list");
    out.push_back(v);
  }
  return out;
}

inline LightDirection parse_light(const std::string& s, const std::string& flag) {
  const auto v = parse_numbers(s, flag);
  if (v.size() != 3 || !(norm(Vec3{v[0], v[1], v[2]}) > 0.0))
    throw ValidationError(flag, "expected a non-zero vector x,y,z");
  return LightDirection::normalize({v[0], v[1], v[2]});
}

/// Command-line flags mirroring one render mode's parameter record. Values are collected as
/// JSON so the same validation as the HTTP service applies.
class ModeFlags {
public:
  ModeFlags(CLI::App* app, std::vector<FlagSpec> specs) : specs_(std::move(specs)) {
    for (const auto& s : specs_) {
      const std::string name = flag_name(s.key);
      if (s.type == FlagType::boolean) {
        bools_.push_back(false);
        opts_.push_back(app->add_flag(name + ",!--no-" + name.substr(2), bools_.back(), s.help));
        texts_.emplace_back();
      } else {
        texts_.emplace_back();
        opts_.push_back(app->add_option(name, texts_.back(), s.help));
        bools_.push_back(false);
      }
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      if (opts_[i]->count() == 0) continue;
      const auto& s = specs_[i];
      const std::string flag = flag_name(s.key);
      const std::string& t = texts_[i];
      switch (s.type) {
        case FlagType::number: {
          const auto v = parse_numbers(t, flag);
          if (v.size() != 1) throw ValidationError(flag, "expected one number");
          j[s.key] = v[0];
          break;
        }
        case FlagType::text: j[s.key] = t; break;
        case FlagType::numbers: j[s.key] = parse_numbers(t, flag); break;
        case FlagType::list: j[s.key] = split(t); break;
        case FlagType::boolean: j[s.key] = bools_[i]; break;
      }
    }
    if (j.contains("focus_region")) {
      std::vector<int> r;
      for (double v : j["focus_region"].get<std::vector<double>>()) r.push_back(static_cast<int>(v));
      j["focus_region"] = r;
    }
    return j;
  }

private:
  std::vector<FlagSpec> specs_;
  std::vector<CLI::Option*> opts_;
  std::deque<std::string> texts_;
  std::deque<bool> bools_;
};

inline std::vector<FlagSpec> pyramid_flags() {
  return {{"levels", FlagType::number, "pyramid levels"}, {"base_width_px", FlagType::number, "base kernel width"}};
}

inline std::vector<FlagSpec> with(std::vector<FlagSpec> a, const std::vector<FlagSpec>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

inline std::vector<FlagSpec> sbs_flags() {
  return with(pyramid_flags(),
              {{"a", FlagType::number, "detail amplification"},
               {"f", FlagType::number, "frequency emphasis in [-1, 1]"},
               {"r", FlagType::number, "contrast window radius"},
               {"th", FlagType::number, "contrast threshold"},
               {"th_curvature", FlagType::number, "curvature threshold"},
               {"strategy", FlagType::text, "enhancement_map|multilight|focus|static_principal"},
               {"light", FlagType::numbers, "global light x,y,z"},
               {"combine", FlagType::text, "narrow|broad"},
               {"reselect_per_level", FlagType::boolean, "select the light per level"},
               {"clamp_dots", FlagType::boolean, "clamp n.l at zero"},
               {"principal_elevation_deg", FlagType::number, "principal light elevation"},
               {"focus_azimuths", FlagType::number, "focus grid azimuths"},
               {"focus_elevations", FlagType::number, "focus grid elevations"},
               {"focus_region", FlagType::numbers, "x0,y0,x1,y1"},
               {"blend", FlagType::number, "NIR background blend"},
               {"layered_color", FlagType::boolean, "layered color output"},
               {"nir", FlagType::list, "near-infrared band labels"}});
}

inline std::vector<FlagSpec> curvature_flags() {
  return with(pyramid_flags(), {{"Q", FlagType::number, "curvature gain"},
                                {"measure", FlagType::text, "mean|normal"},
                                {"weights", FlagType::numbers, "per-level weights"},
                                {"th_curvature", FlagType::number, "curvature threshold"},
                                {"nir", FlagType::list, "near-infrared band labels"}});
}

inline std::vector<FlagSpec> lines_flags() {
  return {{"kind", FlagType::text, "suggestive|discontinuity|principal"},
          {"band", FlagType::text, "band label"},
          {"mean_radius", FlagType::number, "mean filter radius"},
          {"neighborhood", FlagType::number, "odd neighborhood size"},
          {"darker_fraction", FlagType::number, "brighter-neighbor fraction"},
          {"view_threshold", FlagType::number, "view threshold"},
          {"normal_threshold", FlagType::number, "normal threshold"},
          {"literal_darker", FlagType::boolean, "literal darker-neighbor reading"},
          {"strict_minimum", FlagType::boolean, "require a neighborhood minimum"},
          {"curvature_floor", FlagType::number, "smallest |k1| for principal lines"}};
}

inline std::vector<FlagSpec> toon_flags() {
  return {{"k", FlagType::number, "quantization levels"},
          {"blend", FlagType::numbers, "blend color r,g,b"},
          {"light", FlagType::numbers, "light x,y,z"},
          {"max_iterations", FlagType::number, "k-means iterations"},
          {"passes", FlagType::number, "bilateral passes"},
          {"nir", FlagType::list, "near-infrared band labels"}};
}

/// Registry and id for a dataset given by its manifest.json path.
inline std::pair<std::filesystem::path, std::string> locate(const std::filesystem::path& manifest) {
  const auto abs = std::filesystem::absolute(manifest);
  if (abs.filename() != "manifest.json") throw ValidationError("--manifest", "must name a manifest.json file");
  if (!std::filesystem::exists(abs)) throw LoadError(abs.string() + ": no such file");
  const auto dir = abs.parent_path();
  const std::string id = dir.filename().string();
  if (!DatasetRegistry::valid_id(id)) throw ValidationError("--manifest", "dataset directory name '" + id + "' is not a valid id");
  return {dir.parent_path(), id};
}

inline void write_rendered(const RenderedImage& img, const std::string& png_path, const std::string& pfm_path) {
  pfm::write_file(png_path, encode_image(img, OutputFormat::png));
  if (!pfm_path.empty()) pfm::write_file(pfm_path, encode_image(img, OutputFormat::pfm));
}

inline GrayImage mean_ev0(const SpectralStack& s, const std::string& band) {
  const auto lights = s.lights_for(band);
  if (lights.empty()) throw ParameterError("band '" + band + "' has no images");
  GrayImage out(s.width(), s.height(), 0.0f);
  for (int l : lights) {
    const auto& img = s.image(band, l, 0);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += img[i] / static_cast<float>(lights.size());
  }
  return out;
}

inline void write_field(const std::filesystem::path& path, const registration::DisplacementField& f) {
  RgbImage img(f.width(), f.height());
  for (std::size_t i = 0; i < f.size(); ++i) img[i] = {static_cast<float>(f[i].x), static_cast<float>(f[i].y), 0.0f};
  pfm::write(path, img);
}

inline void echo_effective(const CLI::App* sub, std::ostream& err) {
  err << "effective " << sub->get_name() << " options:\n" << sub->config_to_str(true, false);
}

} // namespace cli

/// Runs the command line. Output and diagnostics go to the given streams; the exit code is
/// 0 on success, 2 on usage errors, 3 on invalid parameters, 4 on unreadable inputs.
inline int cli_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  using namespace cli;
  CLI::App app{"Multispectral normal reconstruction and stylized rendering", "spectra"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "echo effective option values");

  // compute-normals
  auto* cn = app.add_subcommand("compute-normals", "recover a band's normal map");
  std::string cn_manifest, cn_band, cn_out, cn_png;
  double th_ev = 0.13;
  bool no_highlights = false;
  cn->add_option("--manifest", cn_manifest, "dataset manifest.json")->required();
  cn->add_option("--band", cn_band, "band label")->required();
  cn->add_option("--th-ev", th_ev, "coherence threshold")->capture_default_str();
  cn->add_flag("--no-highlights", no_highlights, "skip highlight removal");
  cn->add_option("--out", cn_out, "normal map PFM")->required();
  cn->add_option("--png", cn_png, "optional color-coded PNG preview");

  // register
  auto* rg = app.add_subcommand("register", "align a band to the reference band");
  std::string rg_manifest, rg_ref = "vis", rg_band, rg_h, rg_field;
  rg->add_option("--manifest", rg_manifest, "dataset manifest.json")->required();
  rg->add_option("--ref", rg_ref, "reference band")->capture_default_str();
  rg->add_option("--band", rg_band, "band to align")->required();
  rg->add_option("--out-h", rg_h, "homography JSON")->required();
  rg->add_option("--out-field", rg_field, "local displacement field PFM");

  // enhance
  auto* en = app.add_subcommand("enhance", "compute an enhancement map");
  std::string en_mode = "dynamic", en_vis, en_nir, en_l = "-0.37,-0.47,0.8", en_out, en_png;
  int en_r = 13;
  std::optional<double> en_th;
  en->add_option("--mode", en_mode, "dynamic|static")->check(CLI::IsMember({"dynamic", "static"}))->capture_default_str();
  en->add_option("--vis", en_vis, "visible normal map PFM")->required();
  en->add_option("--nir", en_nir, "near-infrared normal map PFM")->required();
  en->add_option("--l", en_l, "light x,y,z (dynamic)")->capture_default_str();
  en->add_option("--r", en_r, "contrast window radius (dynamic)")->capture_default_str();
  en->add_option("--th", en_th, "threshold (0.1 dynamic, 0.02 static)");
  en->add_option("--out", en_out, "C map PFM")->required();
  en->add_option("--png", en_png, "optional PNG");

  // shade
  auto* sh = app.add_subcommand("shade", "stylized rendering");
  sh->require_subcommand(1);
  struct ShadeMode {
    RenderMode mode;
    CLI::App* app;
    std::unique_ptr<ModeFlags> flags;
    std::string manifest, out, pfm;
  };
  std::vector<std::unique_ptr<ShadeMode>> shade_modes;
  auto add_mode = [&](const char* name, RenderMode mode, std::vector<FlagSpec> specs, const char* help) {
    auto m = std::make_unique<ShadeMode>();
    m->mode = mode;
    m->app = sh->add_subcommand(name, help);
    m->app->add_option("--manifest", m->manifest, "dataset manifest.json")->required();
    m->app->add_option("--out", m->out, "output PNG")->required();
    m->app->add_option("--pfm", m->pfm, "optional float PFM");
    m->flags = std::make_unique<ModeFlags>(m->app, std::move(specs));
    shade_modes.push_back(std::move(m));
  };
  add_mode("sbs", RenderMode::sbs, sbs_flags(), "spectral band shading");
  add_mode("curvature", RenderMode::curvature, curvature_flags(), "multiscale curvature shading");
  add_mode("lines", RenderMode::lines, lines_flags(), "line drawings");
  add_mode("toon", RenderMode::toon, toon_flags(), "NIR blend toon shading");

  // mlic
  auto* ml = app.add_subcommand("mlic", "bispectral multilight image collection render");
  std::string ml_manifest, ml_l = "0,0,1", ml_out, ml_pfm;
  double beta = 0.5;
  int scales = mlic::MlicParams{}.scales;
  bool traditional = false;
  ml->add_option("--manifest", ml_manifest, "dataset manifest.json")->required();
  ml->add_option("--beta", beta, "base weight in (0, 1]")->capture_default_str();
  ml->add_option("--l", ml_l, "input light x,y,z")->capture_default_str();
  ml->add_option("--scales", scales, "decomposition levels")->capture_default_str();
  ml->add_flag("--traditional", traditional, "visible-only decomposition");
  ml->add_option("--out", ml_out, "output PNG")->required();
  ml->add_option("--pfm", ml_pfm, "optional float PFM");

  // synth
  auto* sy = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string preset = "layered-sphere", sy_out;
  synth::LayeredSpherePreset sp;
  sy->add_option("--preset", preset, "dataset preset")->check(CLI::IsMember({"layered-sphere"}))->capture_default_str();
  sy->add_option("--out", sy_out, "output directory")->required();
  sy->add_option("--radius", sp.radius_px, "sphere radius in pixels")->capture_default_str();
  sy->add_option("--grooves", sp.groove_rings, "groove ring count")->capture_default_str();
  sy->add_option("--paint", sp.paint_thickness_px, "paint thickness in pixels")->capture_default_str();
  sy->add_option("--noise", sp.render.noise_sigma, "Gaussian noise sigma")->capture_default_str();
  sy->add_option("--specular", sp.render.specular_strength, "Phong lobe strength")->capture_default_str();
  sy->add_option("--seed", sp.render.seed, "noise seed")->capture_default_str();

  // validate
  auto* va = app.add_subcommand("validate", "reconstruct a synthetic dataset and report angular error");
  std::string va_dataset, va_report;
  bool va_highlights = false;
  va->add_option("--dataset", va_dataset, "dataset directory")->required();
  va->add_option("--report", va_report, "report JSON")->required();
  va->add_flag("--highlights", va_highlights, "run highlight removal before solving");

  // serve
  auto* sv = app.add_subcommand("serve", "HTTP render service");
  std::string bind = "127.0.0.1:8080", data_dir;
  bool no_cache = false;
  sv->add_option("--bind", bind, "host:port")->capture_default_str();
  sv->add_option("--data-dir", data_dir, "dataset root (default SPECTRA_DATA_DIR)");
  sv->add_flag("--no-cache", no_cache, "disable the derived-product cache");

  if (argc > 1 && argv[1][0] != '-' && !app.get_subcommand_no_throw(argv[1])) {
    err << "usage error: unknown subcommand '" << argv[1] << "'\n" << app.help();
    return kUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  auto fail = [&](int code, const char* kind, const std::string& msg, const std::vector<FieldError>& fields = {}) {
    nlohmann::json j{{"error", kind}, {"message", msg}};
    for (const auto& f : fields) j["fields"].push_back({{"field", f.field}, {"message", f.message}});
    err << j.dump() << "\n";
    return code;
  };

  try {
    if (verbose)
      for (auto* sub : app.get_subcommands()) {
        echo_effective(sub, err);
        for (auto* inner : sub->get_subcommands()) echo_effective(inner, err);
      }

    if (cn->parsed()) {
      const SpectralStack s = load_dataset(std::filesystem::path(cn_manifest));
      NormalMap n;
      if (no_highlights) {
        n = photometric::solve_normals(s, cn_band);
      } else {
        photometric::HighlightParams hp;
        hp.th_ev = th_ev;
        n = photometric::remove_highlights(s, cn_band, hp).normals;
      }
      pfm::write(cn_out, n);
      if (!cn_png.empty()) {
        RgbImage vis(n.width(), n.height());
        for (std::size_t i = 0; i < vis.size(); ++i) {
          const Vec3 v = n.normals[i];
          vis[i] = n.mask[i] ? Color3{static_cast<float>(0.5 + 0.5 * v.x), static_cast<float>(0.5 + 0.5 * v.y),
                                      static_cast<float>(0.5 + 0.5 * v.z)}
                             : Color3{0, 0, 0};
        }
        png::write(cn_png, vis);
      }
      out << "normals: " << n.valid_count() << " valid pixels -> " << cn_out << "\n";
    } else if (rg->parsed()) {
      const SpectralStack s = load_dataset(std::filesystem::path(rg_manifest));
      const GrayImage ref = mean_ev0(s, rg_ref), mov = mean_ev0(s, rg_band);
      const auto g = registration::global_align(mov, ref);
      nlohmann::json j{{"reference", rg_ref}, {"band", rg_band}, {"residual", g.residual}, {"H", nlohmann::json::array()}};
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) j["H"].push_back(g.H.m(r, c));
      std::ofstream(rg_h) << j.dump(2) << "\n";
      if (!rg_field.empty()) write_field(rg_field, registration::local_align(mov, ref, g.H));
      out << "homography -> " << rg_h << "\n";
    } else if (en->parsed()) {
      const NormalMap nv = pfm::read_normals(en_vis), nn = pfm::read_normals(en_nir);
      enhancement::EnhancementMap m;
      if (en_mode == "dynamic") {
        m = enhancement::dynamic_enhancement(nv, nn, parse_light(en_l, "--l"), en_r, en_th.value_or(0.1));
      } else {
        m = enhancement::static_enhancement(enhancement::curvature_maps(nv), enhancement::curvature_maps(nn),
                                            en_th.value_or(0.02));
      }
      pfm::write(en_out, m.C);
      if (!en_png.empty()) png::write(en_png, m.C);
      out << "enhancement map -> " << en_out << "\n";
    } else if (sh->parsed()) {
      for (const auto& m : shade_modes) {
        if (!m->app->parsed()) continue;
        const auto [root, id] = locate(m->manifest);
        DatasetRegistry reg(root);
        const auto req = parse_render_request({{"dataset", id}, {"mode", to_string(m->mode)}, {"params", m->flags->to_json()}});
        if (verbose) err << "effective " << to_string(m->mode) << " parameters: " << effective_params(m->mode, req.params).dump() << "\n";
        write_rendered(render_image(reg, req), m->out, m->pfm);
        out << to_string(m->mode) << " -> " << m->out << "\n";
      }
    } else if (ml->parsed()) {
      const auto [root, id] = locate(ml_manifest);
      DatasetRegistry reg(root);
      const auto l = parse_light(ml_l, "--l");
      const auto req = parse_render_request({{"dataset", id},
                                             {"mode", "mlic"},
                                             {"params",
                                              {{"beta", beta},
                                               {"scales", scales},
                                               {"traditional", traditional},
                                               {"light", {l.x(), l.y(), l.z()}}}}});
      if (verbose) err << "effective mlic parameters: " << effective_params(RenderMode::mlic, req.params).dump() << "\n";
      write_rendered(render_image(reg, req), ml_out, ml_pfm);
      out << "mlic -> " << ml_out << "\n";
    } else if (sy->parsed()) {
      const auto m = synth::write_layered_sphere(sy_out, sp);
      out << "synthetic dataset '" << m.dataset << "' with " << m.files.size() << " images -> " << sy_out << "\n";
    } else if (va->parsed()) {
      const std::filesystem::path dir(va_dataset);
      const Manifest m = read_manifest(dir / "manifest.json");
      const SpectralStack s = load_dataset(m);
      if (!m.extras.contains("gt_top") || !m.extras.contains("gt_bottom"))
        throw ValidationError("--dataset", "dataset has no ground-truth normal maps");
      const NormalMap top = pfm::read_normals(dir / m.extras["gt_top"].get<std::string>());
      const NormalMap bottom = pfm::read_normals(dir / m.extras["gt_bottom"].get<std::string>());
      nlohmann::json report{{"dataset", m.dataset}, {"bands", nlohmann::json::object()}};
      const auto report_path = std::filesystem::path(va_report);
      for (const auto& b : m.bands) {
        const double tau = m.extras.contains("tau") && m.extras["tau"].contains(b.label)
                               ? m.extras["tau"][b.label].get<double>()
                               : 0.0;
        const NormalMap n = va_highlights ? photometric::remove_highlights(s, b.label).normals
                                          : photometric::solve_normals(s, b.label);
        const bool lower = tau >= 0.5;
        const auto rep = synth::angular_error(n, lower ? bottom : top);
        const auto other = synth::angular_error(n, lower ? top : bottom);
        const auto heat = report_path.parent_path() / (report_path.stem().string() + "_" + b.label + "_heat.png");
        png::write(heat, rep.heat_map);
        report["bands"][b.label] = {{"tau", tau},
                                    {"layer", lower ? "gt_bottom" : "gt_top"},
                                    {"mean_deg", rep.mean},
                                    {"median_deg", rep.median},
                                    {"max_deg", rep.max},
                                    {"pixels", rep.count},
                                    {"other_layer_mean_deg", other.mean},
                                    {"heat_map", heat.filename().string()}};
      }
      std::ofstream(report_path) << report.dump(2) << "\n";
      out << "report -> " << va_report << "\n";
    } else if (sv->parsed()) {
      const auto colon = bind.rfind(':');
      int port = -1;
      if (colon != std::string::npos) {
        try {
          port = std::stoi(bind.substr(colon + 1));
        } catch (const std::exception&) {
        }
      }
      if (colon == std::string::npos || port < 0 || port > 65535) {
        err << "usage error: --bind must be host:port\n";
        return kUsage;
      }
      DatasetRegistry reg(data_dir.empty() ? DatasetRegistry::env_root() : std::filesystem::path(data_dir), !no_cache);
      httplib::Server srv;
      install_routes(srv, reg);
      out << "serving " << reg.root().string() << " on " << bind << std::endl;
      if (!srv.listen(bind.substr(0, colon), port)) return fail(kFailure, "bind", "cannot listen on " + bind);
    }
  } catch (const ValidationError& e) {
    return fail(kInvalid, "invalid-parameters", e.what(), e.errors());
  } catch (const ParameterError& e) {
    return fail(kInvalid, "invalid-parameters", e.what());
  } catch (const NotFoundError& e) {
    return fail(kLoad, "not-found", e.what());
  } catch (const LoadError& e) {
    return fail(kLoad, "load", e.what());
  } catch (const StructuralError& e) {
    return fail(kLoad, "structure", e.what());
  } catch (const std::exception& e) {
    return fail(kFailure, "failure", e.what());
  }
  return 0;
}

} // namespace spectra::service
