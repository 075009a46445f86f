#pragma once

#include <memory>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "spectra/service/registry.hpp"
#include "spectra/service/render.hpp"
#include "spectra/service/request.hpp"

namespace spectra::service {

inline nlohmann::json light_json(const LightDirection& l) {
  return {{"vector", {l.x(), l.y(), l.z()}},
          {"azimuth_deg", std::atan2(l.y(), l.x()) * 180.0 / kPi},
          {"elevation_deg", std::asin(std::clamp(l.z(), -1.0, 1.0)) * 180.0 / kPi}};
}

inline nlohmann::json dataset_summary(const std::string& id, const Manifest& m, bool full) {
  nlohmann::json j{{"id", id}, {"name", m.dataset}, {"band_count", m.bands.size()}, {"light_count", m.lights.size()}};
  if (!full) return j;
  j["attribution"] = m.attribution;
  j["bands"] = nlohmann::json::array();
  for (const auto& b : m.bands)
    j["bands"].push_back({{"label", b.label}, {"kind", to_string(b.kind)}, {"wavelength_nm", {b.low_nm, b.high_nm}}});
  j["lights"] = nlohmann::json::array();
  for (const auto& l : m.lights) j["lights"].push_back(light_json(l));
  j["exposures"] = m.exposures;
  j["file_count"] = m.files.size();
  return j;
}

namespace detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& message,
                       const std::vector<FieldError>& fields = {}) {
  nlohmann::json body{{"error", message}};
  if (!fields.empty()) {
    body["fields"] = nlohmann::json::array();
    for (const auto& f : fields) body["fields"].push_back({{"field", f.field}, {"message", f.message}});
  }
  send_json(res, status, body);
}

} // namespace detail

/// Installs the dataset and render routes on a server. The registry must outlive it.
inline void install_routes(httplib::Server& srv, DatasetRegistry& reg) {
  srv.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    detail::send_json(res, 200, {{"status", "ok"}});
  });

  srv.Get("/datasets", [&reg](const httplib::Request&, httplib::Response& res) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& id : reg.ids()) {
      try {
        list.push_back(dataset_summary(id, reg.manifest(id), false));
      } catch (const Error& e) {
        list.push_back({{"id", id}, {"error", e.what()}});
      }
    }
    detail::send_json(res, 200, list);
  });

  srv.Get(R"(/datasets/([^/]+))", [&reg](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    try {
      detail::send_json(res, 200, dataset_summary(id, reg.manifest(id), true));
    } catch (const NotFoundError& e) {
      detail::send_error(res, 404, e.what());
    } catch (const Error& e) {
      detail::send_error(res, 500, e.what());
    }
  });

  srv.Post("/render", [&reg](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
      return detail::send_error(res, 400, std::string("malformed JSON: ") + e.what());
    }
    try {
      const RenderRequest r = parse_render_request(body);
      const RenderOutput out = render(reg, r);
      res.status = 200;
      res.set_content(out.bytes, out.content_type);
    } catch (const ValidationError& e) {
      detail::send_error(res, 422, "invalid parameters", e.errors());
    } catch (const NotFoundError& e) {
      detail::send_error(res, 404, e.what());
    } catch (const ParameterError& e) {
      detail::send_error(res, 422, e.what());
    } catch (const std::exception& e) {
      detail::send_error(res, 500, e.what());
    }
  });

  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.get_header_value("Content-Type") == "application/json") return;
    detail::send_error(res, res.status, res.status == 404 ? "not found" : "request failed");
  });
}

} // namespace spectra::service
