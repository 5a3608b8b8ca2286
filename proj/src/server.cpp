#include "s2cr/server.hpp"

#include <httplib.h>

#include <json.hpp>

#include "s2cr/curve_io.hpp"
#include "s2cr/engine.hpp"
#include "s2cr/error.hpp"
#include "s2cr/parallel.hpp"
#include "s2cr/png_io.hpp"

namespace s2cr {
namespace {

using nlohmann::json;

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", message}}.dump(), "application/json");
}

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kDimension:
      return 422;
    case ErrorKind::kIo:
    case ErrorKind::kFormat:
      return 400;
    case ErrorKind::kNumeric:
      return 500;
  }
  return 500;
}

const std::string& require_part(const httplib::Request& req, const std::string& name) {
  if (!req.is_multipart_form_data()) {
    fail(ErrorKind::kFormat, "expected multipart/form-data");
  }
  if (!req.has_file(name)) fail(ErrorKind::kFormat, "missing form field '" + name + "'");
  return req.files.find(name)->second.content;
}

// Wraps a handler so library errors map onto HTTP status codes.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, status_for(e.kind()), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, std::string("malformed JSON: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  };
}

}  // namespace

struct ApiServer::Impl {
  HarmonizerModel model;
  ServerOptions options;
  int threads = 1;
  httplib::Server http;

  void routes() {
    http.set_payload_max_length(kMaxRequestBytes);

    http.Get("/api/health", guarded([this](const httplib::Request&, httplib::Response& res) {
      res.set_content(json{{"status", "ok"},
                           {"model_levels", model.config.levels},
                           {"stages", model.config.stages}}
                          .dump(),
                      "application/json");
    }));

    http.Post("/api/predict", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const ImageBuffer composite = decode_png(require_part(req, "composite"));
      const MaskBuffer mask = decode_mask_png(require_part(req, "mask"));
      std::optional<SemanticLabel> label;
      if (req.has_file("label")) {
        const std::string text = req.get_file_value("label").content;
        label = parse_label(text);
        if (!label) fail(ErrorKind::kInvalidArgument, "unknown label '" + text + "'");
      }
      const HarmonizeResult r =
          harmonize(model, composite, mask, label, std::nullopt, threads);
      json body;
      body["stage_curves"] = json::array();
      for (const CurveParams& c : r.curves) body["stage_curves"].push_back(json::parse(curves_to_json(c)));
      body["preview_png_b64"] = base64_encode(encode_png(r.output));
      if (!r.warning.empty()) body["warning"] = r.warning;
      res.set_content(body.dump(), "application/json");
    }));

    http.Post("/api/render", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const ImageBuffer composite = decode_png(require_part(req, "composite"));
      const MaskBuffer mask = decode_mask_png(require_part(req, "mask"));
      const std::vector<CurveParams> stages = curve_stages_from_json(require_part(req, "curves"));
      res.set_content(encode_png(apply_curves(composite, mask, stages, threads)), "image/png");
    }));

    http.Post("/api/fit", guarded([](const httplib::Request& req, httplib::Response& res) {
      const json doc = json::parse(req.body);
      const int levels = doc.at("levels").get<int>();
      std::vector<std::pair<double, double>> pairs;
      for (const auto& p : doc.at("pairs")) pairs.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
      const CurveFit fit = fit_curve_to_mapping(pairs, levels, FitOptions{});
      res.set_content(json{{"curve", fit.curve.weights()}, {"mse", fit.mse}}.dump(),
                      "application/json");
    }));

    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.status == 413 && res.body.empty()) {
        send_error(res, 413, "request exceeds 64 MB");
      }
    });

    if (options.ui_dir) {
      if (!http.set_mount_point("/", options.ui_dir->string())) {
        fail(ErrorKind::kIo, "cannot serve UI directory " + options.ui_dir->string());
      }
    }
  }
};

ApiServer::ApiServer(HarmonizerModel model, ServerOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->model = std::move(model);
  impl_->options = std::move(options);
  impl_->threads = impl_->options.threads > 0 ? impl_->options.threads : default_thread_count();
  impl_->routes();
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind() {
  const auto& o = impl_->options;
  int port = o.port;
  if (port == 0) {
    port = impl_->http.bind_to_any_port(o.host);
    if (port < 0) fail(ErrorKind::kIo, "cannot bind " + o.host);
  } else if (!impl_->http.bind_to_port(o.host, port)) {
    fail(ErrorKind::kIo, "cannot bind " + o.host + ":" + std::to_string(port));
  }
  return port;
}

void ApiServer::serve() { impl_->http.listen_after_bind(); }

void ApiServer::stop() {
  if (impl_) impl_->http.stop();
}

void ApiServer::wait_until_ready() const { impl_->http.wait_until_ready(); }

}  // namespace s2cr
