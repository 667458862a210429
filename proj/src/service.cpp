// Copyright 2026 The VKIE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vkie/service.hpp"

#include <algorithm>

#include "httplib.h"

namespace vkie {

using nlohmann::json;

namespace {

ServiceResponse error_response(int status, const std::string &field, const std::string &message) {
  json body = {{"schema_version", kRecordSchemaVersion}, {"error", {{"field", field}, {"message", message}}}};
  return {status, body.dump()};
}

}  // namespace

ServiceResponse handle_extract(const Extractor &extractor, const std::optional<std::string> &image_bytes,
                               const std::optional<std::string> &boxes_json, const std::string &frame_id,
                               const ServiceOptions &options) {
  if (!image_bytes) return error_response(400, "image", "missing multipart field");
  if (!boxes_json) return error_response(400, "boxes", "missing multipart field");
  if (image_bytes->size() > options.max_image_bytes)
    return error_response(413, "image", "image exceeds " + std::to_string(options.max_image_bytes) + " bytes");

  Image image;
  try {
    image = decode_png(std::vector<std::uint8_t>(image_bytes->begin(), image_bytes->end()));
  } catch (const std::exception &e) {
    return error_response(400, "image", std::string("not a readable PNG: ") + e.what());
  }
  if (image.width > options.max_image_side || image.height > options.max_image_side)
    return error_response(413, "image", "image side exceeds " + std::to_string(options.max_image_side) + " pixels");

  std::vector<OcrEntry> boxes;
  try {
    boxes = parse_ocr_boxes(json::parse(*boxes_json));
  } catch (const json::parse_error &e) {
    return error_response(400, "boxes", std::string("malformed JSON: ") + e.what());
  } catch (const RequestError &e) {
    return error_response(400, e.field(), e.what());
  }

  try {
    const auto record = extractor.extract(image, boxes, frame_id);
    return {200, to_json(record).dump()};
  } catch (const Error &e) {
    return error_response(400, "boxes", e.what());
  }
}

ServiceResponse handle_health(const Extractor &extractor) {
  json body = {{"status", "ok"},
               {"schema_version", kRecordSchemaVersion},
               {"model", extractor.model()},
               {"config_hash", extractor.config_hash()}};
  return {200, body.dump()};
}

struct Service::Impl {
  std::shared_ptr<const Extractor> extractor;
  ServiceOptions options;
  httplib::Server server;
};

Service::Service(std::shared_ptr<const Extractor> extractor, ServiceOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->extractor = std::move(extractor);
  impl_->options = options;
  auto &svr = impl_->server;
  auto *impl = impl_.get();
  const int threads = std::max(1, options.threads);
  svr.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  // Leaves room for the boxes part and multipart framing; larger bodies get 413.
  svr.set_payload_max_length(options.max_image_bytes + (1u << 20));

  svr.Post("/v1/extract", [impl](const httplib::Request &req, httplib::Response &res) {
    if (!req.is_multipart_form_data()) {
      const auto r = error_response(400, "body", "expected multipart/form-data");
      res.status = r.status;
      res.set_content(r.body, "application/json");
      return;
    }
    std::optional<std::string> image, boxes;
    std::string frame_id = "frame";
    if (req.has_file("image")) image = req.get_file_value("image").content;
    if (req.has_file("boxes")) boxes = req.get_file_value("boxes").content;
    if (req.has_file("frame_id")) frame_id = req.get_file_value("frame_id").content;
    const auto r = handle_extract(*impl->extractor, image, boxes, frame_id, impl->options);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
  svr.Get("/healthz", [impl](const httplib::Request &, httplib::Response &res) {
    const auto r = handle_health(*impl->extractor);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
}

Service::~Service() { stop(); }

bool Service::run() {
  return impl_->server.listen(impl_->options.host, impl_->options.port);
}

int Service::bind() {
  if (impl_->options.port == 0) return impl_->server.bind_to_any_port(impl_->options.host);
  return impl_->server.bind_to_port(impl_->options.host, impl_->options.port) ? impl_->options.port : -1;
}

bool Service::run_bound() { return impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_) impl_->server.stop();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace vkie
