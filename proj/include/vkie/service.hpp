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

// HTTP extraction endpoint.
//
//   POST /v1/extract   multipart/form-data: "image" (PNG), "boxes" (JSON, see
//                      parse_ocr_boxes), optional "frame_id". Returns an
//                      ExtractionRecord.
//   GET  /healthz      {"status": "ok", "model": ..., "config_hash": ...}
//
// Errors are {"schema_version", "error": {"field", "message"}} with status 400,
// or 413 when the image exceeds the size limits.

#ifndef VKIE_SERVICE_HPP_
#define VKIE_SERVICE_HPP_

#include <memory>
#include <optional>
#include <string>

#include "vkie/extraction_record.hpp"

namespace vkie {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  size_t max_image_bytes = 8u << 20;
  int max_image_side = 4096;
  int threads = 4;
};

struct ServiceResponse {
  int status = 200;
  std::string body;  // JSON
};

// The request handler without the transport; the server calls this.
ServiceResponse handle_extract(const Extractor &extractor, const std::optional<std::string> &image_bytes,
                               const std::optional<std::string> &boxes_json, const std::string &frame_id,
                               const ServiceOptions &options);
ServiceResponse handle_health(const Extractor &extractor);

class Service {
 public:
  Service(std::shared_ptr<const Extractor> extractor, ServiceOptions options);
  ~Service();
  Service(const Service &) = delete;
  Service &operator=(const Service &) = delete;

  // Binds and serves until stop(); returns false if binding failed.
  bool run();
  // Binds now and returns the bound port (or -1); serve with run_bound().
  int bind();
  bool run_bound();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vkie

#endif  // VKIE_SERVICE_HPP_
