// Copyright 2026 The procforge Authors
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

#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

namespace procforge::http {

/// "http://host:port/path" split into the part httplib connects to and the
/// request path. A URL without a path gets `default_path`.
struct Url {
  std::string origin;
  std::string path;
};

Url parse_url(const std::string& url, const std::string& default_path);

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// POSTs a JSON body and returns the parsed JSON reply. Throws
/// TransportError on connection failure, non-2xx status or a non-JSON body.
nlohmann::json post_json(const Url& url, const nlohmann::json& body, int timeout_ms);

}  // namespace procforge::http
