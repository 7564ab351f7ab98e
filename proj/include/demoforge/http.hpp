// Copyright 2026 The demoforge Authors
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

#ifndef DEMOFORGE_HTTP_HPP_
#define DEMOFORGE_HTTP_HPP_

#include <memory>
#include <string>

#include "demoforge/service.hpp"

namespace demoforge {

// Serves SessionService::handle over HTTP/1.1. NDJSON responses are sent
// chunked, one line per chunk.
class HttpServer {
 public:
  explicit HttpServer(SessionService& service);
  ~HttpServer();

  // Binds and serves on a background thread; port 0 picks a free port.
  // Returns the bound port. Throws Io when the address cannot be bound.
  int start(const std::string& host, int port);
  // Serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace demoforge

#endif  // DEMOFORGE_HTTP_HPP_
