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

#include "demoforge/http.hpp"

#include <thread>

#include "httplib.h"

#include "demoforge/error.hpp"

namespace demoforge {

struct HttpServer::Impl {
  SessionService& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(SessionService& s) : service(s) {
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
      std::string target = req.path;
      if (!req.params.empty()) {
        target += '?';
        bool first = true;
        for (const auto& [k, v] : req.params) {
          if (!first) target += '&';
          target += k + "=" + v;
          first = false;
        }
      }
      ApiResponse r = service.handle(req.method, target, req.body);
      res.status = r.status;
      if (r.lines.empty()) {
        res.set_content(r.body, r.content_type);
        return;
      }
      auto lines = std::make_shared<std::vector<std::string>>(std::move(r.lines));
      res.set_chunked_content_provider(r.content_type, [lines, next = std::size_t{0}](std::size_t, httplib::DataSink& sink) mutable {
        if (next < lines->size()) {
          const std::string& l = (*lines)[next++];
          return sink.write(l.data(), l.size());
        }
        sink.done();
        return true;
      });
    };
    server.Get(".*", route);
    server.Post(".*", route);
    server.Delete(".*", route);
    server.Put(".*", route);
  }
};

HttpServer::HttpServer(SessionService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpServer::run(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw Error(ErrorCode::kIo, "cannot serve on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace demoforge
