// Copyright 2026 The mlark Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MLARK_HELPER_HTTP_H_
#define MLARK_HELPER_HTTP_H_

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "absl/status/statusor.h"
#include "mlark/helper.h"

namespace httplib {
class Server;
}

namespace mlark {

// Serves one HelperService over HTTP. Handlers run on the server's thread
// pool and share nothing mutable beyond the service itself.
class HelperHttpServer {
 public:
  explicit HelperHttpServer(HelperService* service);
  ~HelperHttpServer();

  // Binds host:port (port 0 picks a free one) and returns the bound port.
  absl::StatusOr<int> Bind(const std::string& host, int port);
  // Blocks until Stop().
  absl::Status Serve();
  // Serves on a background thread.
  void ServeInBackground();
  void Stop();

 private:
  HelperService* service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  bool bound_ = false;
  std::atomic<bool> served_{false};
};

}  // namespace mlark

#endif  // MLARK_HELPER_HTTP_H_
