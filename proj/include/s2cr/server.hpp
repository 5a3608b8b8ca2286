#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "s2cr/model.hpp"

namespace s2cr {

inline constexpr std::size_t kMaxRequestBytes = 64ull << 20;

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> ui_dir;
  int threads = 0;  // 0 = default_thread_count()
};

/// HTTP front end over the shared engine. The model is immutable once loaded;
/// requests only allocate private buffers.
class ApiServer {
 public:
  ApiServer(HarmonizerModel model, ServerOptions options);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds the socket and returns the bound port. Throws Error(kIo) on failure.
  int bind();
  /// Blocks serving requests until stop().
  void serve();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace s2cr
