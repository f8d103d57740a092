#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "a2w/util.hpp"

namespace a2w {

struct Url {
  std::string scheme;  // lowercase, "http" or "https"
  std::string host;    // lowercase
  int port = 0;        // 0 when not given
  std::string target;  // path plus query, always starting with '/'

  std::string origin() const;
};

/// Parses absolute http(s) URLs. Returns nullopt for anything else.
std::optional<Url> parse_url(std::string_view text);

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Connection-level failure (DNS, refused, timeout). Retryable.
class TransportFailure : public Error {
 public:
  using Error::Error;
};

using HttpHeaders = std::multimap<std::string, std::string>;

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse get(const std::string& url, const HttpHeaders& headers = {}) = 0;
  virtual HttpResponse post(const std::string& url, const HttpHeaders& headers, const std::string& body,
                            const std::string& content_type = "application/json") = 0;
};

/// Real network transport (cpp-httplib, TLS enabled).
std::shared_ptr<HttpTransport> make_network_transport(double timeout_seconds = 60.0);

/// Serves GET requests from files named `<fnv1a_hex(url)>.html` (or `.txt`)
/// under a directory; missing files are 404. POST always fails.
class FixtureTransport : public HttpTransport {
 public:
  explicit FixtureTransport(fs::path dir) : dir_(std::move(dir)) {}
  HttpResponse get(const std::string& url, const HttpHeaders& headers = {}) override;
  HttpResponse post(const std::string& url, const HttpHeaders& headers, const std::string& body,
                    const std::string& content_type) override;

  static fs::path fixture_path(const fs::path& dir, const std::string& url);

 private:
  fs::path dir_;
};

/// Forwards to an inner transport and records every URL it was asked for.
class RecordingTransport : public HttpTransport {
 public:
  explicit RecordingTransport(std::shared_ptr<HttpTransport> inner) : inner_(std::move(inner)) {}
  HttpResponse get(const std::string& url, const HttpHeaders& headers = {}) override;
  HttpResponse post(const std::string& url, const HttpHeaders& headers, const std::string& body,
                    const std::string& content_type) override;

  std::vector<std::string> requested() const;

 private:
  std::shared_ptr<HttpTransport> inner_;
  mutable std::mutex mu_;
  std::vector<std::string> urls_;
};

}  // namespace a2w
