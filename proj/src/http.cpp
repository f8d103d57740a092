#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "a2w/http.hpp"

#include <cctype>

namespace a2w {

std::string Url::origin() const {
  std::string o = scheme + "://" + host;
  if (port != 0) o += ":" + std::to_string(port);
  return o;
}

std::optional<Url> parse_url(std::string_view text) {
  auto sep = text.find("://");
  if (sep == std::string_view::npos) return std::nullopt;
  Url u;
  u.scheme = to_lower(text.substr(0, sep));
  if (u.scheme != "http" && u.scheme != "https") return std::nullopt;
  std::string_view rest = text.substr(sep + 3);
  auto path_start = rest.find_first_of("/?#");
  std::string_view authority = rest.substr(0, path_start);
  std::string_view target = path_start == std::string_view::npos ? std::string_view{} : rest.substr(path_start);
  if (auto at = authority.rfind('@'); at != std::string_view::npos) authority = authority.substr(at + 1);
  if (auto colon = authority.rfind(':'); colon != std::string_view::npos) {
    std::string_view port = authority.substr(colon + 1);
    if (port.empty() || port.size() > 5) return std::nullopt;
    int p = 0;
    for (char c : port) {
      if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
      p = p * 10 + (c - '0');
    }
    if (p <= 0 || p > 65535) return std::nullopt;
    u.port = p;
    authority = authority.substr(0, colon);
  }
  if (authority.empty()) return std::nullopt;
  for (char c : authority) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.')) return std::nullopt;
  }
  if (authority.front() == '.' || authority.back() == '.' || authority.find("..") != std::string_view::npos) {
    return std::nullopt;
  }
  u.host = to_lower(authority);
  if (auto hash = target.find('#'); hash != std::string_view::npos) target = target.substr(0, hash);
  u.target = target.empty() ? "/" : std::string(target);
  if (u.target.front() == '?') u.target = "/" + u.target;
  return u;
}

namespace {

class NetworkTransport : public HttpTransport {
 public:
  explicit NetworkTransport(double timeout) : timeout_(timeout) {}

  HttpResponse get(const std::string& url, const HttpHeaders& headers) override {
    auto [cli, u] = client(url);
    httplib::Headers h(headers.begin(), headers.end());
    auto res = cli->Get(u.target, h);
    return finish(res, url);
  }

  HttpResponse post(const std::string& url, const HttpHeaders& headers, const std::string& body,
                    const std::string& content_type) override {
    auto [cli, u] = client(url);
    httplib::Headers h(headers.begin(), headers.end());
    auto res = cli->Post(u.target, h, body, content_type);
    return finish(res, url);
  }

 private:
  std::pair<std::unique_ptr<httplib::Client>, Url> client(const std::string& url) {
    auto u = parse_url(url);
    if (!u) throw TransportFailure("invalid URL: " + url);
    auto cli = std::make_unique<httplib::Client>(u->origin());
    auto secs = static_cast<time_t>(timeout_);
    cli->set_connection_timeout(secs, 0);
    cli->set_read_timeout(secs, 0);
    cli->set_write_timeout(secs, 0);
    cli->set_follow_location(true);
    return {std::move(cli), *u};
  }

  static HttpResponse finish(const httplib::Result& res, const std::string& url) {
    if (!res) throw TransportFailure("request to " + url + " failed: " + httplib::to_string(res.error()));
    return HttpResponse{res->status, res->body};
  }

  double timeout_;
};

}  // namespace

std::shared_ptr<HttpTransport> make_network_transport(double timeout_seconds) {
  return std::make_shared<NetworkTransport>(timeout_seconds);
}

fs::path FixtureTransport::fixture_path(const fs::path& dir, const std::string& url) {
  return dir / (fnv1a_hex(url) + ".html");
}

HttpResponse FixtureTransport::get(const std::string& url, const HttpHeaders&) {
  auto html = fixture_path(dir_, url);
  if (fs::exists(html)) return HttpResponse{200, read_file(html)};
  auto txt = dir_ / (fnv1a_hex(url) + ".txt");
  if (fs::exists(txt)) return HttpResponse{200, read_file(txt)};
  return HttpResponse{404, ""};
}

HttpResponse FixtureTransport::post(const std::string& url, const HttpHeaders&, const std::string&,
                                    const std::string&) {
  throw TransportFailure("fixture transport does not serve POST: " + url);
}

HttpResponse RecordingTransport::get(const std::string& url, const HttpHeaders& headers) {
  {
    std::lock_guard lk(mu_);
    urls_.push_back(url);
  }
  return inner_->get(url, headers);
}

HttpResponse RecordingTransport::post(const std::string& url, const HttpHeaders& headers, const std::string& body,
                                      const std::string& content_type) {
  {
    std::lock_guard lk(mu_);
    urls_.push_back(url);
  }
  return inner_->post(url, headers, body, content_type);
}

std::vector<std::string> RecordingTransport::requested() const {
  std::lock_guard lk(mu_);
  return urls_;
}

}  // namespace a2w
