// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#include "http_client.hpp"

#include <httplib.h>

#include "pairwise_vl/errors.hpp"

namespace pairwise_vl::detail {
namespace {

void configure(httplib::Client& client, std::chrono::milliseconds timeout) {
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  client.set_follow_location(true);
}

HttpResult convert(const httplib::Result& res, const std::string& url) {
  if (!res) {
    throw TransportError("request to " + url + " failed: " + httplib::to_string(res.error()));
  }
  HttpResult out;
  out.status = res->status;
  out.body = res->body;
  for (const auto& [k, v] : res->headers) out.headers.emplace(k, v);
  return out;
}

}  // namespace

bool is_http_url(std::string_view locator) {
  return locator.starts_with("http://") || locator.starts_with("https://");
}

std::pair<std::string, std::string> split_url(std::string_view url) {
  auto scheme_end = url.find("://");
  std::size_t host_start = scheme_end == std::string_view::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', host_start);
  if (path_start == std::string_view::npos) return {std::string(url), "/"};
  return {std::string(url.substr(0, path_start)), std::string(url.substr(path_start))};
}

HttpResult http_get(const std::string& url, std::chrono::milliseconds timeout) {
  auto [origin, path] = split_url(url);
  httplib::Client client(origin);
  configure(client, timeout);
  return convert(client.Get(path), url);
}

HttpResult http_post(const std::string& url, const std::string& body,
                     const std::map<std::string, std::string>& headers,
                     std::chrono::milliseconds timeout) {
  auto [origin, path] = split_url(url);
  httplib::Client client(origin);
  configure(client, timeout);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  return convert(client.Post(path, h, body, "application/json"), url);
}

}  // namespace pairwise_vl::detail
