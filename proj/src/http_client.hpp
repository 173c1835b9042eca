// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

// Thin wrapper over cpp-httplib so only one translation unit pulls it in.

#pragma once

#include <chrono>
#include <map>
#include <string>
#include <string_view>

namespace pairwise_vl::detail {

struct HttpResult {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;
};

bool is_http_url(std::string_view locator);

/// Splits "https://host:port/v1/x" into ("https://host:port", "/v1/x").
std::pair<std::string, std::string> split_url(std::string_view url);

/// Both throw TransportError when no HTTP response was received
/// (connection refused, timeout, TLS failure).
HttpResult http_get(const std::string& url, std::chrono::milliseconds timeout);
HttpResult http_post(const std::string& url, const std::string& body,
                     const std::map<std::string, std::string>& headers,
                     std::chrono::milliseconds timeout);

}  // namespace pairwise_vl::detail
