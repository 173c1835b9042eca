// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace pairwise_vl::detail {

std::optional<std::string> read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// "2026-01-31T12:34:56Z"
std::string utc_now_iso8601();

}  // namespace pairwise_vl::detail
