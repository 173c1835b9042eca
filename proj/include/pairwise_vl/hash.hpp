// Copyright 2026 The pairwise-vl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace pairwise_vl {

/// SHA-256 of some byte string. Used for image digests, dataset digests and
/// cache keys.
using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::string_view bytes);

std::string to_hex(const Digest& digest);
std::optional<Digest> digest_from_hex(std::string_view hex);

std::string base64_encode(std::string_view bytes);

}  // namespace pairwise_vl
