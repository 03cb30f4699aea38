// Copyright 2026 The SCDM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scdm {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_atomic(const std::filesystem::path& path, std::string_view text);

// Consumes one '\n'-terminated ASCII line starting at `pos`.
std::string_view next_line(std::span<const std::uint8_t> bytes, std::size_t& pos);

inline constexpr std::string_view kVersion = "scdm 0.1.0";

}  // namespace scdm
