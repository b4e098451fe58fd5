// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace mvx {

inline constexpr std::string_view kToolName = "mvx-avgfilter";
inline constexpr std::string_view kToolVersion = "1.0.0";
inline constexpr int kSchemaVersion = 1;

/// Shortest round-trip-safe rendering: printf "%.17g".
std::string fmt17(double value);

/// "# mvx-avgfilter v1 <command>\n"
std::string csv_schema_line(std::string_view command);

/// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string content_digest(std::string_view text);

}  // namespace mvx
