// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hbsca/certkit.hpp"
#include "hbsca/timeauth.hpp"

namespace hbsca {

/// CLI/daemon configuration, loaded from a JSON file. Every field has a
/// usable default so a config file is optional for desk-scale use.
struct ToolConfig {
  std::filesystem::path store_file = "ca.xks";
  std::filesystem::path state_dir = ".";
  std::uint16_t validity_minutes = 240;
  std::uint16_t overlap_minutes = 2;
  std::uint32_t dummy_threshold = 10;
  std::uint32_t tree_height = 16;
  TimeConfig time{};
  std::vector<std::string> ntp_servers;  // "host" or "host:port"
  LeafProfile profile{};

  static ToolConfig load(const std::filesystem::path& file);
};

}  // namespace hbsca
