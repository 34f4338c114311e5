// SPDX-License-Identifier: Apache-2.0

#include "hbsca/config.hpp"

#include <fstream>

#include <json.hpp>

#include "hbsca/errors.hpp"

namespace hbsca {

ToolConfig ToolConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) {
    throw IoError("cannot open config " + file.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config is not valid JSON: " + std::string(e.what()));
  }

  ToolConfig cfg;
  if (j.contains("store")) cfg.store_file = j["store"].get<std::string>();
  if (j.contains("state_dir")) cfg.state_dir = j["state_dir"].get<std::string>();
  if (j.contains("validity_minutes"))
    cfg.validity_minutes = j["validity_minutes"].get<std::uint16_t>();
  if (j.contains("overlap_minutes"))
    cfg.overlap_minutes = j["overlap_minutes"].get<std::uint16_t>();
  if (j.contains("dummy_threshold"))
    cfg.dummy_threshold = j["dummy_threshold"].get<std::uint32_t>();
  if (j.contains("tree_height"))
    cfg.tree_height = j["tree_height"].get<std::uint32_t>();
  if (j.contains("agreement_window_ms"))
    cfg.time.agreement_window_ms = j["agreement_window_ms"].get<std::uint32_t>();
  if (j.contains("minor_adjust_ms"))
    cfg.time.minor_adjust_ms = j["minor_adjust_ms"].get<std::uint32_t>();
  if (j.contains("skew_tolerance_ms"))
    cfg.time.skew_tolerance_ms = j["skew_tolerance_ms"].get<std::uint32_t>();
  if (j.contains("query_timeout_ms"))
    cfg.time.query_timeout_ms = j["query_timeout_ms"].get<std::uint32_t>();
  if (j.contains("ntp_servers"))
    cfg.ntp_servers = j["ntp_servers"].get<std::vector<std::string>>();
  if (j.contains("issuer_cn"))
    cfg.profile.issuer_cn = j["issuer_cn"].get<std::string>();
  if (j.contains("subject_cn"))
    cfg.profile.subject_cn = j["subject_cn"].get<std::string>();
  if (j.contains("san_dns"))
    cfg.profile.san_dns = j["san_dns"].get<std::string>();
  cfg.time.server_count =
      cfg.ntp_servers.empty() ? cfg.time.server_count : cfg.ntp_servers.size();
  return cfg;
}

}  // namespace hbsca
