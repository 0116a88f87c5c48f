#pragma once

// Campaign persistence: a line-delimited log (one JSON header line followed
// by one record per line, canonical field order, fixed decimal formatting)
// plus ingestion of external logs via a field-mapping spec.

#include <cstdint>
#include <string>
#include <vector>

#include "searchlab/orchestrator.hpp"
#include "searchlab/record.hpp"

namespace searchlab {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kLogFormat = "searchlab-log-v1";

struct LogHeader {
  std::string format = kLogFormat;
  std::uint64_t schema_hash = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::string tool_version = kToolVersion;
  bool truncated = false;
  std::string truncation_reason;
};

struct CampaignLog {
  LogHeader header;
  std::vector<ExperimentRecord> records;
  std::vector<std::string> warnings;
};

// Canonical serialization; re-serialization of a parsed log is
// byte-identical.
std::string serialize_log(const History& history, const ConfigurationSpace& space,
                          const CampaignConfig& config);
std::string serialize_log(const CampaignLog& log);

void write_log(const History& history, const ConfigurationSpace& space,
               const CampaignConfig& config, const std::string& path);

// Throws DataError naming the line and byte offset on malformed input. A
// schema-hash mismatch against `expected_schema_hash` (when nonzero) is
// reported as a warning, not an error.
CampaignLog read_log(const std::string& path, std::uint64_t expected_schema_hash = 0);
CampaignLog parse_log_text(const std::string& text, std::uint64_t expected_schema_hash = 0);

struct IngestStats {
  std::int64_t parsed = 0;
  std::int64_t unparseable = 0;
  std::int64_t dropped_missing_ap = 0;
  std::int64_t unattributed = 0;
};

struct IngestResult {
  CampaignLog log;
  IngestStats stats;
};

// Normalizes an external line-delimited log. The mapping spec (JSON) names
// the external fields for ap and status (mandatory), optionally agent / id /
// tick fields, a dims map (our dim -> external field), and a status_values
// map for foreign status vocabularies.
IngestResult ingest_external(const std::string& path, const std::string& mapping_spec_json,
                             const ConfigurationSpace& space);

}  // namespace searchlab
