#include "searchlab/log.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace searchlab {

namespace {

std::string format_ap(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);  // fixed 9 significant digits
  return buf;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

// Record lines use a fixed field order so serialization is canonical.
std::string record_line(const ExperimentRecord& r) {
  std::string out = "{";
  out += "\"id\":" + std::to_string(r.id);
  out += ",\"agent\":\"" + json_escape(r.agent.empty() ? "unattributed" : r.agent) + "\"";
  out += ",\"cycle\":" + std::to_string(r.cycle);
  out += ",\"parent_id\":" + (r.parent_id ? std::to_string(*r.parent_id) : "null");
  out += std::string(",\"source\":\"") + to_string(r.source) + "\"";
  out += std::string(",\"status\":\"") + to_string(r.status) + "\"";
  out += ",\"failure_category\":";
  out += r.failure_category ? "\"" + std::string(to_string(*r.failure_category)) + "\""
                            : "null";
  out += ",\"heal_attempts\":" + std::to_string(r.heal_attempts);
  out += ",\"submit_tick\":" + std::to_string(r.submit_tick);
  out += ",\"start_tick\":" + std::to_string(r.start_tick);
  out += ",\"end_tick\":" + std::to_string(r.end_tick);
  out += ",\"ap\":" + (r.ap ? format_ap(*r.ap) : "null");
  out += ",\"config\":{";
  bool first = true;
  for (const auto& [dim, value] : r.config.assignments) {
    if (!first) out += ',';
    first = false;
    out += "\"" + json_escape(dim) + "\":";
    if (std::holds_alternative<std::string>(value))
      out += "\"" + json_escape(std::get<std::string>(value)) + "\"";
    else
      out += format_real(std::get<double>(value));
  }
  out += "}";
  for (const auto& [key, raw] : r.extra) out += ",\"" + json_escape(key) + "\":" + raw;
  out += "}";
  return out;
}

std::string header_line(const LogHeader& h) {
  std::string out = "{";
  out += "\"format\":\"" + json_escape(h.format) + "\"";
  out += ",\"schema_hash\":\"" + std::to_string(h.schema_hash) + "\"";
  out += ",\"seed\":" + std::to_string(h.seed);
  out += ",\"config_hash\":\"" + std::to_string(h.config_hash) + "\"";
  out += ",\"tool_version\":\"" + json_escape(h.tool_version) + "\"";
  out += ",\"truncated\":" + std::string(h.truncated ? "true" : "false");
  out += ",\"truncation_reason\":\"" + json_escape(h.truncation_reason) + "\"";
  out += "}";
  return out;
}

ExperimentRecord record_from_json(const nlohmann::json& j) {
  ExperimentRecord r;
  static const char* kKnown[] = {"id",          "agent",       "cycle",
                                 "parent_id",   "source",      "status",
                                 "failure_category", "heal_attempts", "submit_tick",
                                 "start_tick",  "end_tick",    "ap",
                                 "config"};
  r.id = j.value("id", std::int64_t{0});
  r.agent = j.value("agent", std::string("unattributed"));
  r.cycle = j.value("cycle", std::int64_t{0});
  if (j.contains("parent_id") && !j["parent_id"].is_null())
    r.parent_id = j["parent_id"].get<std::int64_t>();
  if (auto s = source_from(j.value("source", "random"))) r.source = *s;
  auto status = record_status_from(j.value("status", ""));
  if (!status) throw DataError("unknown record status '" + j.value("status", "") + "'");
  r.status = *status;
  if (j.contains("failure_category") && !j["failure_category"].is_null()) {
    auto cat = failure_category_from(j["failure_category"].get<std::string>());
    if (!cat) throw DataError("unknown failure category");
    r.failure_category = cat;
  }
  r.heal_attempts = j.value("heal_attempts", 0);
  r.submit_tick = j.value("submit_tick", std::int64_t{0});
  r.start_tick = j.value("start_tick", std::int64_t{0});
  r.end_tick = j.value("end_tick", std::int64_t{0});
  if (j.contains("ap") && !j["ap"].is_null()) r.ap = j["ap"].get<double>();
  if (j.contains("config")) {
    for (const auto& [dim, value] : j["config"].items()) {
      if (value.is_string())
        r.config.set(dim, value.get<std::string>());
      else
        r.config.set(dim, value.get<double>());
    }
  }
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : kKnown)
      if (key == k) known = true;
    if (!known) r.extra[key] = value.dump();  // preserved opaquely
  }
  return r;
}

}  // namespace

std::string serialize_log(const History& history, const ConfigurationSpace& space,
                          const CampaignConfig& config) {
  LogHeader header;
  header.schema_hash = space.schema_hash();
  header.seed = config.seed;
  header.config_hash = config.config_hash();
  header.truncated = history.truncated;
  header.truncation_reason = history.truncation_reason;
  // Log lines are in submit (id) order; completion order is recoverable
  // from (end_tick, id).
  std::vector<const ExperimentRecord*> ordered;
  ordered.reserve(history.records.size());
  for (const auto& r : history.records) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const ExperimentRecord* a, const ExperimentRecord* b) {
                     return a->id < b->id;
                   });
  std::string out = header_line(header) + "\n";
  for (const auto* r : ordered) out += record_line(*r) + "\n";
  return out;
}

std::string serialize_log(const CampaignLog& log) {
  std::string out = header_line(log.header) + "\n";
  for (const auto& r : log.records) out += record_line(r) + "\n";
  return out;
}

void write_log(const History& history, const ConfigurationSpace& space,
               const CampaignConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write log file '" + path + "'");
  out << serialize_log(history, space, config);
}

CampaignLog parse_log_text(const std::string& text, std::uint64_t expected_schema_hash) {
  CampaignLog log;
  std::size_t line_number = 0;
  std::size_t offset = 0;
  std::size_t pos = 0;
  bool have_header = false;
  std::int64_t last_id = 0;

  while (pos <= text.size()) {
    const std::size_t next = text.find('\n', pos);
    const std::string line =
        next == std::string::npos ? text.substr(pos) : text.substr(pos, next - pos);
    const std::size_t line_offset = offset;
    pos = next == std::string::npos ? text.size() + 1 : next + 1;
    offset = pos;
    ++line_number;
    if (line.empty()) {
      if (next == std::string::npos) break;
      continue;
    }

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed log line " + std::to_string(line_number) + " (byte offset " +
                      std::to_string(line_offset) + "): " + e.what());
    }
    try {
      if (!have_header) {
        log.header.format = j.value("format", std::string(""));
        if (log.header.format.rfind("searchlab-log", 0) != 0)
          throw DataError("missing log header");
        if (j.contains("schema_hash"))
          log.header.schema_hash = std::stoull(j["schema_hash"].get<std::string>());
        log.header.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("config_hash"))
          log.header.config_hash = std::stoull(j["config_hash"].get<std::string>());
        log.header.tool_version = j.value("tool_version", std::string(""));
        log.header.truncated = j.value("truncated", false);
        log.header.truncation_reason = j.value("truncation_reason", std::string(""));
        have_header = true;
        if (expected_schema_hash != 0 && log.header.schema_hash != 0 &&
            log.header.schema_hash != expected_schema_hash)
          log.warnings.push_back("schema hash mismatch: log was written for a different space");
        continue;
      }
      ExperimentRecord r = record_from_json(j);
      if (r.id <= last_id)
        log.warnings.push_back("record ids not strictly increasing at line " +
                               std::to_string(line_number));
      last_id = std::max(last_id, r.id);
      log.records.push_back(std::move(r));
    } catch (const DataError&) {
      throw;
    } catch (const std::exception& e) {
      throw DataError("malformed log line " + std::to_string(line_number) + " (byte offset " +
                      std::to_string(line_offset) + "): " + e.what());
    }
    if (next == std::string::npos) break;
  }
  if (!have_header) throw DataError("log has no header line");
  return log;
}

CampaignLog read_log(const std::string& path, std::uint64_t expected_schema_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open log file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_log_text(ss.str(), expected_schema_hash);
}

IngestResult ingest_external(const std::string& path, const std::string& mapping_spec_json,
                             const ConfigurationSpace& space) {
  nlohmann::json mapping;
  try {
    mapping = nlohmann::json::parse(mapping_spec_json);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("mapping spec is not valid JSON: ") + e.what());
  }
  if (!mapping.contains("ap") || !mapping.contains("status"))
    throw DataError("mapping spec must name the 'ap' and 'status' fields");

  const std::string ap_field = mapping["ap"].get<std::string>();
  const std::string status_field = mapping["status"].get<std::string>();
  const std::string agent_field = mapping.value("agent", std::string(""));
  const std::string id_field = mapping.value("id", std::string(""));
  const std::string config_field = mapping.value("config_field", std::string(""));
  std::map<std::string, std::string> dim_fields;
  if (mapping.contains("dims"))
    dim_fields = mapping["dims"].get<std::map<std::string, std::string>>();

  // Foreign status vocabulary -> ours.
  std::map<std::string, RecordStatus> status_map = {
      {"completed", RecordStatus::completed},
      {"failed", RecordStatus::failed},
      {"abandoned", RecordStatus::abandoned}};
  if (mapping.contains("status_values"))
    for (const auto& [ours, theirs] : mapping["status_values"].items()) {
      auto target = record_status_from(ours);
      if (!target) throw DataError("unknown status '" + ours + "' in status_values");
      for (const auto& foreign : theirs) status_map[foreign.get<std::string>()] = *target;
    }

  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open external log '" + path + "'");

  IngestResult result;
  result.log.header.schema_hash = space.schema_hash();
  std::string line;
  std::int64_t next_id = 1;
  std::int64_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      ++result.stats.unparseable;
      continue;
    }
    if (!j.is_object() || !j.contains(status_field)) {
      ++result.stats.unparseable;
      continue;
    }
    auto status_it = status_map.find(j[status_field].is_string()
                                         ? j[status_field].get<std::string>()
                                         : std::string(""));
    if (status_it == status_map.end()) {
      ++result.stats.unparseable;
      continue;
    }

    ExperimentRecord r;
    r.status = status_it->second;
    if (r.status == RecordStatus::completed) {
      if (!j.contains(ap_field) || j[ap_field].is_null() || !j[ap_field].is_number()) {
        ++result.stats.dropped_missing_ap;
        continue;
      }
      r.ap = j[ap_field].get<double>();
    }
    if (!agent_field.empty() && j.contains(agent_field) && j[agent_field].is_string()) {
      r.agent = j[agent_field].get<std::string>();
    } else {
      r.agent = "unattributed";
      ++result.stats.unattributed;
    }
    if (!id_field.empty() && j.contains(id_field))
      r.extra["external_id"] = j[id_field].dump();
    const nlohmann::json& config_src =
        (!config_field.empty() && j.contains(config_field)) ? j[config_field] : j;
    for (const auto& [our_dim, their_field] : dim_fields) {
      if (!config_src.contains(their_field) || config_src[their_field].is_null()) continue;
      const auto& value = config_src[their_field];
      const auto* dim = space.find(our_dim);
      if (!dim) continue;
      if (dim->kind == DimKind::categorical) {
        std::string level = value.is_string() ? value.get<std::string>()
                                              : nlohmann::json(value).dump();
        r.config.set(our_dim, level);
      } else if (value.is_number()) {
        r.config.set(our_dim, value.get<double>());
      }
    }
    if (mapping.contains("extra"))
      for (const auto& [our_key, their_field] : mapping["extra"].items())
        if (j.contains(their_field.get<std::string>()))
          r.extra[our_key] = j[their_field.get<std::string>()].dump();
    // Synthesized monotone ticks keep completion-order analyses meaningful.
    r.submit_tick = r.start_tick = r.end_tick = next_id;
    r.cycle = 0;
    r.source = Source::llm;
    if (mapping.contains("source") && j.contains(mapping["source"].get<std::string>())) {
      if (auto s = source_from(j[mapping["source"].get<std::string>()].get<std::string>()))
        r.source = *s;
    }
    r.id = next_id;  // normalized log ids are always strictly increasing
    ++next_id;
    ++result.stats.parsed;
    result.log.records.push_back(std::move(r));
  }
  (void)line_number;
  return result;
}

}  // namespace searchlab
