#pragma once

// Experiment records and the append-only campaign history. Records are
// appended in completion order; ids are assigned in submit order.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "searchlab/space.hpp"

namespace searchlab {

enum class RecordStatus { completed, failed, abandoned };
enum class FailureCategory { nan_loss, oom, missing_file };
enum class Source { llm, sweep, random, tpe, oracle_policy };
enum class Priority { high = 0, medium = 1, low = 2 };

const char* to_string(RecordStatus s);
const char* to_string(FailureCategory c);
const char* to_string(Source s);
const char* to_string(Priority p);

std::optional<RecordStatus> record_status_from(const std::string& s);
std::optional<FailureCategory> failure_category_from(const std::string& s);
std::optional<Source> source_from(const std::string& s);
std::optional<Priority> priority_from(const std::string& s);

struct ExperimentRecord {
  std::int64_t id = 0;
  std::string agent;  // "unattributed" when unknown
  std::int64_t cycle = 0;
  std::optional<std::int64_t> parent_id;
  Configuration config;
  Source source = Source::random;
  RecordStatus status = RecordStatus::completed;
  std::optional<double> ap;
  std::optional<FailureCategory> failure_category;
  int heal_attempts = 0;
  std::int64_t submit_tick = 0;
  std::int64_t start_tick = 0;
  std::int64_t end_tick = 0;
  // Unknown fields from ingested logs, preserved opaquely (key -> raw JSON).
  std::map<std::string, std::string> extra;
};

struct CycleStats {
  std::int64_t cycle = 0;
  int generated = 0;
  int accepted = 0;
  int rejected_dedup = 0;
  int replaced_diversity = 0;
  // Endpoint transport errors and per-idea rejection reasons from this cycle.
  std::vector<std::string> notes;
};

// Append-only campaign log, ordered by completion (end_tick, id).
struct History {
  std::vector<ExperimentRecord> records;
  std::vector<CycleStats> cycles;
  bool truncated = false;
  std::string truncation_reason;

  std::int64_t completed_count() const;
  std::vector<const ExperimentRecord*> completed() const;
};

}  // namespace searchlab
