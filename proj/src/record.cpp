#include "searchlab/record.hpp"

namespace searchlab {

const char* to_string(RecordStatus s) {
  switch (s) {
    case RecordStatus::completed: return "completed";
    case RecordStatus::failed: return "failed";
    case RecordStatus::abandoned: return "abandoned";
  }
  return "?";
}

const char* to_string(FailureCategory c) {
  switch (c) {
    case FailureCategory::nan_loss: return "nan_loss";
    case FailureCategory::oom: return "oom";
    case FailureCategory::missing_file: return "missing_file";
  }
  return "?";
}

const char* to_string(Source s) {
  switch (s) {
    case Source::llm: return "llm";
    case Source::sweep: return "sweep";
    case Source::random: return "random";
    case Source::tpe: return "tpe";
    case Source::oracle_policy: return "oracle_policy";
  }
  return "?";
}

const char* to_string(Priority p) {
  switch (p) {
    case Priority::high: return "high";
    case Priority::medium: return "medium";
    case Priority::low: return "low";
  }
  return "?";
}

std::optional<RecordStatus> record_status_from(const std::string& s) {
  if (s == "completed") return RecordStatus::completed;
  if (s == "failed") return RecordStatus::failed;
  if (s == "abandoned") return RecordStatus::abandoned;
  return std::nullopt;
}

std::optional<FailureCategory> failure_category_from(const std::string& s) {
  if (s == "nan_loss") return FailureCategory::nan_loss;
  if (s == "oom") return FailureCategory::oom;
  if (s == "missing_file") return FailureCategory::missing_file;
  return std::nullopt;
}

std::optional<Source> source_from(const std::string& s) {
  if (s == "llm") return Source::llm;
  if (s == "sweep") return Source::sweep;
  if (s == "random") return Source::random;
  if (s == "tpe") return Source::tpe;
  if (s == "oracle_policy") return Source::oracle_policy;
  return std::nullopt;
}

std::optional<Priority> priority_from(const std::string& s) {
  if (s == "high") return Priority::high;
  if (s == "medium") return Priority::medium;
  if (s == "low") return Priority::low;
  return std::nullopt;
}

std::int64_t History::completed_count() const {
  std::int64_t n = 0;
  for (const auto& r : records)
    if (r.status == RecordStatus::completed) ++n;
  return n;
}

std::vector<const ExperimentRecord*> History::completed() const {
  std::vector<const ExperimentRecord*> out;
  for (const auto& r : records)
    if (r.status == RecordStatus::completed) out.push_back(&r);
  return out;
}

}  // namespace searchlab
