#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "searchlab/analysis.hpp"
#include "searchlab/log.hpp"
#include "searchlab/oracle.hpp"
#include "searchlab/orchestrator.hpp"
#include "searchlab/report.hpp"

using namespace searchlab;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("searchlab_test_" + name)).string();
}

History run_small_campaign(std::uint64_t seed, std::int64_t steps = 100) {
  const auto& space = ConfigurationSpace::default_space();
  CampaignConfig cfg;
  cfg.n_steps = steps;
  cfg.n_workers = 2;
  cfg.seed = seed;
  AgentSpec agent;
  agent.name = "rand";
  agent.policy = PolicyKind::random;
  agent.ideas_per_cycle = 4;
  cfg.agents.push_back(agent);
  SyntheticOracle oracle(calibrate_default(space, seed), space);
  return run_campaign(space, oracle, cfg);
}

}  // namespace

TEST_CASE("write/read round-trip preserves a 100-record campaign") {
  const auto& space = ConfigurationSpace::default_space();
  CampaignConfig cfg;
  cfg.seed = 5;
  const History history = run_small_campaign(5);
  const std::string path = temp_path("roundtrip.jsonl");
  write_log(history, space, cfg, path);
  const CampaignLog log = read_log(path, space.schema_hash());
  CHECK(log.warnings.empty());

  // Same records in id order.
  std::vector<const ExperimentRecord*> ordered;
  for (const auto& r : history.records) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const ExperimentRecord* a, const ExperimentRecord* b) { return a->id < b->id; });
  REQUIRE(log.records.size() == ordered.size());
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const auto& a = *ordered[i];
    const auto& b = log.records[i];
    CHECK(a.id == b.id);
    CHECK(a.agent == b.agent);
    CHECK(a.status == b.status);
    CHECK(a.source == b.source);
    CHECK(a.submit_tick == b.submit_tick);
    CHECK(a.end_tick == b.end_tick);
    CHECK(a.config == b.config);
    if (a.ap) {
      REQUIRE(b.ap.has_value());
      CHECK(*b.ap == doctest::Approx(*a.ap).epsilon(1e-8));
    }
  }
  // Identical analysis results from the round-tripped log.
  const BestSeries before = cumulative_best(history.records);
  const BestSeries after = cumulative_best(log.records);
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(before[i].ap_star == doctest::Approx(after[i].ap_star).epsilon(1e-8));
  std::filesystem::remove(path);
}

TEST_CASE("serialization is canonical: write(read(write)) is byte-identical") {
  const auto& space = ConfigurationSpace::default_space();
  CampaignConfig cfg;
  cfg.seed = 6;
  const History history = run_small_campaign(6, 50);
  const std::string first = serialize_log(history, space, cfg);
  CampaignLog log = parse_log_text(first);
  const std::string second = serialize_log(log);
  CHECK(first == second);
}

TEST_CASE("truncated final line errors with the line number") {
  const auto& space = ConfigurationSpace::default_space();
  CampaignConfig cfg;
  const History history = run_small_campaign(7, 10);
  std::string text = serialize_log(history, space, cfg);
  text.resize(text.size() - 30);  // chop mid-record
  CHECK_THROWS_WITH_AS(parse_log_text(text), doctest::Contains("line"), DataError);
}

TEST_CASE("unknown extra fields are preserved opaquely") {
  const std::string text =
      "{\"format\":\"searchlab-log-v1\",\"schema_hash\":\"1\",\"seed\":0,"
      "\"config_hash\":\"0\",\"tool_version\":\"x\",\"truncated\":false,"
      "\"truncation_reason\":\"\"}\n"
      "{\"id\":1,\"agent\":\"a\",\"cycle\":0,\"parent_id\":null,\"source\":\"random\","
      "\"status\":\"completed\",\"failure_category\":null,\"heal_attempts\":0,"
      "\"submit_tick\":0,\"start_tick\":0,\"end_tick\":1,\"ap\":0.5,"
      "\"config\":{\"backbone\":\"vjepa2\"},\"gpu_node\":\"node-7\",\"wall_seconds\":12.5}\n";
  const CampaignLog log = parse_log_text(text);
  REQUIRE(log.records.size() == 1);
  CHECK(log.records[0].extra.count("gpu_node") == 1);
  CHECK(log.records[0].extra.at("gpu_node") == "\"node-7\"");
  const std::string out = serialize_log(log);
  CHECK(out.find("\"gpu_node\":\"node-7\"") != std::string::npos);
  CHECK(out.find("\"wall_seconds\":12.5") != std::string::npos);
  // Round-trip stability with extras present.
  CHECK(serialize_log(parse_log_text(out)) == out);
}

TEST_CASE("schema hash mismatch is a warning, not an error") {
  const auto& space = ConfigurationSpace::default_space();
  CampaignConfig cfg;
  const History history = run_small_campaign(8, 10);
  const std::string text = serialize_log(history, space, cfg);
  const CampaignLog log = parse_log_text(text, /*expected_schema_hash=*/12345);
  CHECK(!log.warnings.empty());
  CHECK(log.warnings.front().find("schema hash mismatch") != std::string::npos);
}

TEST_CASE("missing header is an error") {
  CHECK_THROWS_AS(parse_log_text("{\"id\":1,\"status\":\"completed\",\"ap\":0.5}\n"),
                  DataError);
}

TEST_CASE("external ingestion with renamed columns") {
  const auto& space = ConfigurationSpace::default_space();
  const std::string path = temp_path("external.jsonl");
  {
    std::ofstream out(path);
    out << R"({"state": "done", "score": 0.81, "model": "agent-a", "bb": "vjepa2", "enc": "zipformer", "run_id": 900, "test_score": 0.79})"
        << "\n";
    out << R"({"state": "done", "score": 0.55, "bb": "convnext", "enc": "retnet"})" << "\n";
    out << R"({"state": "done", "bb": "vjepa2", "enc": "retnet"})" << "\n";
    out << R"({"state": "crashed", "bb": "vjepa2", "enc": "bimamba"})" << "\n";
    out << "not json at all\n";
  }
  const std::string mapping = R"({
    "ap": "score",
    "status": "state",
    "agent": "model",
    "id": "run_id",
    "dims": {"backbone": "bb", "encoder": "enc"},
    "status_values": {"completed": ["done"], "failed": ["crashed"]},
    "extra": {"test_ap": "test_score"}
  })";
  const IngestResult result = ingest_external(path, mapping, space);
  CHECK(result.stats.parsed == 3);  // 2 completed + 1 failed
  CHECK(result.stats.unparseable == 1);
  CHECK(result.stats.dropped_missing_ap == 1);
  REQUIRE(result.log.records.size() == 3);
  CHECK(result.log.records[0].agent == "agent-a");
  CHECK(result.log.records[0].extra.count("test_ap") == 1);
  CHECK(result.log.records[1].agent == "unattributed");
  CHECK(result.log.records[0].config.level("backbone") == "vjepa2");
  CHECK(result.log.records[2].status == RecordStatus::failed);
  // Normalized ids are strictly increasing.
  for (std::size_t i = 1; i < result.log.records.size(); ++i)
    CHECK(result.log.records[i].id > result.log.records[i - 1].id);
  std::filesystem::remove(path);
}

TEST_CASE("report emission is deterministic") {
  const auto& space = ConfigurationSpace::default_space();
  const History history = run_small_campaign(12, 60);
  const std::string dir_a = temp_path("report_a");
  const std::string dir_b = temp_path("report_b");
  ReportOptions options;
  options.entropy_window = 20;
  options.jsd_window = 20;
  options.innovation_window = 20;
  const auto files_a = emit_report(history.records, space, dir_a, options);
  const auto files_b = emit_report(history.records, space, dir_b, options);
  REQUIRE(files_a.size() == files_b.size());
  for (std::size_t i = 0; i < files_a.size(); ++i) {
    std::ifstream fa(files_a[i], std::ios::binary), fb(files_b[i], std::ios::binary);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    CHECK(sa.str() == sb.str());
    CHECK(!sa.str().empty());
  }
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
}

TEST_CASE("ingestion requires the mandatory field mappings") {
  const auto& space = ConfigurationSpace::default_space();
  const std::string path = temp_path("external2.jsonl");
  {
    std::ofstream out(path);
    out << "{}\n";
  }
  CHECK_THROWS_WITH_AS(ingest_external(path, R"({"ap": "score"})", space),
                       doctest::Contains("status"), DataError);
  std::filesystem::remove(path);
}
