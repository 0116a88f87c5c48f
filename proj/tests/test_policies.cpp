#include <doctest.h>

#include <atomic>
#include <cmath>
#include <set>
#include <thread>

#include <httplib.h>

#include "searchlab/policies.hpp"

using namespace searchlab;

namespace {

ConfigurationSpace pool_space() {
  return define_space(R"({"dimensions": [
    {"name": "color", "kind": "categorical", "subspace": "arch",
     "levels": ["c1", "c2", "c3", "c4", "c5"]}]})");
}

std::vector<ExperimentRecord> make_pool(const std::vector<double>& aps,
                                        const ConfigurationSpace& space) {
  std::vector<ExperimentRecord> pool;
  for (std::size_t i = 0; i < aps.size(); ++i) {
    ExperimentRecord r;
    r.id = static_cast<std::int64_t>(i + 1);
    r.config.set("color", space.at("color").levels[i]);
    r.status = RecordStatus::completed;
    r.ap = aps[i];
    r.end_tick = static_cast<std::int64_t>(i + 1);
    pool.push_back(std::move(r));
  }
  return pool;
}

std::vector<ExperimentRecord> history_with_good_backbone(const ConfigurationSpace& space,
                                                         const std::string& good_backbone,
                                                         double good_lr = -1.0) {
  Rng rng(4242);
  std::vector<ExperimentRecord> history;
  for (int i = 0; i < 40; ++i) {
    ExperimentRecord r;
    r.id = i + 1;
    r.config = sample_uniform(space, rng);
    r.status = RecordStatus::completed;
    if (i < 10) {
      r.config.set("backbone", good_backbone);
      if (good_lr > 0.0) r.config.set("learning_rate", good_lr);
      r.ap = 0.9 - 0.001 * i;
    } else {
      // Spread the rest across the other backbones with mediocre scores.
      if (r.config.level("backbone") == good_backbone) r.config.set("backbone", "convnext");
      r.ap = 0.2 + 0.01 * (i % 20);
    }
    r.end_tick = i + 1;
    history.push_back(std::move(r));
  }
  return history;
}

}  // namespace

TEST_CASE("random proposals validate, are deterministic, and cover small spaces") {
  const auto& space = ConfigurationSpace::default_space();
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const Proposal p = propose_random(space, rng);
    CHECK(validate(space, p.config).empty());
    CHECK(p.source == Source::random);
    CHECK(p.priority == Priority::medium);
  }
  Rng a(9), b(9);
  CHECK(propose_random(space, a).config == propose_random(space, b).config);

  // 10,000 proposals cover a 16-cell toy space.
  const auto toy = define_space(R"({"dimensions": [
    {"name": "a", "kind": "categorical", "levels": ["1", "2", "3", "4"]},
    {"name": "b", "kind": "categorical", "levels": ["1", "2", "3", "4"]}]})");
  Rng rng2(2);
  std::set<std::string> seen;
  for (int i = 0; i < 10000; ++i)
    seen.insert(cell_of(toy, propose_random(toy, rng2).config).to_string());
  CHECK(seen.size() == 16);
}

TEST_CASE("every policy validates on randomly generated spaces") {
  Rng meta(2718);
  for (int trial = 0; trial < 10; ++trial) {
    std::string schema = R"({"dimensions": [)";
    const int n_cat = 2 + static_cast<int>(meta.below(3));
    for (int i = 0; i < n_cat; ++i) {
      if (i) schema += ",";
      schema += R"({"name": "cat)" + std::to_string(i) +
                R"(", "kind": "categorical", "levels": [)";
      const int levels = 2 + static_cast<int>(meta.below(3));
      for (int l = 0; l < levels; ++l) {
        if (l) schema += ",";
        schema += "\"v" + std::to_string(l) + "\"";
      }
      schema += "]}";
    }
    schema += R"(, {"name": "xlin", "kind": "continuous", "bounds": [0.0, 2.0]},
                  {"name": "xlog", "kind": "continuous", "bounds": [0.01, 10.0],
                   "scale": "logarithmic"}]})";
    const auto space = define_space(schema);

    Rng rng(static_cast<std::uint64_t>(trial));
    std::vector<ExperimentRecord> history;
    for (int i = 0; i < 30; ++i) {
      ExperimentRecord r;
      r.id = i + 1;
      r.config = sample_uniform(space, rng);
      r.status = RecordStatus::completed;
      r.ap = rng.uniform();
      r.end_tick = i + 1;
      history.push_back(std::move(r));
    }
    TpeParams params;
    for (int i = 0; i < 20; ++i) {
      CHECK(validate(space, propose_random(space, rng).config).empty());
      CHECK(validate(space, propose_tpe(history, space, params, rng).config).empty());
      CHECK(validate(space, propose_tpe({}, space, params, rng).config).empty());
    }
  }
}

TEST_CASE("pool random sampling without replacement") {
  const auto space = pool_space();
  const auto pool = make_pool({0.1, 0.2, 0.3, 0.4, 0.5}, space);

  SUBCASE("a pool of one yields that config") {
    const auto single = make_pool({0.7}, define_space(R"({"dimensions": [
      {"name": "color", "kind": "categorical", "levels": ["c1"]}]})"));
    PoolRandomSampler sampler(single, true);
    Rng rng(1);
    CHECK(sampler.next(rng).config == single[0].config);
    CHECK(sampler.exhausted());
  }

  SUBCASE("mean running max after 2 draws matches exhaustive enumeration") {
    // Exhaustive oracle over all 20 ordered pairs.
    double exact = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        if (i == j) continue;
        exact += std::max(*pool[i].ap, *pool[j].ap);
        ++pairs;
      }
    exact /= pairs;
    CHECK(exact == doctest::Approx(0.4));

    std::map<std::string, double> ap_of;
    for (const auto& r : pool) ap_of[r.config.level("color")] = *r.ap;
    double total = 0.0;
    const int trials = 20000;
    Rng rng(55);
    for (int t = 0; t < trials; ++t) {
      PoolRandomSampler sampler(pool, true);
      const double first = ap_of[sampler.next(rng).config.level("color")];
      const double second = ap_of[sampler.next(rng).config.level("color")];
      total += std::max(first, second);
    }
    CHECK(total / trials == doctest::Approx(exact).epsilon(0.02));
  }

  SUBCASE("drawing past the pool raises the exhaustion error") {
    PoolRandomSampler sampler(pool, true);
    Rng rng(3);
    for (int i = 0; i < 5; ++i) sampler.next(rng);
    CHECK(sampler.exhausted());
    CHECK_THROWS_WITH_AS(sampler.next(rng), doctest::Contains("pool exhausted"), DataError);
  }

  SUBCASE("pool policies never emit configurations outside the pool") {
    std::set<std::string> keys;
    for (const auto& r : pool) keys.insert(fingerprint(space, r.config).key());
    Rng rng(4);
    PoolRandomSampler random_sampler(pool, false);
    for (int i = 0; i < 50; ++i)
      CHECK(keys.count(fingerprint(space, random_sampler.next(rng).config).key()) == 1);
    PoolOracleSampler oracle_sampler(pool);
    while (!oracle_sampler.exhausted())
      CHECK(keys.count(fingerprint(space, oracle_sampler.next().config).key()) == 1);
    PoolTpeSampler tpe_sampler(pool, space, TpeParams{});
    std::vector<ExperimentRecord> revealed;
    while (!tpe_sampler.exhausted()) {
      const Proposal p = tpe_sampler.next(revealed, rng);
      CHECK(keys.count(fingerprint(space, p.config).key()) == 1);
    }
  }
}

TEST_CASE("oracle pool policy picks the best remaining entry") {
  const auto space = pool_space();
  const auto pool = make_pool({0.3, 0.9, 0.5, 0.9, 0.1}, space);
  PoolOracleSampler sampler(pool);
  // Ties broken by the earlier record: c2 before c4.
  CHECK(sampler.next().config.level("color") == "c2");
  CHECK(sampler.next().config.level("color") == "c4");
  CHECK(sampler.next().config.level("color") == "c3");
  CHECK(sampler.next().config.level("color") == "c1");
  CHECK(sampler.next().config.level("color") == "c5");
  CHECK_THROWS_AS(sampler.next(), DataError);
}

TEST_CASE("tpe concentrates on the backbone that owns the top quantile") {
  const auto& space = ConfigurationSpace::default_space();
  const auto history = history_with_good_backbone(space, "vjepa2");
  TpeParams params;
  Rng rng(7);
  int hits = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const Proposal p = propose_tpe(history, space, params, rng);
    CHECK(validate(space, p.config).empty());
    CHECK(p.source == Source::tpe);
    if (p.config.level("backbone") == "vjepa2") ++hits;
  }
  CHECK(static_cast<double>(hits) / n > 1.0 / 6.0 + 0.1);
}

TEST_CASE("tpe below min_history falls back to uniform sampling") {
  const auto& space = ConfigurationSpace::default_space();
  std::vector<ExperimentRecord> history;  // empty
  TpeParams params;
  Rng rng(11);
  std::map<std::string, int> counts;
  const int n = 6000;
  for (int i = 0; i < n; ++i)
    counts[propose_tpe(history, space, params, rng).config.level("backbone")] += 1;
  // Uniformity at significance 0.01 (chi-square df 5 critical value 15.086).
  double chi2 = 0.0;
  const double expected = n / 6.0;
  for (const auto& level : space.at("backbone").levels) {
    const double d = counts[level] - expected;
    chi2 += d * d / expected;
  }
  CHECK(chi2 < 15.086);
}

TEST_CASE("tpe tracks a learning-rate cluster in the good set") {
  const auto& space = ConfigurationSpace::default_space();
  const auto history = history_with_good_backbone(space, "vjepa2", 1e-3);
  TpeParams params;
  Rng rng(13);
  std::vector<double> lrs;
  for (int i = 0; i < 400; ++i)
    lrs.push_back(propose_tpe(history, space, params, rng).config.real("learning_rate"));
  std::sort(lrs.begin(), lrs.end());
  const double median = lrs[lrs.size() / 2];
  CHECK(median > 3e-4);
  CHECK(median < 3e-3);
}

TEST_CASE("context encoding renders the leaderboard and budget lines") {
  const auto& space = ConfigurationSpace::default_space();

  SUBCASE("empty history still renders headers and budget") {
    History history;
    const PolicyContext ctx = build_context(history, space, 5, 50, 10, {{"backbone", 1}});
    const std::string text = encode_context(ctx, space, 4);
    CHECK(text.find("## Current Leaderboard (Top 5)") != std::string::npos);
    CHECK(text.find("| Rank | AP | Backbone | Encoder | Loss |") != std::string::npos);
    CHECK(text.find("## Diversity Budget") != std::string::npos);
    CHECK(text.find("Banned configs: [none]") != std::string::npos);
  }

  SUBCASE("seven completed records render exactly five rows, ap descending") {
    History history;
    Rng rng(3);
    for (int i = 0; i < 7; ++i) {
      ExperimentRecord r;
      r.id = i + 1;
      r.config = sample_uniform(space, rng);
      r.status = RecordStatus::completed;
      r.ap = 0.5 + 0.05 * i;
      r.end_tick = i + 1;
      history.records.push_back(std::move(r));
    }
    const PolicyContext ctx = build_context(history, space, 5, 50, 10, {});
    CHECK(ctx.leaderboard.size() == 5);
    for (std::size_t i = 1; i < ctx.leaderboard.size(); ++i)
      CHECK(ctx.leaderboard[i - 1].ap >= ctx.leaderboard[i].ap);
    CHECK(ctx.leaderboard.front().ap == doctest::Approx(0.80));
    const std::string text = encode_context(ctx, space, 4);
    std::size_t rows = 0, pos = 0;
    while ((pos = text.find("\n| ", pos)) != std::string::npos) {
      ++rows;
      ++pos;
    }
    CHECK(rows == 6);  // header separator row + 5 data rows
  }

  SUBCASE("non-modal budget line names the actual modal level") {
    History history;
    Rng rng(5);
    for (int i = 0; i < 12; ++i) {
      ExperimentRecord r;
      r.id = i + 1;
      r.config = sample_uniform(space, rng);
      r.config.set("backbone", i < 9 ? "vjepa2" : "convnext");
      r.status = RecordStatus::completed;
      r.ap = 0.5;
      r.end_tick = i + 1;
      history.records.push_back(std::move(r));
    }
    const PolicyContext ctx = build_context(history, space, 5, 50, 10, {{"backbone", 1}});
    const std::string text = encode_context(ctx, space, 4);
    CHECK(text.find("At least 1 idea must use a non-vjepa2 backbone") != std::string::npos);
  }
}

TEST_CASE("idea documents in the interchange layout parse to proposals") {
  const auto& space = ConfigurationSpace::default_space();
  const std::string doc = R"(- idea_name: "bimamba focal push"
  backbone: vjepa2_vitl14
  temporal_encoder: bimamba
  loss: focal
  focal_gamma: 3.0
  learning_rate: 3e-4
  weight_decay: 0.05
  batch_size: 64
  seq_len: 20
  epochs: 15
  priority: high
  rationale: "linear-time encoder may
    generalize better at this clip length"
)";
  const IdeaParseResult result = parse_ideas(doc, space);
  REQUIRE(result.proposals.size() == 1);
  CHECK(result.rejections.empty());
  const Proposal& p = result.proposals.front();
  CHECK(p.config.level("backbone") == "vjepa2");
  CHECK(p.config.level("encoder") == "bimamba");
  CHECK(p.config.level("loss") == "focal");
  CHECK(p.config.real("focal_gamma") == doctest::Approx(3.0));
  CHECK(p.config.real("learning_rate") == doctest::Approx(3e-4));
  CHECK(p.priority == Priority::high);
  CHECK(p.source == Source::llm);
  CHECK(p.rationale.find("linear-time encoder") != std::string::npos);
  CHECK(validate(space, p.config).empty());
}

TEST_CASE("idea rejection reasons name the problem") {
  const auto& space = ConfigurationSpace::default_space();

  SUBCASE("missing backbone") {
    const std::string doc = R"(- idea_name: "incomplete"
  temporal_encoder: zipformer
  loss: bce
  learning_rate: 1e-3
  batch_size: 32
  seq_len: 20
  epochs: 10
)";
    const IdeaParseResult result = parse_ideas(doc, space);
    CHECK(result.proposals.empty());
    REQUIRE(result.rejections.size() == 1);
    CHECK(result.rejections.front().find("backbone") != std::string::npos);
  }

  SUBCASE("focal gamma out of bounds") {
    const std::string doc = R"(- idea_name: "too focal"
  backbone: vjepa2
  temporal_encoder: zipformer
  loss: focal
  focal_gamma: 9.0
  learning_rate: 1e-3
  batch_size: 32
  seq_len: 20
  epochs: 10
)";
    const IdeaParseResult result = parse_ideas(doc, space);
    CHECK(result.proposals.empty());
    REQUIRE(result.rejections.size() == 1);
    CHECK(result.rejections.front().find("out of bounds") != std::string::npos);
  }

  SUBCASE("garbage documents report no ideas") {
    const IdeaParseResult result = parse_ideas("nothing YAML-like here", space);
    CHECK(result.proposals.empty());
    CHECK(!result.rejections.empty());
  }
}

TEST_CASE("render and parse round-trip preserves the configuration") {
  const auto& space = ConfigurationSpace::default_space();
  Rng rng(21);
  for (int i = 0; i < 50; ++i) {
    Proposal p = propose_random(space, rng);
    p.idea_name = "roundtrip-" + std::to_string(i);
    p.rationale = "generated for the round trip";
    const std::string doc = render_ideas({p}, space);
    const IdeaParseResult back = parse_ideas(doc, space);
    REQUIRE(back.proposals.size() == 1);
    CHECK(back.proposals.front().config == p.config);
    CHECK(back.proposals.front().priority == p.priority);
  }
}

TEST_CASE("llm endpoint round-trip, fallback, and partial rejection") {
  const auto& space = ConfigurationSpace::default_space();

  auto serve = [&](const std::string& body, int port, auto&& fn) {
    httplib::Server server;
    server.Post("/propose", [&](const httplib::Request&, httplib::Response& res) {
      res.set_content(body, "text/plain");
    });
    std::thread thread([&] { server.listen("127.0.0.1", port); });
    server.wait_until_ready();
    EndpointConfig endpoint;
    endpoint.url = "http://127.0.0.1:" + std::to_string(port) + "/propose";
    endpoint.timeout_ms = 2000;
    endpoint.max_retries = 0;
    fn(endpoint);
    server.stop();
    thread.join();
  };

  SUBCASE("valid document round-trips with source=llm") {
    Rng rng(5);
    std::vector<Proposal> seed_proposals;
    for (int i = 0; i < 3; ++i) {
      Proposal p = propose_random(space, rng);
      p.idea_name = "stub-" + std::to_string(i);
      seed_proposals.push_back(std::move(p));
    }
    const std::string body = render_ideas(seed_proposals, space);
    serve(body, 18731, [&](const EndpointConfig& endpoint) {
      Rng prng(1);
      const LlmProposeResult result = propose_llm("ctx", endpoint, space, 3, prng);
      CHECK(!result.fallback_used);
      REQUIRE(result.proposals.size() == 3);
      for (const auto& p : result.proposals) CHECK(p.source == Source::llm);
    });
  }

  SUBCASE("garbage response falls back to one random proposal") {
    serve("!!! not ideas at all", 18732, [&](const EndpointConfig& endpoint) {
      Rng prng(2);
      const LlmProposeResult result = propose_llm("ctx", endpoint, space, 3, prng);
      CHECK(result.fallback_used);
      REQUIRE(result.proposals.size() == 1);
      CHECK(result.proposals.front().source == Source::random);
      CHECK(validate(space, result.proposals.front().config).empty());
    });
  }

  SUBCASE("five ideas with two invalid yield three proposals plus rejections") {
    Rng rng(6);
    std::vector<Proposal> good;
    for (int i = 0; i < 3; ++i) {
      Proposal p = propose_random(space, rng);
      p.idea_name = "good-" + std::to_string(i);
      good.push_back(std::move(p));
    }
    std::string body = render_ideas(good, space);
    body += R"(- idea_name: "bad gamma"
  backbone: vjepa2
  temporal_encoder: zipformer
  loss: focal
  focal_gamma: 42
  learning_rate: 1e-3
  batch_size: 32
  seq_len: 20
  epochs: 10
- idea_name: "bad backbone"
  backbone: resnet50
  temporal_encoder: zipformer
  loss: bce
  learning_rate: 1e-3
  batch_size: 32
  seq_len: 20
  epochs: 10
)";
    serve(body, 18733, [&](const EndpointConfig& endpoint) {
      Rng prng(3);
      const LlmProposeResult result = propose_llm("ctx", endpoint, space, 5, prng);
      CHECK(!result.fallback_used);
      CHECK(result.proposals.size() == 3);
      CHECK(result.rejections.size() == 2);
    });
  }

  SUBCASE("unreachable endpoint falls back after retries") {
    EndpointConfig endpoint;
    endpoint.url = "http://127.0.0.1:9/propose";  // discard port, nothing listens
    endpoint.timeout_ms = 200;
    endpoint.max_retries = 1;
    Rng prng(4);
    const LlmProposeResult result = propose_llm("ctx", endpoint, space, 3, prng);
    CHECK(result.fallback_used);
    CHECK(!result.transport_error.empty());
    REQUIRE(result.proposals.size() == 1);
    CHECK(result.proposals.front().source == Source::random);
  }
}

TEST_CASE("sweep expansion") {
  const auto& space = ConfigurationSpace::default_space();
  Rng rng(8);
  Proposal base = propose_random(space, rng);
  while (base.config.level("loss") != "focal") base = propose_random(space, rng);
  base.parent_id = 7;

  SUBCASE("gamma list expands to three children differing only in gamma") {
    SweepSpec spec;
    spec.grid.emplace_back("focal_gamma",
                           std::vector<ConfigValue>{2.0, 2.5, 3.0});
    const auto children = expand_sweep(base, spec, space);
    REQUIRE(children.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(children[i].config.real("focal_gamma") == doctest::Approx(2.0 + 0.5 * i));
      CHECK(children[i].source == Source::sweep);
      CHECK(children[i].parent_id == 7);
      CHECK(cell_of(space, children[i].config) == cell_of(space, base.config));
      Configuration same = children[i].config;
      same.set("focal_gamma", base.config.real("focal_gamma"));
      CHECK(same == base.config);
    }
  }

  SUBCASE("empty sweep spec expands to nothing") {
    CHECK(expand_sweep(base, SweepSpec{}, space).empty());
  }

  SUBCASE("cartesian grids multiply") {
    SweepSpec spec;
    spec.grid.emplace_back("focal_gamma", std::vector<ConfigValue>{2.0, 3.0});
    spec.grid.emplace_back("learning_rate", std::vector<ConfigValue>{1e-4, 1e-3, 5e-3});
    CHECK(expand_sweep(base, spec, space).size() == 6);
  }

  SUBCASE("unknown sweep dimension throws") {
    SweepSpec spec;
    spec.grid.emplace_back("dropout", std::vector<ConfigValue>{0.1});
    CHECK_THROWS_WITH_AS(expand_sweep(base, spec, space), doctest::Contains("not in space"),
                         Error);
  }
}
