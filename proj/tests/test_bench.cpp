#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "snnkit/bench.hpp"
#include "snnkit/data.hpp"

using namespace snnkit;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

SweepSpec tiny_spec() {
  SweepSpec spec;
  spec.units = {12};
  spec.steps = {10};
  spec.batches = {6};
  spec.layer_counts = {1};
  spec.reps = 3;
  spec.warmup = 1;
  spec.seed = 9;
  return spec;
}

std::vector<BenchRecord> sample_records() {
  BenchRecord seq;
  seq.model = "seq-single";
  seq.n = 100;
  seq.t = 128;
  seq.b = 32;
  seq.layers = 1;
  seq.fwd_ms = 1.5;
  seq.bwd_ms = 2.25;
  seq.total_ms = 3.75;
  seq.mad_ms = 0.125;

  BenchRecord fast = seq;
  fast.model = "fast-single";
  fast.fwd_ms = 0.5;
  fast.bwd_ms = 1.0;
  fast.total_ms = 1.5;
  fast.mad_ms = 0.0625;
  fast.speedup_vs_seq = 2.5;

  BenchRecord skip;
  skip.model = "seq-single";
  skip.n = 100000;
  skip.t = 128;
  skip.b = 32;
  skip.layers = 1;
  skip.skipped = true;
  skip.skip_reason = "out of memory";
  return {seq, fast, skip};
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path);
  REQUIRE(bool(is));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("sweep validation") {
  SweepSpec spec = tiny_spec();
  CHECK_NOTHROW(spec.validate());

  spec.reps = 2;
  CHECK_THROWS_AS(spec.validate(), ParamError);
  spec = tiny_spec();
  spec.warmup = 0;
  CHECK_THROWS_AS(spec.validate(), ParamError);
  spec = tiny_spec();
  spec.models.clear();
  CHECK_THROWS_AS(spec.validate(), ParamError);
  spec = tiny_spec();
  spec.units = {0};
  CHECK_THROWS_AS(spec.validate(), ParamError);
  spec = tiny_spec();
  spec.steps.clear();
  CHECK_THROWS_AS(spec.validate(), ParamError);
}

TEST_CASE("single-pass timer invariants") {
  NetworkConfig cfg;
  cfg.sizes = {5, 6, 3};
  cfg.T = 12;
  cfg.variant = ModelVariant::FastSingle;
  cfg.seed = 4;
  const auto net = init_network<float>(cfg);
  const auto batch = gen_synthetic<float>(4, 5, 12, 1.0, 0.0, 200.0, 11);

  const PassTimes pt = time_pass(net, batch, 3, 1);
  CHECK(pt.fwd_ms > 0.0);
  CHECK(pt.bwd_ms > 0.0);
  CHECK(pt.total_ms > 0.0);
  CHECK(pt.mad_ms >= 0.0);
  // each rep's total is that rep's fwd + bwd, so the medians are ordered
  CHECK(pt.total_ms >= pt.fwd_ms);
  CHECK(pt.total_ms >= pt.bwd_ms);

  CHECK_NOTHROW(time_pass(net, batch, 1, 0));
  CHECK_THROWS_AS(time_pass(net, batch, 0, 1), ParamError);
  CHECK_THROWS_AS(time_pass(net, batch, 3, -1), ParamError);
}

TEST_CASE("grid shape and baseline linkage") {
  SweepSpec spec = tiny_spec();
  spec.units = {12, 20};
  spec.layer_counts = {1, 2};
  // deliberately listed fast first: records must still pair baseline-first
  spec.models = {ModelVariant::FastSingle, ModelVariant::SeqSingle};

  const auto recs = run_sweep(spec);
  REQUIRE(recs.size() == 8);  // 2 units x 2 layer counts x 2 models
  for (std::size_t i = 0; i < recs.size(); i += 2) {
    const BenchRecord& seq = recs[i];
    const BenchRecord& fast = recs[i + 1];
    CHECK(seq.model == "seq-single");
    CHECK(fast.model == "fast-single");
    CHECK(seq.speedup_vs_seq < 0.0);  // baseline rows carry no speedup
    REQUIRE(fast.speedup_vs_seq > 0.0);
    CHECK(fast.speedup_vs_seq ==
          doctest::Approx(seq.total_ms / fast.total_ms).epsilon(1e-9));
    CHECK(seq.n == fast.n);
    CHECK(seq.layers == fast.layers);
    CHECK(seq.t == 10);
    CHECK(seq.b == 6);
    CHECK(!seq.skipped);
    CHECK(!fast.skipped);
  }
  CHECK(recs[0].n == 12);
  CHECK(recs[0].layers == 1);
  CHECK(recs[2].layers == 2);
  CHECK(recs[4].n == 20);
}

TEST_CASE("fixed and both beta modes") {
  SweepSpec spec = tiny_spec();
  spec.beta_mode = BetaBenchMode::Fixed;
  const auto fixed = run_sweep(spec);
  REQUIRE(fixed.size() == 2);
  CHECK(fixed[0].model == "seq-single-fixedbeta");
  CHECK(fixed[1].model == "fast-single-fixedbeta");

  spec.beta_mode = BetaBenchMode::Both;
  const auto both = run_sweep(spec);
  REQUIRE(both.size() == 4);
  CHECK(both[0].model == "seq-single");
  CHECK(both[1].model == "fast-single");
  CHECK(both[2].model == "seq-single-fixedbeta");
  CHECK(both[3].model == "fast-single-fixedbeta");
}

TEST_CASE("structure is reproducible across runs") {
  SweepSpec spec = tiny_spec();
  spec.units = {12, 16};
  const auto a = run_sweep(spec);
  const auto b = run_sweep(spec);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].model == b[i].model);
    CHECK(a[i].n == b[i].n);
    CHECK(a[i].t == b[i].t);
    CHECK(a[i].b == b[i].b);
    CHECK(a[i].layers == b[i].layers);
    CHECK((a[i].speedup_vs_seq < 0) == (b[i].speedup_vs_seq < 0));
    CHECK(a[i].skipped == b[i].skipped);
  }
}

TEST_CASE("sequential cost scales with the horizon; parallel model wins at scale") {
  SweepSpec growth;
  growth.units = {64};
  growth.steps = {32, 64};
  growth.batches = {16};
  growth.models = {ModelVariant::SeqSingle};
  growth.reps = 5;
  growth.warmup = 2;
  const auto g = run_sweep(growth);
  REQUIRE(g.size() == 2);
  CHECK(g[1].total_ms > 1.4 * g[0].total_ms);  // ~2x for doubled T

  SweepSpec race;
  race.units = {100};
  race.steps = {512};
  race.batches = {64};
  race.reps = 5;
  race.warmup = 2;
  const auto r = run_sweep(race);
  REQUIRE(r.size() == 2);
  CHECK(r[0].model == "seq-single");
  CHECK(r[1].model == "fast-single");
  CHECK(r[1].total_ms < r[0].total_ms);
  CHECK(r[1].speedup_vs_seq > 1.0);
}

TEST_CASE("csv report layout") {
  const std::string path = temp_path("snnkit_bench.csv");
  emit_report(sample_records(), path, "csv");
  const auto lines = read_lines(path);
  REQUIRE(lines.size() == 3);  // header + 2 rows; skipped rows never reach the CSV
  CHECK(lines[0] == "model,n,t,b,layers,fwd_ms,bwd_ms,total_ms,mad_ms,speedup_vs_seq");
  CHECK(lines[1] == "seq-single,100,128,32,1,1.500000,2.250000,3.750000,0.125000,");
  CHECK(lines[2] == "fast-single,100,128,32,1,0.500000,1.000000,1.500000,0.062500,2.500000");
  std::filesystem::remove(path);
}

TEST_CASE("json report round-trip") {
  const std::string path = temp_path("snnkit_bench.json");
  const auto recs = sample_records();
  emit_report(recs, path, "json");

  {
    std::ifstream is(path);
    std::stringstream ss;
    ss << is.rdbuf();
    CHECK(ss.str().find("\"schema_version\": 1") != std::string::npos);
  }

  const auto back = parse_report_json(path);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].model == recs[i].model);
    CHECK(back[i].n == recs[i].n);
    CHECK(back[i].t == recs[i].t);
    CHECK(back[i].b == recs[i].b);
    CHECK(back[i].layers == recs[i].layers);
    CHECK(back[i].skipped == recs[i].skipped);
    if (recs[i].skipped) {
      CHECK(back[i].skip_reason == recs[i].skip_reason);
    } else {
      CHECK(back[i].fwd_ms == recs[i].fwd_ms);
      CHECK(back[i].bwd_ms == recs[i].bwd_ms);
      CHECK(back[i].total_ms == recs[i].total_ms);
      CHECK(back[i].mad_ms == recs[i].mad_ms);
      CHECK(back[i].speedup_vs_seq == recs[i].speedup_vs_seq);
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("report failure modes") {
  const auto recs = sample_records();
  CHECK_THROWS_AS(emit_report(recs, "/nonexistent/dir/report.csv", "csv"), IoError);
  CHECK_THROWS_AS(emit_report(recs, temp_path("snnkit_x.tsv"), "tsv"), ParamError);
  CHECK_THROWS_AS(emit_report({}, temp_path("snnkit_x.csv"), "csv"), ParamError);

  CHECK_THROWS_AS(parse_report_json("/nonexistent/report.json"), IoError);

  const std::string bad = temp_path("snnkit_bad.json");
  {
    std::ofstream os(bad);
    os << "{not json";
  }
  CHECK_THROWS_AS(parse_report_json(bad), FormatError);
  {
    std::ofstream os(bad);
    os << R"({"records": [{"model": "x"}], "skipped": []})";
  }
  CHECK_THROWS_AS(parse_report_json(bad), FormatError);
  std::filesystem::remove(bad);
}

}  // TEST_SUITE("bench")
