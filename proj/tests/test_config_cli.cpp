#include "bosetrap/cli.hpp"
#include "bosetrap/config.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace bosetrap;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bosetrap_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> problems_of(const json& j) {
  try {
    config::parse(j);
  } catch (const config::ConfigError& e) {
    return e.problems();
  }
  return {};
}

json ideal_gas_config(const fs::path& out) {
  return {{"n_particles", 3},
          {"basis_family", "hyperradial"},
          {"potential", {{"type", "none"}}},
          {"svm", {{"k_max", 30}, {"trials", 10}, {"d_min", 0.5}, {"d_max", 2.0}, {"window", 8}, {"energy_tol", 1e-9}}},
          {"observables", {{"below", 0}, {"above", 0}}},
          {"output", {{"directory", out.string()}, {"formats", {"csv", "json"}}}}};
}

}  // namespace

TEST(Config, DefaultsParse) {
  const auto c = config::parse(json::object());
  EXPECT_EQ(c.n_particles, 3);
  EXPECT_EQ(c.family, cgbasis::BasisFamily::pair);
  EXPECT_EQ(c.potential.kind, config::PotentialKind::none);
}

TEST(Config, EveryProblemIsListed) {
  const json j = {{"n_particles", 1},
                  {"colour", "blue"},
                  {"svm", {{"trials", 0}, {"speed", 3}}},
                  {"potential", {{"type", "gaussian"}}},
                  {"output", {{"formats", {"xml"}}}}};
  const auto p = problems_of(j);
  EXPECT_GE(p.size(), 6u);
  auto mentions = [&](const std::string& s) {
    return std::any_of(p.begin(), p.end(), [&](const std::string& x) { return x.find(s) != std::string::npos; });
  };
  EXPECT_TRUE(mentions("colour"));
  EXPECT_TRUE(mentions("speed"));
  EXPECT_TRUE(mentions("n_particles"));
  EXPECT_TRUE(mentions("trials"));
  EXPECT_TRUE(mentions("exactly one of V0_au and target_a_au"));
  EXPECT_TRUE(mentions("xml"));
}

TEST(Config, ZeroRangeNeedsTheUncorrelatedBasis) {
  json j = {{"potential", {{"type", "zero_range"}, {"a_au", 100.0}}}, {"basis_family", "pair"}};
  EXPECT_FALSE(problems_of(j).empty());
  j["basis_family"] = "hyperradial";
  EXPECT_TRUE(problems_of(j).empty());
  j["potential"]["V0_au"] = -1e-7;
  EXPECT_FALSE(problems_of(j).empty());
}

TEST(Config, WrongTypesAndRanges) {
  EXPECT_FALSE(problems_of({{"n_particles", "three"}}).empty());
  EXPECT_FALSE(problems_of({{"svm", {{"d_min", 2.0}, {"d_max", 1.0}}}}).empty());
  EXPECT_FALSE(problems_of({{"svm", {{"d_min", 2.0}}}}).empty());
  EXPECT_FALSE(problems_of({{"potential", {{"type", "gaussian"}, {"V0_au", 1e-7}}}}).empty());
  EXPECT_FALSE(problems_of({{"basis_family", "full"}, {"n_particles", 9}}).empty());
  EXPECT_TRUE(problems_of({{"svm", {{"d_min", 1.0}, {"d_max", 1.0}}}}).empty());
}

TEST(Config, ResolvesPotentialAndSamplingRange) {
  const auto c = config::parse({{"potential", {{"type", "gaussian"}, {"target_a_au", 100.0}}}, {"n_particles", 4}});
  const auto r = config::resolve(c);
  ASSERT_TRUE(r.gaussian.has_value());
  EXPECT_LT(r.gaussian->depth, -1.4e-7);
  EXPECT_NEAR(r.svm.d_min, 11.65 / r.system.trap_length(), 1e-12);
  EXPECT_EQ(r.svm.d_max, 3.0);
  // Sampled strengths 1/d^2 span (3 b_t / b)^2.
  EXPECT_NEAR(std::pow(r.svm.d_max / r.svm.d_min, 2), 3.53672e7, 1e3);
  const auto echo = config::echo(r);
  EXPECT_EQ(echo.at("potential").at("type"), "gaussian");
  EXPECT_NEAR(echo.at("system").at("trap_length_au").get<double>(), 23094.31, 0.01);
}

TEST(Config, LengthsInAtomicUnits) {
  const auto c = config::parse({{"svm", {{"d_min", 1000.0}, {"d_max", 46188.62}, {"d_unit", "au"}}}});
  const auto r = config::resolve(c);
  EXPECT_NEAR(r.svm.d_max, 2.0, 1e-6);
}

TEST(Config, LoadAcceptsComments) {
  const auto dir = scratch("load");
  std::ofstream(dir / "c.json") << "{\n  // four bosons\n  \"n_particles\": 4\n}\n";
  EXPECT_EQ(config::load((dir / "c.json").string()).n_particles, 4);
  std::ofstream(dir / "bad.json") << "{ \"n_particles\": }";
  EXPECT_THROW(config::load((dir / "bad.json").string()), config::ConfigError);
  EXPECT_THROW(config::load((dir / "missing.json").string()), std::runtime_error);
}

TEST(Output, CsvQuoting) {
  EXPECT_EQ(cli::csv_field("plain"), "plain");
  EXPECT_EQ(cli::csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(cli::csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(cli::csv_field("two\nlines"), "\"two\nlines\"");
  cli::Table t;
  t.columns = {"x", "note"};
  t.add({"1", "a,b"});
  t.metadata["k"] = 1;
  const auto csv = t.to_csv();
  EXPECT_EQ(csv.rfind("# {", 0), 0u);
  EXPECT_NE(csv.find("\r\nx,note\r\n1,\"a,b\"\r\n"), std::string::npos);
  EXPECT_THROW(t.add({"only one"}), std::logic_error);
}

TEST(Output, NumbersKeepNonFiniteValuesReadable) {
  EXPECT_EQ(cli::num(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(cli::num(std::nan("")), "nan");
  EXPECT_EQ(cli::num(4.5), "4.5");
}

TEST(Output, AtomicWriteLeavesNoTemporary) {
  const auto dir = scratch("atomic");
  cli::atomic_write(dir / "sub" / "f.txt", "hello");
  EXPECT_EQ(slurp(dir / "sub" / "f.txt"), "hello");
  EXPECT_FALSE(fs::exists(dir / "sub" / "f.txt.tmp"));
  cli::atomic_write(dir / "sub" / "f.txt", "again");
  EXPECT_EQ(slurp(dir / "sub" / "f.txt"), "again");
}

TEST(Cli, TuneSweepReproducesTheTable) {
  config::RunConfig c;
  const auto t = cli::tune_table(c, true);
  ASSERT_EQ(t.rows.size(), 9u);
  for (const auto& row : t.rows) {
    EXPECT_LT(std::abs(std::stod(row[6])), 5e-3) << row[0];
    EXPECT_EQ(row[4], "1");
  }
}

TEST(Cli, TuneSingleTarget) {
  config::RunConfig c;
  c.potential.kind = config::PotentialKind::gaussian;
  c.potential.target_a_au = 402.4;
  const auto t = cli::tune_table(c, false);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_NEAR(std::stod(t.rows[0][0]) / -1.29e-7, 1.0, 1e-3);
  c.potential.target_a_au = 0.0;
  EXPECT_THROW(cli::tune_table(c, false), std::domain_error);
}

TEST(Cli, SolveSpectrumObservablesRoundTrip) {
  const auto dir = scratch("solve");
  std::ofstream(dir / "run.json") << ideal_gas_config(dir / "out").dump(2);
  cli::Options o;
  o.config_path = (dir / "run.json").string();
  o.quiet = true;
  EXPECT_EQ(cli::cmd_solve(o), cli::ok);
  for (const char* f : {"checkpoint.json", "spectrum.csv", "spectrum.json", "history.csv", "run.log"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  }
  const auto cp = json::parse(slurp(dir / "out" / "checkpoint.json"));
  EXPECT_EQ(cp.at("status"), "converged");
  EXPECT_NEAR(cp.at("spectrum").at("bec_energy").get<double>(), 4.5, 1e-8);

  const std::string first = slurp(dir / "out" / "spectrum.csv");
  EXPECT_EQ(cli::cmd_spectrum(o), cli::ok);
  EXPECT_EQ(slurp(dir / "out" / "spectrum.csv"), first);

  EXPECT_EQ(cli::cmd_observables(o), cli::ok);
  const auto obs = json::parse(slurp(dir / "out" / "observables.json"));
  ASSERT_EQ(obs.at("rows").size(), 1u);
  EXPECT_NEAR(std::stod(obs.at("rows")[0].at("condensate_fraction").get<std::string>()), 1.0, 1e-8);
  EXPECT_NEAR(std::stod(obs.at("rows")[0].at("inverse_scaled_central_density").get<std::string>()), 1.0, 1e-6);
}

TEST(Cli, SameConfigSameBytes) {
  const auto dir = scratch("repeat");
  std::string out[2];
  for (int i = 0; i < 2; ++i) {
    auto cfg = ideal_gas_config(dir / "out");
    std::ofstream(dir / "run.json") << cfg.dump();
    cli::Options o;
    o.config_path = (dir / "run.json").string();
    o.quiet = true;
    cli::cmd_solve(o);
    out[i] = slurp(dir / "out" / "spectrum.csv");
  }
  EXPECT_EQ(out[0], out[1]);
}

TEST(Cli, ResumeContinuesAnInterruptedRun) {
  const auto dir = scratch("resume");
  json cfg = {{"n_particles", 3},
              {"basis_family", "pair"},
              {"potential", {{"type", "gaussian"}, {"target_a_au", 100.0}}},
              {"svm", {{"k_max", 30}, {"trials", 10}}},
              {"output", {{"directory", (dir / "a").string()}}}};
  auto straight = config::parse(cfg);
  const auto full = cli::solve(straight);

  auto partial = straight;
  partial.svm.k_max = 12;
  cli::solve(partial, dir / "b");
  const auto resumed = cli::solve(straight, std::nullopt, (dir / "b" / "checkpoint.json").string());
  EXPECT_EQ(resumed.state->size(), full.state->size());
  EXPECT_EQ(resumed.state->spectrum().energies, full.state->spectrum().energies);
}

TEST(Cli, ZeroRangeOnCorrelatedBasisIsAnError) {
  config::RunConfig c;
  c.potential.kind = config::PotentialKind::zero_range;
  c.potential.a_au = 100.0;
  c.family = cgbasis::BasisFamily::pair;
  c.svm.family = c.family;
  EXPECT_THROW(cli::solve(c), config::ConfigError);
}

TEST(Config, ShippedConfigsResolve) {
  int count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(BOSETRAP_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    ++count;
    EXPECT_NO_THROW(config::resolve(config::load(entry.path().string()))) << entry.path();
  }
  EXPECT_GE(count, 4);
}
