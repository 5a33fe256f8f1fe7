// Command-line front end: estimate, dyke, risk, verify.
//
// Exit codes: 0 success, 1 verification failure, 2 configuration error,
// 3 numerical failure.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dtuq/app/config.hpp"
#include "dtuq/app/dyke.hpp"
#include "dtuq/app/io.hpp"
#include "dtuq/app/risk_study.hpp"
#include "dtuq/app/study.hpp"
#include "dtuq/app/verify.hpp"
#include "dtuq/error.hpp"

namespace {

constexpr int kExitVerifyFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct EstimateArgs {
  std::string config;
  std::string data;
  std::string out = "-";
  std::optional<std::uint64_t> seed;
  std::string format = "json";
  std::string column;
  bool timing = false;
};

struct DykeArgs {
  std::size_t replicates = 200;
  std::size_t n = 30;
  std::uint64_t seed = 1;
  std::string out = "-";
  std::size_t posterior_draws = 100000;
};

struct RiskArgs {
  std::string config;
  std::string out = "-";
};

int run_estimate(const EstimateArgs& a, unsigned workers) {
  using namespace dtuq::app;
  StudyConfig cfg = load_study(a.config);
  if (!a.data.empty()) {
    cfg.data = ingest_csv(a.data, a.column.empty() ? std::nullopt : std::optional<std::string>(a.column));
    cfg.echo["data"] = Json{{"file", a.data}};
  }
  if (a.seed) {
    cfg.seed = *a.seed;
    cfg.echo["seed"] = *a.seed;
  }
  if (cfg.data.empty()) throw dtuq::ConfigError("no data: give 'data' in the config or --data <file>");
  const EstimateReport rep = run_study(cfg, StudyOptions{workers, a.timing});
  emit_report(rep, a.out, a.format, std::cout);
  return 0;
}

int run_dyke(const DykeArgs& a, unsigned workers) {
  using namespace dtuq::app;
  DykeSettings s;
  s.replicates = a.replicates;
  s.n = a.n;
  s.posterior_draws = a.posterior_draws;
  s.workers = workers;
  if (s.replicates == 0 || s.n == 0) throw dtuq::ConfigError("--replicates and --n must be >= 1");
  if (s.posterior_draws < 100) throw dtuq::ConfigError("--posterior-draws must be >= 100");
  const DykeTable t = run_dyke_replicates(s, dtuq::RngStream(a.seed, 0));
  write_text(a.out, dyke_csv(t).str(), std::cout);
  return 0;
}

int run_risk(const RiskArgs& a, unsigned workers) {
  using namespace dtuq::app;
  const std::filesystem::path path(a.config);
  const RiskStudy rs = parse_risk_study(read_json_file(path), path.parent_path());
  write_text(a.out, run_risk_study(rs, workers).str(), std::cout);
  return 0;
}

int run_verify(std::uint64_t seed, unsigned workers) {
  using namespace dtuq::app;
  VerifySettings s;
  s.workers = workers;
  const auto items = verify_hpe(dtuq::RngStream(seed, 0), s);
  std::cout << format_verify(items);
  for (const auto& it : items)
    if (!it.passed) return kExitVerifyFailed;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision-theoretic estimation of quantities of interest under parameter uncertainty"};
  app.require_subcommand(1);
  unsigned workers = 1;
  app.add_option("--workers", workers, "Worker threads (0 = all cores); results do not depend on it")->capture_default_str();

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Run a study configuration and report MLE / HPE / Bayes estimates");
  estimate->add_option("--config", est.config, "Study configuration (JSON)")->required()->check(CLI::ExistingFile);
  estimate->add_option("--data", est.data, "CSV data file overriding the config's data");
  estimate->add_option("--column", est.column, "Column name to read from a CSV with header");
  estimate->add_option("--out", est.out, "Output path ('-' for stdout)")->capture_default_str();
  estimate->add_option("--seed", est.seed, "Override the config seed");
  estimate->add_option("--format", est.format, "json or csv")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  estimate->add_flag("--timing", est.timing, "Include wall-clock seconds in the json report");

  DykeArgs dk;
  auto* dyke = app.add_subcommand("dyke", "Replicated flood-probability study (Weibull discharges, hierarchical prior)");
  dyke->add_option("--replicates", dk.replicates, "Number of simulated data sets")->capture_default_str();
  dyke->add_option("--n", dk.n, "Years of annual maxima per data set")->capture_default_str();
  dyke->add_option("--seed", dk.seed, "Master seed")->capture_default_str();
  dyke->add_option("--posterior-draws", dk.posterior_draws, "Importance-sampling draws per replicate")->capture_default_str();
  dyke->add_option("--out", dk.out, "CSV output path ('-' for stdout)")->capture_default_str();

  RiskArgs rk;
  auto* risk = app.add_subcommand("risk", "Empirical frequentist or Bayes risk of the configured estimators");
  risk->add_option("--config", rk.config, "Risk configuration (JSON with a 'risk' block)")->required()->check(CLI::ExistingFile);
  risk->add_option("--out", rk.out, "CSV output path ('-' for stdout)")->capture_default_str();

  std::uint64_t verify_seed = 20240601;
  auto* verify = app.add_subcommand("verify", "Numerical checks of the HPE properties");
  verify->add_option("--seed", verify_seed, "Master seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*estimate) return run_estimate(est, workers);
    if (*dyke) return run_dyke(dk, workers);
    if (*risk) return run_risk(rk, workers);
    if (*verify) return run_verify(verify_seed, workers);
  } catch (const dtuq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const dtuq::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
