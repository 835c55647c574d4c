// Command line front end: a `stream` mode that turns an observation sequence
// into a region trajectory CSV, and one mode per bundled simulation study.
// Exit codes: 0 success, 2 configuration or usage error, 3 runtime failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mixcs/errors.hpp"
#include "mixcs/harness.hpp"
#include "mixcs/version.hpp"

namespace {

std::vector<double> read_observations(const std::string& path) {
  std::istream* in = &std::cin;
  std::ifstream file;
  if (!path.empty() && path != "-") {
    file.open(path);
    if (!file) {
      throw mixcs::config_error("stream: cannot open input file '" + path +
                                "'");
    }
    in = &file;
  }
  std::vector<double> obs;
  std::string token;
  while (*in >> token) {
    try {
      std::size_t used = 0;
      const double v = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
      obs.push_back(v);
    } catch (const std::exception&) {
      throw mixcs::config_error("stream: could not parse observation '" +
                                token + "'");
    }
  }
  return obs;
}

nlohmann::json load_config(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream file(path);
  if (!file) {
    throw mixcs::config_error("config: cannot open file '" + path + "'");
  }
  try {
    return nlohmann::json::parse(file);
  } catch (const nlohmann::json::parse_error& e) {
    throw mixcs::config_error("config: '" + path + "' is not valid JSON: " +
                              e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    throw mixcs::config_error("stream: cannot write output file '" + path +
                              "'");
  }
}

struct StudyArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
};

// Registers --config/--out-dir (and --seed when the study is seeded) on a
// subcommand and binds the run to its callback.
template <typename Config, typename Runner, typename Reseed>
void add_study(CLI::App& app, const char* name, const char* blurb,
               bool seeded, Runner runner, Reseed reseed) {
  auto* cmd = app.add_subcommand(name, blurb);
  auto args = std::make_shared<StudyArgs>();
  cmd->add_option("--config", args->config_path,
                  "JSON configuration file (defaults apply to every "
                  "missing field)");
  cmd->add_option("--out-dir", args->out_dir,
                  "Directory for the <table>.csv / <table>.json pairs");
  if (seeded) {
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [args](const std::uint64_t& s) { args->seed = s; },
        "Override the configured seed");
  }
  cmd->callback([args, runner, reseed] {
    Config config = Config::from_json(load_config(args->config_path));
    if (args->seed) reseed(config, *args->seed);
    mixcs::write_results(args->out_dir, runner(config));
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anytime-valid confidence sequences for a Gaussian mean "
               "under informative priors"};
  app.set_version_flag("--version", std::string("mixcs ") + mixcs::kVersion);
  app.require_subcommand(1);

  // stream: observations in, trajectory CSV out.
  auto* stream_cmd = app.add_subcommand(
      "stream", "Read observations (file or stdin) and emit the running "
                "confidence region after each one");
  std::string input_path;
  std::string prior_json;
  std::string method_name = "eville";
  std::string out_path;
  mixcs::RunConfig run;
  stream_cmd->add_option("input", input_path,
                         "Whitespace-separated observations ('-' = stdin)");
  stream_cmd->add_option("--prior-json", prior_json,
                         "Prior as inline JSON, e.g. "
                         "'{\"kind\":\"laplace\",\"scale\":0.5}'");
  stream_cmd->add_option("--sigma", run.sigma, "Known noise scale");
  stream_cmd->add_option("--alpha", run.alpha, "Miscoverage level in (0,1)");
  stream_cmd->add_option("--method", method_name,
                         "ville | eville | eville_bracket | "
                         "improper_closed_form");
  stream_cmd->add_option("--out", out_path, "Output CSV (default stdout)");
  stream_cmd->callback([&] {
    if (!prior_json.empty()) {
      nlohmann::json pj;
      try {
        pj = nlohmann::json::parse(prior_json);
      } catch (const nlohmann::json::parse_error& e) {
        throw mixcs::config_error(
            std::string("--prior-json is not valid JSON: ") + e.what());
      }
      run.prior = mixcs::prior_from_json(pj);
    }
    run.method = mixcs::method_from_string(method_name);
    run.validate();
    const std::vector<double> obs = read_observations(input_path);
    mixcs::Trajectory tr = mixcs::stream(run, obs);
    write_text(out_path,
               mixcs::trajectory_csv(tr, mixcs::method_to_string(run.method)));
  });

  add_study<mixcs::Fig1Config>(
      app, "fig1",
      "Trajectory comparison across priors and calibrations at several "
      "truths",
      true, [](const mixcs::Fig1Config& c) { return mixcs::run_fig1(c); },
      [](mixcs::Fig1Config& c, std::uint64_t s) { c.seed = s; });
  add_study<mixcs::VolumeConfig>(
      app, "volume", "Region volume as a function of the observed mean",
      false, [](const mixcs::VolumeConfig& c) { return mixcs::run_volume(c); },
      [](mixcs::VolumeConfig&, std::uint64_t) {});
  add_study<mixcs::CoverageConfig>(
      app, "coverage", "Time-uniform coverage Monte Carlo for one run setup",
      true,
      [](const mixcs::CoverageConfig& c) { return mixcs::run_coverage(c); },
      [](mixcs::CoverageConfig& c, std::uint64_t s) { c.run.seed = s; });
  add_study<mixcs::PValueConfig>(
      app, "pvalue",
      "Anytime p-value curves and the acceptance-threshold hierarchy", true,
      [](const mixcs::PValueConfig& c) { return mixcs::run_pvalue_curves(c); },
      [](mixcs::PValueConfig& c, std::uint64_t s) { c.seed = s; });
  add_study<mixcs::DisconnectedConfig>(
      app, "disconnected",
      "Interval split/merge sweep for the conflicted mixture prior", false,
      [](const mixcs::DisconnectedConfig& c) {
        return mixcs::run_disconnected(c);
      },
      [](mixcs::DisconnectedConfig&, std::uint64_t) {});
  add_study<mixcs::ConvergenceConfig>(
      app, "convergence",
      "Distance of the extended region from its closed-form far-data limit",
      true,
      [](const mixcs::ConvergenceConfig& c) {
        return mixcs::run_convergence(c);
      },
      [](mixcs::ConvergenceConfig& c, std::uint64_t s) { c.seed = s; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const mixcs::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const mixcs::numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
