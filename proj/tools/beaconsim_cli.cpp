#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "beaconsim/beaconsim.h"

namespace {

struct Options {
  std::string config_file;
  std::string scenario_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> users;
  std::optional<double> isd;
  std::optional<std::string> groups;
  std::optional<int> replications;
  std::optional<int> threads;
  bool print_config = false;
  std::string out = ".";
  std::string event_log;
  std::string preset;
};

int exit_code(bsim_status st) {
  switch (st) {
    case BSIM_OK: return 0;
    case BSIM_ERR_INVALID_ARGUMENT:
    case BSIM_ERR_PARSE: return 2;
    case BSIM_ERR_IO: return 3;
    default: return 1;
  }
}

bool check(bsim_status st, const std::string& context) {
  if (st == BSIM_OK) return true;
  std::cerr << "beaconsim: " << context << ": " << bsim_last_error() << '\n';
  return false;
}

bsim_status resolved_text(const bsim_config* cfg, std::string& text) {
  size_t len = 0;
  if (const auto st = bsim_config_resolved_to_string(cfg, nullptr, 0, &len); st != BSIM_OK) return st;
  text.assign(len, '\0');
  const auto st = bsim_config_resolved_to_string(cfg, text.data(), text.size(), &len);
  text.resize(len - 1);
  return st;
}

// Applies files, shorthand flags and --set overrides in that order.
bsim_status build_config(bsim_config* cfg, const Options& o) {
  bsim_status st = BSIM_OK;
  auto set = [&](const std::string& key, const std::string& value) {
    if (st != BSIM_OK) return;
    st = bsim_config_set(cfg, key.c_str(), value.c_str());
    check(st, key);
  };
  if (!o.config_file.empty() && !check(st = bsim_config_load_file(cfg, o.config_file.c_str()), o.config_file))
    return st;
  if (!o.scenario_file.empty() &&
      !check(st = bsim_config_load_file(cfg, o.scenario_file.c_str()), o.scenario_file))
    return st;

  std::optional<std::uint64_t> seed = o.seed;
  if (!seed) {
    if (const char* env = std::getenv("BEACONSIM_SEED")) {
      try {
        seed = std::stoull(env);
      } catch (const std::exception&) {
        std::cerr << "beaconsim: BEACONSIM_SEED is not an unsigned integer\n";
        return BSIM_ERR_INVALID_ARGUMENT;
      }
    }
  }
  if (seed) set("simulation.seed", std::to_string(*seed));
  if (o.users) {
    set("deployment.n_users", std::to_string(*o.users));
    set("experiments.users", "[" + std::to_string(*o.users) + "]");
  }
  if (o.isd) {
    char buf[32];
    const std::string v(buf, std::to_chars(buf, buf + sizeof buf, *o.isd).ptr);
    set("deployment.isd_m", v);
    set("experiments.isds_m", "[" + v + "]");
  }
  if (o.groups) {
    const std::string scheme = *o.groups == "on" ? "grouped" : "individual";
    set("deployment.grouping", scheme);
    set("experiments.schemes", "[\"" + scheme + "\"]");
  }
  if (o.replications) set("simulation.replications", std::to_string(*o.replications));
  if (o.threads) set("simulation.threads", std::to_string(*o.threads));
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "beaconsim: --set expects key=value, got '" << kv << "'\n";
      return BSIM_ERR_INVALID_ARGUMENT;
    }
    set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return st;
}

void add_config_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_file, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("-s,--scenario", o.scenario_file, "JSON scenario file applied after --config")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", o.sets, "override section.key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "random seed (default: $BEACONSIM_SEED, then config)");
  cmd->add_option("--users", o.users, "number of users");
  cmd->add_option("--isd", o.isd, "inter-site distance in meters");
  cmd->add_option("--groups", o.groups, "grouped (on) or individual (off) scheme")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--replications", o.replications, "independent replications");
  cmd->add_option("--threads", o.threads, "worker threads for replications");
  cmd->add_flag("--print-config", o.print_config, "print the resolved configuration and exit");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uplink beacon tracking simulator for individual and grouped users"};
  app.require_subcommand(1);
  Options o;

  auto* dimension = app.add_subcommand("dimension", "print the beacon resource dimensioning table");
  add_config_options(dimension, o);

  auto* run = app.add_subcommand("run", "run an experiment preset and write CSV");
  add_config_options(run, o);
  run->add_option("preset", o.preset, "fig3, fig4, fig6 or custom")
      ->required()
      ->check(CLI::IsMember({"fig3", "fig4", "fig6", "custom"}));
  run->add_option("--out", o.out, "output directory");
  run->add_option("--event-log", o.event_log, "protocol event CSV (custom preset only)");

  CLI11_PARSE(app, argc, argv);

  bsim_config* cfg = nullptr;
  if (!check(bsim_config_create(&cfg), "config")) return 1;
  bsim_status st = build_config(cfg, o);
  if (st == BSIM_OK && o.print_config) {
    std::string text;
    if (check(st = resolved_text(cfg, text), "print-config")) std::cout << text;
  }

  if (st == BSIM_OK && !o.print_config) {
    if (*dimension) {
      size_t len = 0;
      if (check(st = bsim_config_dimension_table(cfg, nullptr, 0, &len), "dimension")) {
        std::string table(len, '\0');
        st = bsim_config_dimension_table(cfg, table.data(), table.size(), &len);
        table.resize(len - 1);
        std::cout << table;
      }
    } else {
      bsim_preset preset{};
      if (check(st = bsim_preset_from_name(o.preset.c_str(), &preset), "preset"))
        check(st = bsim_run_preset(cfg, preset, o.out.c_str(),
                                   o.event_log.empty() ? nullptr : o.event_log.c_str()),
              "run " + o.preset);
    }
  }
  bsim_config_destroy(cfg);
  return exit_code(st);
}
