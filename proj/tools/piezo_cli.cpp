// piezo: command-line driver for the piezoelectric transient solver.
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "piezo/piezo.h"

namespace {

int report(piezo_status status) {
  std::cerr << "piezo: error[" << piezo_status_name(status) << "]: " << piezo_last_error() << '\n';
  return piezo_exit_code(status);
}

struct ConfigHandle {
  piezo_config* ptr = nullptr;
  ~ConfigHandle() { piezo_config_free(ptr); }
};

int with_config(const std::string& path, int (*body)(const piezo_config*, const std::string&),
                const std::string& arg) {
  ConfigHandle cfg;
  const piezo_status st = piezo_config_load(path.c_str(), &cfg.ptr);
  if (st != PIEZO_OK) return report(st);
  return body(cfg.ptr, arg);
}

int run_simulate(const piezo_config* cfg, const std::string&) {
  int passed = 1;
  const piezo_status st = piezo_run_simulate(cfg, &passed);
  if (st != PIEZO_OK) return report(st);
  if (!passed) {
    std::cerr << "piezo: error[DecayCheckFailed]: energy decay check failed (see energy_summary.json)\n";
    return 1;
  }
  return 0;
}

int run_verify(const piezo_config* cfg, const std::string& study) {
  char* json = nullptr;
  int passed = 0;
  const piezo_status st = piezo_run_verify(cfg, study.c_str(), &json, &passed);
  if (st != PIEZO_OK) return report(st);
  std::cout << json << '\n';
  piezo_string_free(json);
  if (!passed) {
    std::cerr << "piezo: error[VerificationFailed]: study '" << study << "' failed its thresholds\n";
    return 1;
  }
  return 0;
}

int run_mesh_gen(const piezo_config* cfg, const std::string&) {
  char* path = nullptr;
  const piezo_status st = piezo_run_mesh_gen(cfg, &path);
  if (st != PIEZO_OK) return report(st);
  std::cout << path << '\n';
  piezo_string_free(path);
  return 0;
}

int run_dump_system(const piezo_config* cfg, const std::string&) {
  char* path = nullptr;
  const piezo_status st = piezo_run_dump_system(cfg, &path);
  if (st != PIEZO_OK) return report(st);
  std::cout << path << '\n';
  piezo_string_free(path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transient piezoelectric finite element solver"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(piezo_version()));

  std::string config;
  std::string study;
  auto* simulate = app.add_subcommand("simulate", "Run a transient simulation");
  simulate->add_option("config", config, "Config file")->required();
  auto* verify = app.add_subcommand("verify", "Run a verification study");
  verify->add_option("config", config, "Config file")->required();
  verify->add_option("--study", study, "oracle, mms, coercivity, scaling, lift or zero")->required();
  auto* mesh_gen = app.add_subcommand("mesh-gen", "Write the configured mesh");
  mesh_gen->add_option("config", config, "Config file")->required();
  auto* dump = app.add_subcommand("dump-system", "Write the assembled matrices as triplets");
  dump->add_option("config", config, "Config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& c : msg) {
      if (c == '\n') c = ' ';
    }
    std::cerr << "piezo: error[Usage]: " << msg << '\n';
    return 2;
  }

  if (*simulate) return with_config(config, run_simulate, "");
  if (*verify) return with_config(config, run_verify, study);
  if (*mesh_gen) return with_config(config, run_mesh_gen, "");
  return with_config(config, run_dump_system, "");
}
