// Command-line front end; talks to the library only through plateobs.h.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "plateobs/plateobs.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitValidation = 2;
constexpr int kExitIterationLimit = 3;

int exit_code(plateobs_status s) {
  switch (s) {
    case PLATEOBS_OK:
      return kExitOk;
    case PLATEOBS_VALIDATION:
    case PLATEOBS_DOMAIN:
    case PLATEOBS_UNSUPPORTED:
      return kExitValidation;
    case PLATEOBS_ITERATION_LIMIT:
      return kExitIterationLimit;
    default:
      return kExitFailure;
  }
}

struct Options {
  std::string config_path;
  std::string out;
  int threads = 0;
  int m_max = 0;
  std::string mesh;
};

int report(plateobs_status s) {
  std::cerr << "error: " << plateobs_last_error() << '\n';
  return exit_code(s);
}

int execute(const std::string& problem, const Options& opt) {
  std::ifstream in(opt.config_path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read config " << opt.config_path << '\n';
    return kExitFailure;
  }
  std::ostringstream text;
  text << in.rdbuf();

  int nx = 0, ny = 0;
  if (!opt.mesh.empty()) {
    std::smatch m;
    if (!std::regex_match(opt.mesh, m, std::regex(R"((\d+)x(\d+))"))) {
      std::cerr << "error: --mesh expects <nx>x<ny>, got " << opt.mesh << '\n';
      return kExitValidation;
    }
    nx = std::stoi(m[1]);
    ny = std::stoi(m[2]);
    if (nx <= 0 || ny <= 0) {
      std::cerr << "error: --mesh needs positive sizes\n";
      return kExitValidation;
    }
  }

  plateobs_config* cfg = nullptr;
  plateobs_status s = plateobs_config_parse(text.str().c_str(), &cfg);
  if (s != PLATEOBS_OK) return report(s);

  const plateobs_overrides ov{problem.empty() ? nullptr : problem.c_str(), opt.out.empty() ? nullptr : opt.out.c_str(),
                              opt.threads, opt.m_max, nx, ny};
  s = plateobs_config_apply(cfg, &ov);
  if (s != PLATEOBS_OK) {
    plateobs_config_destroy(cfg);
    return report(s);
  }

  int code = kExitOk;
  char* result = nullptr;
  if (problem.empty()) {
    s = plateobs_config_validate(cfg, &result);
    if (s == PLATEOBS_OK) {
      std::cout << result << '\n';
      if (std::string(result) != "[]") code = kExitValidation;
    }
  } else {
    s = plateobs_config_run(cfg, &result);
    if (s == PLATEOBS_OK) std::cout << result;
  }
  plateobs_string_free(result);
  plateobs_config_destroy(cfg);
  return s == PLATEOBS_OK ? code : report(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Obstacle problems for partially hinged plates"};
  app.set_version_flag("--version", plateobs_version());
  app.require_subcommand(1);

  Options opt;
  const char* problems[] = {"green-eval", "solve", "vi-solve", "gap-scan", "optimize-reinforcement",
                            "optimize-obstacle", "regime", "validate"};
  for (const char* name : problems) {
    CLI::App* sub = app.add_subcommand(name, std::string(name) == "validate" ? "report every config violation"
                                                                              : std::string("run ") + name);
    sub->add_option("--config", opt.config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--m-max", opt.m_max, "series truncation order")->check(CLI::PositiveNumber);
    sub->add_option("--mesh", opt.mesh, "mesh size as <nx>x<ny>");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  return execute(name == "validate" ? "" : name, opt);
}
