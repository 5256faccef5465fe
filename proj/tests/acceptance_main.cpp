// One line per acceptance criterion; exit status 1 if any fails.
#include "emlq/acceptance.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  emlq::AcceptanceOptions opt;
  app.add_option("--seed", opt.seed, "master seed");
  app.add_option("--paths", opt.paths, "Monte Carlo paths for criteria 6 and 7");
  app.add_option("--threads", opt.threads, "worker threads");
  app.add_option("--work-dir", opt.work_dir, "scratch directory");
  app.add_option("--only", opt.only, "criterion ids to run");
  CLI11_PARSE(app, argc, argv);

  bool all = true;
  for (const auto& r : emlq::run_acceptance(opt)) {
    std::printf("%s  (%.1f s)\n", emlq::format_result(r).c_str(), r.seconds);
    std::fflush(stdout);
    all = all && r.pass;
  }
  return all ? 0 : 1;
}
