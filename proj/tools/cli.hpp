#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bsnlr::cli {

enum ExitCode { kOk = 0, kUsage = 1, kNotConverged = 2 };

struct FitArgs {
  std::string data;
  std::string model;
  std::vector<std::string> params;
  std::vector<double> start;  // may be empty for models affine in the parameters
  std::optional<double> start_alpha;
  std::string response = "y";
  bool log_response = false;
  std::string out;  // empty: stdout
  int max_iter = 200;
};

struct SimulateArgs {
  std::string config;
  std::string preset;
  std::optional<int> reps;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err);
int cmd_residuals(const FitArgs& args, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);

/// Full command line, argv[0] included.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace bsnlr::cli
