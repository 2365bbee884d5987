#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rmst/error.hpp"
#include "rmst/gmm.hpp"
#include "rmst/sampler.hpp"

namespace rmst {

enum class Command { fit, pseudo, simulate, campaign, tau_scan };

struct RunConfig {
  Command command = Command::fit;
  std::string input_path;
  std::string output_path;  // stdout when empty
  std::string draws_path;   // fit only: optional posterior draws CSV
  std::optional<double> tau;
  std::string model;
  InteractionEncoding encoding = InteractionEncoding::product;
  SamplerConfig sampler;
  double prior_sd = 3.1622776601683795;
  std::vector<TailRequest> tail_requests;
  std::string scenario;
  int n = 200;
  int replications = 200;
  int workers = 1;
  std::uint64_t seed = 1;
  bool run_gmm = true;
  std::vector<double> se_limits{0.05, 0.075};
  PseudoAlgorithm pseudo_algorithm = PseudoAlgorithm::fast;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitConvergence = 4;

int exit_code_for(ErrorKind kind);

// "PARAM,OP,VALUE", e.g. "delta,>=,0.25"
TailRequest parse_tail_request(const std::string& text);

// Runs one command; diagnostics go to `log`. Throws rmst::Error.
void run(const RunConfig& config, std::ostream& log);

// Parses argv, runs, and maps errors to exit codes.
int cli_main(int argc, char** argv);

}  // namespace rmst
