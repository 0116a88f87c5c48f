#pragma once

// Numeric property checks for the encoder reference implementations,
// shared by `encoders selftest` and the acceptance suite.

#include <string>
#include <vector>

namespace searchlab {

struct SelftestResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

std::vector<SelftestResult> run_encoder_selftest();

}  // namespace searchlab
