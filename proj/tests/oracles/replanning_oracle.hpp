#pragma once

// Single contract, k equal cycles of real traffic A, forecast A / (1 - r) per
// cycle. Each cycle serves remaining / forecast_remaining of the real traffic.
// Returns the terminal (demand - delivered) / demand.

namespace oracle {

inline double single_contract_shortfall(double r, int k) {
  double remaining = 1.0;
  for (int left = k; left >= 1; --left) {
    double forecast = left / (1 - r);
    remaining -= remaining / forecast;
  }
  return remaining;
}

}  // namespace oracle
