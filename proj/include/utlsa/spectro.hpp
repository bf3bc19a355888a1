#pragma once

#include <filesystem>
#include <string>

#include "utlsa/signal.hpp"
#include "utlsa/tensor.hpp"

namespace utlsa {

// Log-Mel grids in dB for a carrier, a perturbation and their sum.
struct SpectroDump {
  Matrix<float> carrier_db, delta_db, mixed_db;
  double mean_db_carrier = 0.0;
  double mean_db_delta = 0.0;
  double mean_db_mixed = 0.0;
  double max_abs_diff_db = 0.0;  // max |mixed - carrier|
};

// Both inputs are padded or trimmed to the encoder length first.
SpectroDump spectro(const Waveform& carrier, const Waveform& delta);

std::string grid_csv(const Matrix<float>& grid);
std::string spectro_summary(const SpectroDump& dump);

// Writes <prefix>_x.csv, <prefix>_delta.csv, <prefix>_mix.csv.
void write_spectro(const SpectroDump& dump, const std::string& prefix);

}  // namespace utlsa
