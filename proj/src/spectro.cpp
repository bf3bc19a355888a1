#include "utlsa/spectro.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "utlsa/errors.hpp"
#include "utlsa/features.hpp"

namespace utlsa {

namespace {

Matrix<float> to_db(const Waveform& wav, double& mean) {
  Matrix<float> z = log_mel(wav.view());
  double sum = 0.0;
  for (float& v : z.data) {
    v = static_cast<float>(kNepersToDb * v);
    sum += v;
  }
  mean = sum / static_cast<double>(z.size());
  return z;
}

}  // namespace

SpectroDump spectro(const Waveform& carrier, const Waveform& delta) {
  const Waveform x = pad_or_trim(carrier, kInputSamples);
  const Waveform d = pad_or_trim(delta, kInputSamples);
  SpectroDump out;
  out.carrier_db = to_db(x, out.mean_db_carrier);
  out.delta_db = to_db(d, out.mean_db_delta);
  out.mixed_db = to_db(mix(x, d), out.mean_db_mixed);
  for (std::size_t i = 0; i < out.carrier_db.size(); ++i)
    out.max_abs_diff_db = std::max(out.max_abs_diff_db,
                                   static_cast<double>(std::abs(out.mixed_db.data[i] - out.carrier_db.data[i])));
  return out;
}

std::string grid_csv(const Matrix<float>& grid) {
  std::ostringstream os;
  os << std::setprecision(6);
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) os << (c ? "," : "") << grid(r, c);
    os << '\n';
  }
  return os.str();
}

std::string spectro_summary(const SpectroDump& dump) {
  nlohmann::ordered_json j = {{"record", "spectro"},
                              {"mean_power_db_x", dump.mean_db_carrier},
                              {"mean_power_db_delta", dump.mean_db_delta},
                              {"mean_power_db_mix", dump.mean_db_mixed},
                              {"max_abs_diff_db", dump.max_abs_diff_db},
                              {"frames", dump.carrier_db.rows},
                              {"mel_bins", dump.carrier_db.cols}};
  return j.dump() + '\n';
}

void write_spectro(const SpectroDump& dump, const std::string& prefix) {
  const std::pair<const char*, const Matrix<float>*> grids[] = {
      {"_x.csv", &dump.carrier_db}, {"_delta.csv", &dump.delta_db}, {"_mix.csv", &dump.mixed_db}};
  for (const auto& [suffix, grid] : grids) {
    const std::string path = prefix + suffix;
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write " + path);
    f << grid_csv(*grid);
    if (!f) throw IoError("write failed for " + path);
  }
}

}  // namespace utlsa
