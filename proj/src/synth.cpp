#include "tvq/synth.hpp"

#include <cmath>

namespace tvq::synth {

namespace {
constexpr double kPi = 3.14159265358979323846;

double gauss_bump(double t, double center, double width) {
  const double d = (t - center) / width;
  return std::exp(-0.5 * d * d);
}
}  // namespace

TimeSeriesDataset sine_mixture(int n_per_class, int length, int n_classes, std::uint64_t seed,
                               const std::string& name) {
  TimeSeriesDataset ds;
  ds.name = name;
  ds.samples.resize(n_per_class * n_classes, length);
  ds.labels.resize(n_per_class * n_classes);
  Rng rng = Rng(seed).split("sine_mixture");
  int row = 0;
  for (int c = 0; c < n_classes; ++c) {
    const double f1 = 2.0 + 3.0 * c;
    const double f2 = 5.0 + 2.0 * c;
    for (int i = 0; i < n_per_class; ++i) {
      const double phase = rng.uniform(0.0, 2.0 * kPi);
      const double a1 = 1.0 + 0.2 * rng.normal();
      const double a2 = 0.4 + 0.1 * rng.normal();
      for (int t = 0; t < length; ++t) {
        const double u = static_cast<double>(t) / length;
        ds.samples(row, t) = a1 * std::sin(2.0 * kPi * f1 * u + phase) +
                             a2 * std::sin(2.0 * kPi * f2 * u + 0.5 * phase) + 0.05 * rng.normal();
      }
      ds.labels[row] = c;
      ++row;
    }
  }
  return ds;
}

TimeSeriesDataset ecg_like(int n_total, int length, std::uint64_t seed, const std::string& name) {
  TimeSeriesDataset ds;
  ds.name = name;
  ds.samples.resize(n_total, length);
  ds.labels.resize(n_total);
  Rng rng = Rng(seed).split("ecg_like");
  for (int i = 0; i < n_total; ++i) {
    const int c = i % 2;
    const double jitter = rng.uniform(-3.0, 3.0);
    const double amp = 1.0 + 0.15 * rng.normal();
    for (int t = 0; t < length; ++t) {
      double v = 0.0;
      // One beat centered mid-series: P wave, QRS complex, T wave.
      const double qrs = length * 0.45 + jitter;
      if (c == 0) {
        v += 0.25 * gauss_bump(t, qrs - 14.0, 4.0);                 // P
        v += 2.2 * amp * gauss_bump(t, qrs, 1.6);                   // R spike
        v -= 0.8 * gauss_bump(t, qrs + 3.0, 1.4);                   // S dip
        v += 0.5 * gauss_bump(t, qrs + 16.0, 5.0);                  // T
      } else {
        // Abnormal morphology: widened, depressed R with inverted T.
        v += 0.2 * gauss_bump(t, qrs - 16.0, 5.0);
        v += 1.1 * amp * gauss_bump(t, qrs, 4.2);
        v -= 0.3 * gauss_bump(t, qrs + 6.0, 2.5);
        v -= 0.55 * gauss_bump(t, qrs + 18.0, 6.0);
      }
      v += 0.06 * rng.normal();
      v += 0.08 * std::sin(2.0 * kPi * 1.5 * t / length + jitter);  // baseline wander
      ds.samples(i, t) = v;
    }
    ds.labels[i] = c;
  }
  return ds;
}

}  // namespace tvq::synth
