#pragma once

#include "tvq/dataset.hpp"

namespace tvq::synth {

/// Classes are sine mixtures with class-specific fundamentals plus light
/// noise; useful for fast training smoke tests.
TimeSeriesDataset sine_mixture(int n_per_class, int length, int n_classes, std::uint64_t seed,
                               const std::string& name = "SineMix");

/// Two-class quasi-periodic bump-train morphologies shaped like the ECG200
/// benchmark (defaults N=100, L=96, C=2).
TimeSeriesDataset ecg_like(int n_total, int length, std::uint64_t seed,
                           const std::string& name = "EcgLike");

}  // namespace tvq::synth
