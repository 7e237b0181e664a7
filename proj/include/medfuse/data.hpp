#pragma once

#include <string>
#include <vector>

#include "medfuse/tensor.hpp"

namespace medfuse {

// One station grid: every station covers the identical, equally spaced
// timestamp axis, no gaps.
struct RawSeries {
    std::vector<std::string> stations;      // length E
    std::vector<std::int64_t> timestamps;   // length T, strictly increasing
    Tensor values;                          // [E x T x F]
    std::vector<std::string> feature_names; // length F

    std::size_t station_count() const { return stations.size(); }
    std::size_t step_count() const { return timestamps.size(); }
    std::size_t feature_count() const { return feature_names.size(); }
};

struct NormStats {
    Tensor mean;  // [E x F]
    Tensor stddev;  // [E x F], floored at std_floor
    static constexpr double std_floor = 1e-8;
};

struct SamplePair {
    Tensor x;  // [E x T_enc x F]
    Tensor y;  // [D x T_dec x F]
};

struct Dataset {
    std::vector<SamplePair> samples;
    NormStats stats;
    std::string split_name;
    std::size_t stride = 1;
};

// Header `station,timestamp,<feature1>,...`; rows sorted by (station, timestamp).
RawSeries load_csv(const std::string& path);
void write_csv(const std::string& path, const RawSeries& series);

// Windows start at offsets 0, stride, 2*stride, ...; count is
// floor((T - t_enc - t_dec) / stride) + 1.
std::vector<SamplePair> window(const RawSeries& series, std::size_t t_enc, std::size_t t_dec,
                               std::size_t stride);

NormStats fit_normalize(const RawSeries& train);
RawSeries apply_normalize(const RawSeries& series, const NormStats& stats);
RawSeries undo_normalize(const RawSeries& series, const NormStats& stats);

struct SplitResult {
    RawSeries train;
    RawSeries valid;
    RawSeries test;
};

// Chronological split; a fraction of zero yields an empty (0-step) member,
// flagged via step_count() == 0.
SplitResult split(const RawSeries& series, double train_frac, double valid_frac,
                  double test_frac);

struct SynthParams {
    double noise_scale = 0.1;
    std::size_t regime_length = 48;
};

// Regime-switching benchmark series. Stations 1..E-1 are autonomous "drivers"
// with phase-shifted daily cycles; station 0 follows one driver at a time,
// switching to a new uniformly drawn driver every regime_length steps.
RawSeries synth_generate(std::size_t stations, std::size_t steps, std::uint64_t seed,
                         const SynthParams& params = {});

}  // namespace medfuse
