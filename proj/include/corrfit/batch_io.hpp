// batch_io.hpp — Self-describing binary container for trajectory batches

#pragma once

#include <string>

#include "corrfit/smesim.hpp"

namespace corrfit::batch_io {

// Layout: magic "CQB1", u32 version, u64 header length, JSON header
// (provenance fields), then n_exp * n_detectors * n_bins little-endian
// float64 values, trajectory-major.
void write(const std::string& path, const TrajectoryBatch& batch);
TrajectoryBatch read(const std::string& path);

} // namespace corrfit::batch_io
