#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "laneforge/datalog.hpp"
#include "laneforge/dynamics.hpp"
#include "laneforge/lanevision.hpp"
#include "laneforge/steernet.hpp"

namespace laneforge {

struct DatasetOptions {
    Arch arch = Arch::Single;
    PipelineConfig pipeline;
    int width = kModelWidth;
    int height = kModelHeight;
    double steer_limit_deg = VehicleParams{}.low_speed_steer_deg;
};

/// Training examples with a split group per example; mirrored copies share
/// the group of their original.
struct Dataset {
    std::vector<LabeledSample> samples;
    std::vector<std::size_t> groups;
    std::size_t source_rows = 0;
    std::size_t filtered_rows = 0;
};

/// Filters each run's log, preprocesses and downsamples its frames, and
/// builds single frames or triplets.
Dataset load_dataset(std::span<const std::filesystem::path> runs, const DatasetOptions& options);

/// Originals then their mirrors, groups carried over.
Dataset mirrored(const Dataset& data);

}  // namespace laneforge
