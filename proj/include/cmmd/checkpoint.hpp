#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "cmmd/schedule.hpp"
#include "cmmd/toynet.hpp"

namespace cmmd {

// Serialized schedule description carried in manifests and checkpoints.
struct ScheduleDescriptor {
    std::string kind = "cosine";
    std::size_t steps = kDefaultDiffusionSteps;
    double offset = kDefaultCosineOffset;
};

NoiseSchedule make_schedule(const ScheduleDescriptor& desc);

// Checkpoint file: text header (format version, net config, schedule
// descriptor, seed) followed by one tensor dump per parameter block.
// Loading then saving reproduces the file byte for byte.
void save_checkpoint(const std::string& path, const ToyNet& net,
                     const ScheduleDescriptor& schedule, std::uint64_t seed);

struct LoadedCheckpoint {
    std::unique_ptr<ToyNet> net;
    ScheduleDescriptor schedule;
    std::uint64_t seed = 0;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace cmmd
