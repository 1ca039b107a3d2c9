#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "parlens/errors.hpp"

namespace parlens {

/// Timing plan of a capture run: every display cycle walks the cameras in
/// order with a fixed delay between triggers, then waits before the next
/// cycle's display swap.
struct AcquisitionSchedule {
    std::int64_t inter_camera_delay_ms = 200;
    std::int64_t inter_image_delay_ms = 500;
    std::vector<std::string> camera_order;
    std::vector<std::string> image_ids;

    void validate() const;

    nlohmann::json to_json() const;
    static AcquisitionSchedule from_json(const nlohmann::json& j);
};

/// Whether every camera sees the same image in a cycle, or the displays are
/// multiplexed so each camera receives a different one.
enum class DisplayMode { shared, per_camera };

std::string display_mode_name(DisplayMode mode);
DisplayMode display_mode_from_name(const std::string& name);

/// One planned trigger on the virtual clock.
struct TriggerEvent {
    std::string image_id;
    std::string camera_id;
    std::int64_t trigger_time_ms = 0;
    int cycle = 0;         ///< image index k in schedule order
    int camera_index = 0;  ///< camera index j within the cycle
};

/// Trigger-time law on the integer-millisecond virtual clock:
///   t(k, j) = image_start_k + j * inter_camera_delay
///   image_start_{k+1} = image_start_k + (n_cameras - 1) * inter_camera_delay
///                       + inter_image_delay
std::int64_t trigger_time(const AcquisitionSchedule& schedule, int cycle, int camera_index);

/// Expand the schedule into the full, strictly time-ordered trigger list.
/// In per_camera mode, camera j of cycle k sees image (k + j) mod n_images,
/// so every (image, camera) pair still occurs exactly once.
std::vector<TriggerEvent> build_trigger_list(const AcquisitionSchedule& schedule,
                                             DisplayMode mode);

} // namespace parlens
