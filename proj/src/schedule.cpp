#include "parlens/schedule.hpp"

#include <set>

namespace parlens {

void AcquisitionSchedule::validate() const {
    if (inter_camera_delay_ms < 0 || inter_image_delay_ms < 0)
        throw ConfigError("schedule: delays must be non-negative");
    if (camera_order.empty())
        throw ConfigError("schedule: camera order is empty");
    const std::set<std::string> unique_cameras(camera_order.begin(), camera_order.end());
    if (unique_cameras.size() != camera_order.size())
        throw ConfigError("schedule: duplicate camera id in camera order");
    const std::set<std::string> unique_images(image_ids.begin(), image_ids.end());
    if (unique_images.size() != image_ids.size())
        throw ConfigError("schedule: duplicate image id");
}

nlohmann::json AcquisitionSchedule::to_json() const {
    return {{"inter_camera_delay_ms", inter_camera_delay_ms},
            {"inter_image_delay_ms", inter_image_delay_ms},
            {"camera_order", camera_order},
            {"image_ids", image_ids}};
}

AcquisitionSchedule AcquisitionSchedule::from_json(const nlohmann::json& j) {
    AcquisitionSchedule s;
    try {
        s.inter_camera_delay_ms = j.value("inter_camera_delay_ms", s.inter_camera_delay_ms);
        s.inter_image_delay_ms = j.value("inter_image_delay_ms", s.inter_image_delay_ms);
        s.camera_order = j.at("camera_order").get<std::vector<std::string>>();
        s.image_ids = j.at("image_ids").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("schedule: ") + e.what());
    }
    s.validate();
    return s;
}

std::string display_mode_name(DisplayMode mode) {
    return mode == DisplayMode::shared ? "shared" : "per-camera";
}

DisplayMode display_mode_from_name(const std::string& name) {
    if (name == "shared") return DisplayMode::shared;
    if (name == "per-camera") return DisplayMode::per_camera;
    throw ConfigError("unknown display mode '" + name + "' (expected shared or per-camera)");
}

std::int64_t trigger_time(const AcquisitionSchedule& schedule, int cycle, int camera_index) {
    if (cycle < 0 || camera_index < 0 ||
        camera_index >= static_cast<int>(schedule.camera_order.size()))
        throw ValueError("trigger_time: index out of range");
    const std::int64_t n = static_cast<std::int64_t>(schedule.camera_order.size());
    const std::int64_t cycle_period =
        (n - 1) * schedule.inter_camera_delay_ms + schedule.inter_image_delay_ms;
    return cycle * cycle_period + camera_index * schedule.inter_camera_delay_ms;
}

std::vector<TriggerEvent> build_trigger_list(const AcquisitionSchedule& schedule,
                                             DisplayMode mode) {
    schedule.validate();
    if (schedule.image_ids.empty())
        throw ConfigError("schedule: no images to display");

    // The journal must be strictly time-ordered, which zero delays would
    // break for multi-camera or multi-image runs.
    const int n_cameras = static_cast<int>(schedule.camera_order.size());
    const int n_images = static_cast<int>(schedule.image_ids.size());
    if (n_cameras > 1 && schedule.inter_camera_delay_ms == 0)
        throw ConfigError("schedule: inter-camera delay must be positive with multiple cameras");
    if (n_images > 1 && schedule.inter_image_delay_ms == 0)
        throw ConfigError("schedule: inter-image delay must be positive with multiple images");

    std::vector<TriggerEvent> events;
    events.reserve(static_cast<std::size_t>(n_cameras) * n_images);
    for (int k = 0; k < n_images; ++k)
        for (int j = 0; j < n_cameras; ++j) {
            TriggerEvent e;
            e.cycle = k;
            e.camera_index = j;
            e.camera_id = schedule.camera_order[static_cast<std::size_t>(j)];
            const int image_index = mode == DisplayMode::shared ? k : (k + j) % n_images;
            e.image_id = schedule.image_ids[static_cast<std::size_t>(image_index)];
            e.trigger_time_ms = trigger_time(schedule, k, j);
            events.push_back(std::move(e));
        }
    return events;
}

} // namespace parlens
