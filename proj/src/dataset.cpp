#include "laneforge/dataset.hpp"

#include <unordered_map>

#include "laneforge/bridge.hpp"

namespace laneforge {

Dataset load_dataset(std::span<const std::filesystem::path> runs, const DatasetOptions& options) {
    Dataset out;
    std::size_t group = 0;
    for (const auto& dir : runs) {
        const RunData run = load_run(dir);
        out.source_rows += run.rows.size();
        const std::vector<Sample> rows = filter_rows(run.rows, options.steer_limit_deg);
        out.filtered_rows += rows.size();
        if (rows.empty()) continue;

        std::unordered_map<std::size_t, Frame> cache;
        auto frame_at = [&](std::size_t i) -> const Frame& {
            auto it = cache.find(i);
            if (it == cache.end()) {
                it = cache.emplace(i, model_frame(run.frame(rows[i]), options.pipeline, options.width, options.height))
                         .first;
            }
            return it->second;
        };

        if (options.arch == Arch::Single) {
            for (std::size_t i = 0; i < rows.size(); ++i) {
                out.samples.push_back({{frame_at(i)}, rows[i].steer_deg});
                out.groups.push_back(group++);
            }
        } else {
            if (rows.size() < 3) continue;
            const double period = estimate_period_ms(rows);
            for (const auto& t : make_triplets(rows, period)) {
                out.samples.push_back({{frame_at(t[0]), frame_at(t[1]), frame_at(t[2])}, rows[t[2]].steer_deg});
                out.groups.push_back(group++);
            }
        }
    }
    return out;
}

Dataset mirrored(const Dataset& data) {
    Dataset out;
    out.samples = mirror_augment(data.samples);
    out.groups = data.groups;
    out.groups.insert(out.groups.end(), data.groups.begin(), data.groups.end());
    out.source_rows = data.source_rows;
    out.filtered_rows = data.filtered_rows;
    return out;
}

}  // namespace laneforge
