#pragma once

#include "increcon/dataset.hpp"
#include "increcon/model.hpp"

#include <string>

namespace increcon {

enum class FusionMethod { Gru, Average, LinearTsdf };
enum class FusionArea { Occ, Fbv };

std::string to_string(FusionMethod m);
std::string to_string(FusionArea a);
std::string to_string(KeyframeMode m);
FusionMethod fusion_method_from_string(const std::string& s);
FusionArea fusion_area_from_string(const std::string& s);
KeyframeMode keyframe_mode_from_string(const std::string& s);

struct PipelineConfig {
    double voxel_size = 0.04;  // finest level
    double lambda = 0.12;
    double d_max = 3.0;
    double r_max_deg = 15.0;
    double t_max = 0.1;
    double theta = 0.5;
    int n_views = 9;
    FusionMethod fusion_method = FusionMethod::Gru;
    FusionArea fusion_area = FusionArea::Fbv;
    KeyframeMode keyframe_mode = KeyframeMode::Conjunction;
    float w_max = 255.0f;
    bool mesh_every_fragment = false;
    uint64_t seed = 0;
    ModelConfig model;

    double coarse_voxel_size() const { return voxel_size * 4.0; }
    double level_size(int level) const { return voxel_size * double(1 << (3 - level)); }
    FragmentAssemblyConfig assembly() const {
        return {n_views, t_max, r_max_deg, d_max, coarse_voxel_size(), keyframe_mode};
    }
    void validate() const;
};

// Plain-text `key=value` config files; unknown keys are an error.
PipelineConfig load_config(const std::string& path);
void save_config(const PipelineConfig& cfg, const std::string& path);
std::string config_to_text(const PipelineConfig& cfg);

}  // namespace increcon
