#include "increcon/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

namespace increcon {

std::string to_string(FusionMethod m) {
    switch (m) {
        case FusionMethod::Gru: return "gru";
        case FusionMethod::Average: return "avg";
        case FusionMethod::LinearTsdf: return "linear";
    }
    return "?";
}
std::string to_string(FusionArea a) { return a == FusionArea::Occ ? "occ" : "fbv"; }
std::string to_string(KeyframeMode m) {
    return m == KeyframeMode::Conjunction ? "conjunction" : "disjunction";
}

FusionMethod fusion_method_from_string(const std::string& s) {
    if (s == "gru") return FusionMethod::Gru;
    if (s == "avg" || s == "average") return FusionMethod::Average;
    if (s == "linear") return FusionMethod::LinearTsdf;
    fail("unknown fusion method '", s, "' (expected gru|avg|linear)");
}
FusionArea fusion_area_from_string(const std::string& s) {
    if (s == "occ") return FusionArea::Occ;
    if (s == "fbv") return FusionArea::Fbv;
    fail("unknown fusion area '", s, "' (expected occ|fbv)");
}
KeyframeMode keyframe_mode_from_string(const std::string& s) {
    if (s == "conjunction" || s == "and") return KeyframeMode::Conjunction;
    if (s == "disjunction" || s == "or") return KeyframeMode::Disjunction;
    fail("unknown keyframe mode '", s, "' (expected conjunction|disjunction)");
}

void PipelineConfig::validate() const {
    if (!(voxel_size > 0)) fail("voxel_size must be positive");
    if (!(lambda > 0)) fail("lambda must be positive");
    if (!(d_max > 0)) fail("d_max must be positive");
    if (!(t_max > 0) || !(r_max_deg > 0)) fail("key-frame thresholds must be positive");
    if (!(theta > 0 && theta < 1)) fail("theta must be in (0,1)");
    if (n_views < 2) fail("n_views must be >= 2");
    if (!(w_max >= 1)) fail("w_max must be >= 1");
    model.validate();
}

namespace {

using Setter = std::function<void(PipelineConfig&, const std::string&)>;

template <typename T>
T parse_num(const std::string& v, const std::string& key) {
    std::istringstream ss(v);
    T out;
    if (!(ss >> out)) fail("config key '", key, "': cannot parse '", v, "'");
    return out;
}

int parse_array3(const std::string& v, const std::string& key, std::array<int, 3>& out) {
    std::istringstream ss(v);
    std::string tok;
    int n = 0;
    while (std::getline(ss, tok, ',')) {
        if (n >= 3) fail("config key '", key, "': expected 3 comma-separated values");
        out[n++] = parse_num<int>(tok, key);
    }
    if (n != 3) fail("config key '", key, "': expected 3 comma-separated values");
    return n;
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"voxel_size", [](auto& c, const auto& v) { c.voxel_size = parse_num<double>(v, "voxel_size"); }},
        {"lambda", [](auto& c, const auto& v) { c.lambda = parse_num<double>(v, "lambda"); }},
        {"d_max", [](auto& c, const auto& v) { c.d_max = parse_num<double>(v, "d_max"); }},
        {"R_max_deg", [](auto& c, const auto& v) { c.r_max_deg = parse_num<double>(v, "R_max_deg"); }},
        {"t_max", [](auto& c, const auto& v) { c.t_max = parse_num<double>(v, "t_max"); }},
        {"theta", [](auto& c, const auto& v) { c.theta = parse_num<double>(v, "theta"); }},
        {"n_views", [](auto& c, const auto& v) { c.n_views = parse_num<int>(v, "n_views"); }},
        {"fusion_method", [](auto& c, const auto& v) { c.fusion_method = fusion_method_from_string(v); }},
        {"fusion_area", [](auto& c, const auto& v) { c.fusion_area = fusion_area_from_string(v); }},
        {"keyframe_mode", [](auto& c, const auto& v) { c.keyframe_mode = keyframe_mode_from_string(v); }},
        {"w_max", [](auto& c, const auto& v) { c.w_max = parse_num<float>(v, "w_max"); }},
        {"mesh_every_fragment",
         [](auto& c, const auto& v) { c.mesh_every_fragment = v == "1" || v == "true"; }},
        {"seed", [](auto& c, const auto& v) { c.seed = parse_num<uint64_t>(v, "seed"); }},
        {"feat_channels",
         [](auto& c, const auto& v) { parse_array3(v, "feat_channels", c.model.feat_channels); }},
        {"geo_channels",
         [](auto& c, const auto& v) { parse_array3(v, "geo_channels", c.model.geo_channels); }},
        {"strides", [](auto& c, const auto& v) { parse_array3(v, "strides", c.model.strides); }},
        {"geo_conv_layers",
         [](auto& c, const auto& v) { c.model.geo_conv_layers = parse_num<int>(v, "geo_conv_layers"); }},
        {"mlp_hidden",
         [](auto& c, const auto& v) { c.model.mlp_hidden = parse_num<int>(v, "mlp_hidden"); }},
        {"mlp_hidden_layers",
         [](auto& c, const auto& v) {
             c.model.mlp_hidden_layers = parse_num<int>(v, "mlp_hidden_layers");
         }},
    };
    return table;
}

}  // namespace

PipelineConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail("cannot open config: ", path);
    PipelineConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        while (!line.empty() && std::isspace(uint8_t(line.back()))) line.pop_back();
        size_t start = 0;
        while (start < line.size() && std::isspace(uint8_t(line[start]))) ++start;
        line = line.substr(start);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("config line ", line_no, ": expected key=value");
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        auto it = setters().find(key);
        if (it == setters().end()) fail("config line ", line_no, ": unknown key '", key, "'");
        it->second(cfg, value);
    }
    cfg.validate();
    return cfg;
}

std::string config_to_text(const PipelineConfig& c) {
    std::ostringstream os;
    os.precision(12);
    os << "voxel_size=" << c.voxel_size << "\n";
    os << "lambda=" << c.lambda << "\n";
    os << "d_max=" << c.d_max << "\n";
    os << "R_max_deg=" << c.r_max_deg << "\n";
    os << "t_max=" << c.t_max << "\n";
    os << "theta=" << c.theta << "\n";
    os << "n_views=" << c.n_views << "\n";
    os << "fusion_method=" << to_string(c.fusion_method) << "\n";
    os << "fusion_area=" << to_string(c.fusion_area) << "\n";
    os << "keyframe_mode=" << to_string(c.keyframe_mode) << "\n";
    os << "w_max=" << c.w_max << "\n";
    os << "mesh_every_fragment=" << (c.mesh_every_fragment ? 1 : 0) << "\n";
    os << "seed=" << c.seed << "\n";
    os << "feat_channels=" << c.model.feat_channels[0] << ',' << c.model.feat_channels[1] << ','
       << c.model.feat_channels[2] << "\n";
    os << "geo_channels=" << c.model.geo_channels[0] << ',' << c.model.geo_channels[1] << ','
       << c.model.geo_channels[2] << "\n";
    os << "strides=" << c.model.strides[0] << ',' << c.model.strides[1] << ','
       << c.model.strides[2] << "\n";
    os << "geo_conv_layers=" << c.model.geo_conv_layers << "\n";
    os << "mlp_hidden=" << c.model.mlp_hidden << "\n";
    os << "mlp_hidden_layers=" << c.model.mlp_hidden_layers << "\n";
    return os.str();
}

void save_config(const PipelineConfig& cfg, const std::string& path) {
    std::ofstream os(path);
    if (!os) fail("cannot write config: ", path);
    os << config_to_text(cfg);
}

}  // namespace increcon
