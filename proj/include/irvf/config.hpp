#pragma once

// Flat UTF-8 `key = value` configuration with '#' comments. Unknown keys are
// hard errors so ablation-flag typos cannot silently produce the wrong
// topology.

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "irvf/losses.hpp"
#include "irvf/model.hpp"

namespace irvf {

struct TrainConfig {
    // Optimization protocol.
    int epochs = 300;
    int steps = 0;  // explicit total optimizer steps; 0 derives from epochs
    int batch_size = 6;
    double lr_init = 2e-4;
    double lr_final = 2e-6;
    double weight_decay = 0.01;
    int crop_size = 64;
    bool augment = true;  // horizontal + vertical flips
    double alpha = 1.0;
    std::uint64_t seed = 0;
    int workers = 0;  // 0 = hardware concurrency

    ModelConfig model;

    void validate() const {
        if (lr_final > lr_init) throw std::invalid_argument("config: lr_final must be <= lr_init");
        if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
        if (crop_size < 8) throw std::invalid_argument("config: crop_size must be >= 8");
        if (epochs < 1 && steps < 1) throw std::invalid_argument("config: epochs or steps must be >= 1");
        if (alpha < 0.0) throw std::invalid_argument("config: alpha must be >= 0");
        if (model.channels < 1) throw std::invalid_argument("config: channels must be >= 1");
        if (model.fusion_stages < 1) throw std::invalid_argument("config: fusion_stages must be >= 1");
    }

    LossConfig loss() const { return LossConfig{alpha}; }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

template <typename N>
N parse_num(const std::string& key, const std::string& v) {
    std::istringstream in(v);
    N out{};
    if (!(in >> out)) {
        throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + v + "'");
    }
    std::string rest;
    in >> rest;
    if (!rest.empty()) {
        throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + v + "'");
    }
    return out;
}

}  // namespace detail

class ConfigBinder {
public:
    explicit ConfigBinder(TrainConfig& c) {
        bind_int("epochs", c.epochs);
        bind_int("steps", c.steps);
        bind_int("batch_size", c.batch_size);
        bind_double("lr_init", c.lr_init);
        bind_double("lr_final", c.lr_final);
        bind_double("weight_decay", c.weight_decay);
        bind_int("crop_size", c.crop_size);
        bind_bool("augment", c.augment);
        bind_double("alpha", c.alpha);
        bind_u64("seed", c.seed);
        bind_int("workers", c.workers);
        bind_int("channels", c.model.channels);
        bind_int("heads", c.model.heads);
        bind_double("ffn_expansion", c.model.ffn_expansion);
        bind_int("encoder_blocks", c.model.encoder_blocks);
        bind_int("pool_size", c.model.pool_size);
        bind_int("fusion_stages", c.model.fusion_stages);
        bind_bool("shared_encoder", c.model.shared_encoder);
        bind_bool("fusion_regen_prompts", c.model.fusion_regen_prompts);
        bind_int("hde_window", c.model.hde.window);
        bind_int("gf_radius", c.model.hde.gf_radius);
        bind_double("gf_eps", c.model.hde.gf_eps);
        bind_double("omega", c.model.hde.omega);
        bind_double("airlight_floor", c.model.hde.airlight_floor);
        bind_bool("no_f_ir", c.model.ablation.no_f_ir);
        bind_bool("no_hde", c.model.ablation.no_hde);
        bind_bool("no_p_ir", c.model.ablation.no_p_ir);
        bind_bool("no_fr_peb", c.model.ablation.no_fr_peb);
        bind_bool("no_p_vi", c.model.ablation.no_p_vi);
        bind_bool("no_fb_peb", c.model.ablation.no_fb_peb);
    }

    void set(const std::string& key, const std::string& value) {
        auto it = setters_.find(key);
        if (it == setters_.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
        it->second(value);
    }

    std::string serialize() const {
        std::ostringstream out;
        out.precision(17);
        for (const auto& key : order_) out << key << " = " << getters_.at(key)() << "\n";
        return out.str();
    }

private:
    void bind_int(const std::string& k, int& ref) {
        add(k, [&ref, k](const std::string& v) { ref = detail::parse_num<int>(k, v); },
            [&ref] { return std::to_string(ref); });
    }
    void bind_u64(const std::string& k, std::uint64_t& ref) {
        add(k, [&ref, k](const std::string& v) { ref = detail::parse_num<std::uint64_t>(k, v); },
            [&ref] { return std::to_string(ref); });
    }
    void bind_double(const std::string& k, double& ref) {
        add(k, [&ref, k](const std::string& v) { ref = detail::parse_num<double>(k, v); },
            [&ref] {
                std::ostringstream o;
                o.precision(17);
                o << ref;
                return o.str();
            });
    }
    void bind_bool(const std::string& k, bool& ref) {
        add(k, [&ref, k](const std::string& v) { ref = detail::parse_bool(k, v); },
            [&ref] { return std::string(ref ? "true" : "false"); });
    }

    void add(const std::string& k, std::function<void(const std::string&)> set,
             std::function<std::string()> get) {
        order_.push_back(k);
        setters_[k] = std::move(set);
        getters_[k] = std::move(get);
    }

    std::vector<std::string> order_;
    std::map<std::string, std::function<void(const std::string&)>> setters_;
    std::map<std::string, std::function<std::string()>> getters_;
};

inline void apply_config_text(TrainConfig& cfg, const std::string& text) {
    ConfigBinder binder(cfg);
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected 'key = value'");
        }
        binder.set(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
}

inline TrainConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    TrainConfig cfg;
    apply_config_text(cfg, buf.str());
    cfg.validate();
    return cfg;
}

inline std::string serialize_config(const TrainConfig& cfg) {
    TrainConfig copy = cfg;
    return ConfigBinder(copy).serialize();
}

}  // namespace irvf
