#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sarlab/imaging.hpp"
#include "sarlab/rfsim.hpp"
#include "sarlab/robustness.hpp"
#include "sarlab/training.hpp"

namespace sarlab {

// Flat key-value configuration text: one `section.key = value` per
// line, '#' comments. Unknown keys are rejected so typos surface
// instead of silently using defaults.
class KeyValueConfig {
public:
    static KeyValueConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("config: cannot open " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return from_text(ss.str(), path);
    }

    static KeyValueConfig from_text(const std::string& text, const std::string& origin = "<text>") {
        KeyValueConfig cfg;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("config: missing '=' at " + origin + ":" +
                                            std::to_string(lineno));
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty())
                throw std::invalid_argument("config: empty key at " + origin + ":" + std::to_string(lineno));
            cfg.values_[key] = value;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        touched_.insert(key);
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        touched_.insert(key);
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t pos = 0;
            const double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw std::invalid_argument("config: '" + key + "' is not a number: " + it->second);
        }
    }

    long get_int(const std::string& key, long fallback) const {
        touched_.insert(key);
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t pos = 0;
            const long v = std::stol(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw std::invalid_argument("config: '" + key + "' is not an integer: " + it->second);
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        touched_.insert(key);
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw std::invalid_argument("config: '" + key + "' is not a boolean: " + it->second);
    }

    // call after reading every supported key
    void reject_unknown_keys() const {
        for (const auto& [k, v] : values_)
            if (!touched_.count(k)) throw std::invalid_argument("config: unknown key '" + k + "'");
    }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> values_;
    mutable std::set<std::string> touched_;
};

// Collection-geometry sampling ranges for dataset generation.
struct CollectionSampling {
    double altitude_min = 500.0, altitude_max = 2000.0;
    double orbit_min = 1000.0, orbit_max = 5000.0;
    int num_pulses = 160;
    double aperture_arc = default_aperture_arc();
};

struct DataConfig {
    int num_targets = 40;
    int images_per_target = 25;
    double snr_db = 20.0;
    std::uint64_t seed = 1234;
};

struct ExperimentConfig {
    DataConfig data;
    RadarConfig radar;
    CollectionSampling collection;
    ImagingConfig imaging;
    TrainConfig train;
    AttackConfig attack;
    std::vector<Scheme> schemes{Scheme::Basic};
    int folds = 4;
    std::uint64_t seed = 1;

    static ExperimentConfig from_file(const std::string& path) {
        return from_config(KeyValueConfig::from_file(path));
    }

    static ExperimentConfig from_text(const std::string& text) {
        return from_config(KeyValueConfig::from_text(text));
    }

    static ExperimentConfig from_config(const KeyValueConfig& kv) {
        ExperimentConfig c;
        c.data.num_targets = int(kv.get_int("data.num_targets", c.data.num_targets));
        c.data.images_per_target = int(kv.get_int("data.images_per_target", c.data.images_per_target));
        c.data.snr_db = kv.get_double("data.snr_db", c.data.snr_db);
        c.data.seed = std::uint64_t(kv.get_int("data.seed", long(c.data.seed)));

        c.radar.center_frequency_hz = kv.get_double("radar.center_frequency_hz", c.radar.center_frequency_hz);
        c.radar.bandwidth_hz = kv.get_double("radar.bandwidth_hz", c.radar.bandwidth_hz);
        c.radar.num_frequencies = int(kv.get_int("radar.num_frequencies", c.radar.num_frequencies));

        c.collection.altitude_min = kv.get_double("collection.altitude_min", c.collection.altitude_min);
        c.collection.altitude_max = kv.get_double("collection.altitude_max", c.collection.altitude_max);
        c.collection.orbit_min = kv.get_double("collection.orbit_min", c.collection.orbit_min);
        c.collection.orbit_max = kv.get_double("collection.orbit_max", c.collection.orbit_max);
        c.collection.num_pulses = int(kv.get_int("collection.num_pulses", c.collection.num_pulses));
        c.collection.aperture_arc = kv.get_double("collection.aperture_arc", c.collection.aperture_arc);

        c.imaging.window_m = kv.get_double("imaging.window_m", c.imaging.window_m);
        c.imaging.image_size = int(kv.get_int("imaging.image_size", c.imaging.image_size));
        c.imaging.mu_db = kv.get_double("imaging.mu_db", c.imaging.mu_db);
        c.imaging.dynamic_range_db = kv.get_double("imaging.dynamic_range_db", c.imaging.dynamic_range_db);
        c.imaging.upsample = int(kv.get_int("imaging.upsample", c.imaging.upsample));
        c.imaging.magnitude_floor = kv.get_double("imaging.magnitude_floor", c.imaging.magnitude_floor);
        c.train.imaging = c.imaging;

        c.train.lambda_pose = kv.get_double("train.lambda_pose", c.train.lambda_pose);
        c.train.lambda_sim = kv.get_double("train.lambda_sim", c.train.lambda_sim);
        c.train.lambda_adv = kv.get_double("train.lambda_adv", c.train.lambda_adv);
        c.train.epsilon_scale = kv.get_double("train.epsilon_scale", c.train.epsilon_scale);
        c.train.epsilon_abs = kv.get_double("train.epsilon_abs", c.train.epsilon_abs);
        c.train.thresholds.size_tol = kv.get_double("train.size_tol", c.train.thresholds.size_tol);
        c.train.thresholds.pose_tol = kv.get_double("train.pose_tol_deg", 10.0) * kPi / 180.0;
        c.train.epochs = int(kv.get_int("train.epochs", c.train.epochs));
        c.train.batch_size = int(kv.get_int("train.batch_size", c.train.batch_size));
        c.train.early_stop_train_acc = kv.get_double("train.early_stop_train_acc", 0.0);
        c.train.workers = std::size_t(kv.get_int("train.workers", 0));
        c.train.optimizer.learning_rate = float(kv.get_double("train.learning_rate", 1e-3));
        c.train.optimizer.beta1 = float(kv.get_double("train.beta1", 0.9));
        c.train.optimizer.beta2 = float(kv.get_double("train.beta2", 0.999));
        const std::string opt = kv.get_string("train.optimizer", "adam");
        if (opt == "adam") c.train.optimizer.mode = nn::OptimizerMode::Adam;
        else if (opt == "sgd") c.train.optimizer.mode = nn::OptimizerMode::Sgd;
        else throw std::invalid_argument("config: train.optimizer must be adam or sgd");

        c.attack.max_iter = int(kv.get_int("attack.max_iter", c.attack.max_iter));
        c.attack.overshoot = kv.get_double("attack.overshoot", c.attack.overshoot);
        c.attack.max_samples = std::size_t(kv.get_int("attack.max_samples", 0));
        c.attack.workers = std::size_t(kv.get_int("attack.workers", 0));

        c.folds = int(kv.get_int("cv.folds", c.folds));
        c.seed = std::uint64_t(kv.get_int("seed", long(c.seed)));

        const std::string schemes = kv.get_string("schemes", "BASIC");
        c.schemes.clear();
        std::istringstream ss(schemes);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto b = item.find_first_not_of(" \t");
            const auto e = item.find_last_not_of(" \t");
            if (b == std::string::npos) continue;
            c.schemes.push_back(scheme_from_string(item.substr(b, e - b + 1)));
        }
        if (c.schemes.empty()) throw std::invalid_argument("config: no schemes listed");

        kv.reject_unknown_keys();
        c.validate();
        return c;
    }

    void validate() const {
        if (folds < 2) throw std::invalid_argument("config: cv.folds must be >= 2");
        if (data.num_targets < folds)
            throw std::invalid_argument("config: need at least one target per fold");
        if (data.images_per_target < 1) throw std::invalid_argument("config: images_per_target >= 1");
        radar.validate();
        imaging.validate();
    }
};

}  // namespace sarlab
