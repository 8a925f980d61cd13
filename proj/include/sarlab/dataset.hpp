#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "sarlab/config.hpp"
#include "sarlab/imaging.hpp"
#include "sarlab/parallel.hpp"
#include "sarlab/rfsim.hpp"
#include "sarlab/shapes.hpp"
#include "sarlab/training.hpp"

namespace sarlab {

// On-disk dataset layout:
//   <dir>/manifest.jsonl      one JSON record per line
//   <dir>/records/NNNNNNNN.bin  per-record blob: u32 header length,
//       the manifest record (JSON bytes), the frequency history as
//       interleaved re/im float32 little-endian (frequency index
//       fastest), then the normalized image as float32 row-major.

namespace detail {

inline nlohmann::json geometry_to_json(const TargetGeometry& g) {
    nlohmann::json j;
    j["shape_class"] = to_string(g.shape_class);
    j["L"] = g.length;
    j["D"] = g.diameter;
    j["D1"] = g.fore_diameter;
    j["D2"] = g.aft_diameter;
    j["L_C"] = g.collar_length;
    j["D_C"] = g.collar_diameter;
    if (g.ring) {
        j["ring_pos"] = g.ring->axial_position;
        j["ring_depth"] = g.ring->depth;
    } else {
        j["ring_pos"] = nullptr;
        j["ring_depth"] = nullptr;
    }
    return j;
}

inline void write_f32(std::ofstream& out, const float* data, std::size_t count) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(float)));
}

inline std::string record_file_name(int record_id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%08d.bin", record_id);
    return std::string(buf);
}

}  // namespace detail

struct GeneratedDataset {
    std::vector<DatasetRecord> records;
    std::filesystem::path manifest_path;
};

// Samples targets and collection geometries, simulates, images, and
// persists the dataset. The stored image is formed from the
// float32-quantized signal so that downstream consumers can reproduce
// it from the persisted blob bit for bit.
inline GeneratedDataset generate_dataset(const ExperimentConfig& cfg,
                                         const std::filesystem::path& out_dir,
                                         std::size_t workers = 0) {
    namespace fs = std::filesystem;
    const fs::path records_dir = out_dir / "records";
    const fs::path manifest_path = out_dir / "manifest.jsonl";

    std::error_code ec;
    fs::create_directories(records_dir, ec);
    if (ec) throw std::runtime_error("gen-data: cannot create " + records_dir.string());

    const Rng root(cfg.data.seed);

    // target geometries first (sequential draws, one fork per target)
    std::vector<TargetGeometry> targets(cfg.data.num_targets);
    for (int t = 0; t < cfg.data.num_targets; ++t) {
        Rng rng = root.fork(0x74617267).fork(t);
        targets[t] = sample_target(rng);
    }

    const std::size_t total = std::size_t(cfg.data.num_targets) * cfg.data.images_per_target;
    std::vector<DatasetRecord> records(total);
    std::vector<nlohmann::json> manifest(total);

    try {
        parallel_for(total, resolve_workers(workers), [&](std::size_t idx, std::size_t) {
            const int t = static_cast<int>(idx) / cfg.data.images_per_target;
            const int i = static_cast<int>(idx) % cfg.data.images_per_target;
            Rng rng = root.fork(0x696d6167).fork(idx);

            CollectionGeometry coll;
            coll.num_pulses = cfg.collection.num_pulses;
            coll.aperture_arc_rad = cfg.collection.aperture_arc;
            coll.pose_rad = rng.uniform(0.0, kTwoPi);
            coll.altitude_m = rng.uniform(cfg.collection.altitude_min, cfg.collection.altitude_max);
            coll.orbit_radius_m = rng.uniform(cfg.collection.orbit_min, cfg.collection.orbit_max);
            coll.start_azimuth_rad = rng.uniform(0.0, kTwoPi);

            FrequencyHistory hist = collect(targets[t], cfg.radar, coll, cfg.data.snr_db, rng);
            // quantize to the serialized float32 precision before imaging
            for (Complex& v : hist.samples())
                v = Complex(double(float(v.real())), double(float(v.imag())));

            DatasetRecord r;
            r.record_id = static_cast<int>(idx);
            r.target_id = t;
            r.class_label = static_cast<int>(targets[t].shape_class);
            r.pose = coll.pose_rad;
            r.size_scalar = targets[t].size_scalar;
            r.signal = hist;
            r.image = to_model_input(signal_to_image(hist, cfg.imaging));

            nlohmann::json j = detail::geometry_to_json(targets[t]);
            j["record_id"] = r.record_id;
            j["file"] = "records/" + detail::record_file_name(r.record_id);
            j["target_id"] = t;
            j["y"] = r.class_label;
            j["theta"] = r.pose;
            j["size_scalar"] = r.size_scalar;
            j["snr_db"] = cfg.data.snr_db;
            j["altitude"] = coll.altitude_m;
            j["orbit_radius"] = coll.orbit_radius_m;
            j["phi0"] = coll.start_azimuth_rad;
            j["aperture_arc"] = coll.aperture_arc_rad;
            j["num_pulses"] = coll.num_pulses;
            j["num_frequencies"] = cfg.radar.num_frequencies;
            j["image_size"] = cfg.imaging.image_size;
            j["image_index"] = i;

            records[idx] = std::move(r);
            manifest[idx] = std::move(j);
        });

        std::ofstream mf(manifest_path, std::ios::trunc);
        if (!mf) throw std::runtime_error("gen-data: cannot write " + manifest_path.string());
        for (std::size_t idx = 0; idx < total; ++idx) {
            const std::string header = manifest[idx].dump();
            mf << header << "\n";

            const fs::path rec_path = records_dir / detail::record_file_name(static_cast<int>(idx));
            std::ofstream rf(rec_path, std::ios::binary | std::ios::trunc);
            if (!rf) throw std::runtime_error("gen-data: cannot write " + rec_path.string());
            const std::uint32_t len = static_cast<std::uint32_t>(header.size());
            rf.write(reinterpret_cast<const char*>(&len), sizeof(len));
            rf.write(header.data(), static_cast<std::streamsize>(header.size()));

            const DatasetRecord& r = records[idx];
            std::vector<float> sig;
            sig.reserve(r.signal.samples().size() * 2);
            for (const Complex& v : r.signal.samples()) {
                sig.push_back(static_cast<float>(v.real()));
                sig.push_back(static_cast<float>(v.imag()));
            }
            detail::write_f32(rf, sig.data(), sig.size());
            detail::write_f32(rf, r.image.data(), r.image.size());
            if (!rf) throw std::runtime_error("gen-data: write failed for " + rec_path.string());
        }
        if (!mf) throw std::runtime_error("gen-data: manifest write failed");
    } catch (...) {
        // surface disk failures after removing the partial output
        std::error_code cleanup;
        fs::remove_all(records_dir, cleanup);
        fs::remove(manifest_path, cleanup);
        throw;
    }

    GeneratedDataset out;
    out.records = std::move(records);
    out.manifest_path = manifest_path;
    return out;
}

// Reads a persisted dataset back into memory.
inline std::vector<DatasetRecord> load_dataset(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path manifest_path = dir / "manifest.jsonl";
    std::ifstream mf(manifest_path);
    if (!mf) throw std::runtime_error("load: cannot open " + manifest_path.string());

    std::vector<DatasetRecord> records;
    std::string line;
    while (std::getline(mf, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);

        DatasetRecord r;
        r.record_id = j.at("record_id").get<int>();
        r.target_id = j.at("target_id").get<int>();
        r.class_label = j.at("y").get<int>();
        r.pose = j.at("theta").get<double>();
        r.size_scalar = j.at("size_scalar").get<double>();

        RadarConfig radar;
        radar.num_frequencies = j.at("num_frequencies").get<int>();
        CollectionGeometry coll;
        coll.num_pulses = j.at("num_pulses").get<int>();
        coll.pose_rad = r.pose;
        coll.altitude_m = j.at("altitude").get<double>();
        coll.orbit_radius_m = j.at("orbit_radius").get<double>();
        coll.start_azimuth_rad = j.at("phi0").get<double>();
        coll.aperture_arc_rad = j.at("aperture_arc").get<double>();

        const fs::path rec_path = dir / j.at("file").get<std::string>();
        std::ifstream rf(rec_path, std::ios::binary);
        if (!rf) throw std::runtime_error("load: cannot open " + rec_path.string());
        std::uint32_t len = 0;
        rf.read(reinterpret_cast<char*>(&len), sizeof(len));
        rf.seekg(len, std::ios::cur);

        const std::size_t n_sig = std::size_t(radar.num_frequencies) * coll.num_pulses;
        std::vector<float> sig(n_sig * 2);
        rf.read(reinterpret_cast<char*>(sig.data()),
                static_cast<std::streamsize>(sig.size() * sizeof(float)));
        const int side = j.at("image_size").get<int>();
        r.image.resize(std::size_t(side) * side);
        rf.read(reinterpret_cast<char*>(r.image.data()),
                static_cast<std::streamsize>(r.image.size() * sizeof(float)));
        if (!rf) throw std::runtime_error("load: truncated record " + rec_path.string());

        r.signal = FrequencyHistory(radar, coll);
        for (std::size_t i = 0; i < n_sig; ++i)
            r.signal.samples()[i] = Complex(double(sig[2 * i]), double(sig[2 * i + 1]));
        records.push_back(std::move(r));
    }
    if (records.empty()) throw std::runtime_error("load: empty dataset at " + dir.string());
    return records;
}

// Serialization helpers for the image formats (float32 little-endian).
inline void save_real_image(const RealImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (double v : img.v) {
        const float f = static_cast<float>(v);
        out.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
}

inline void save_complex_image(const ComplexImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const Complex& v : img.v) {
        const float re = static_cast<float>(v.real());
        const float im = static_cast<float>(v.imag());
        out.write(reinterpret_cast<const char*>(&re), sizeof(re));
        out.write(reinterpret_cast<const char*>(&im), sizeof(im));
    }
}

}  // namespace sarlab
