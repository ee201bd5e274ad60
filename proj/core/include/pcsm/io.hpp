#pragma once

#include <cstdint>
#include <filesystem>

#include "pcsm/cloud.hpp"
#include "pcsm/saliency.hpp"

namespace pcsm {

// XYZ: one point per line, three whitespace-separated decimals.
Cloud load_xyz(const std::filesystem::path& path);
void write_xyz(const Cloud& cloud, const std::filesystem::path& path);

// OFF: vertices are read; faces, when present, are used for area-weighted
// surface sampling down to `sample_points`. A face-free OFF yields its
// vertices unchanged.
Cloud load_off(const std::filesystem::path& path, std::size_t sample_points,
               std::uint64_t seed = 0);

// ASCII PLY with per-vertex x,y,z (doubles, shortest round-trip formatting)
// and red,green,blue derived from score rank: rank 0 (highest score) is pure
// red (255,0,0), the lowest rank pure blue (0,0,255); tied scores share the
// color of their average rank.
void write_ply_colored(const Cloud& cloud, const SaliencyMap& map,
                       const std::filesystem::path& path);

// Reads the vertex coordinates back from an ASCII PLY written by this
// module (tolerates extra vertex properties).
Cloud read_ply(const std::filesystem::path& path);

// Dataset bundle: a directory of XYZ files plus labels.csv (filename,label).
void save_dataset_bundle(const Dataset& dataset,
                         const std::filesystem::path& dir);
Dataset load_dataset_bundle(const std::filesystem::path& dir);

}  // namespace pcsm
