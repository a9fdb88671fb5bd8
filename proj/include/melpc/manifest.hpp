#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace melpc::train {

struct ManifestEntry {
    std::string path;   // WAV or MELS cache file
    std::string split;  // train | val | test
    std::string label;
};

struct Manifest {
    std::vector<ManifestEntry> entries;

    std::vector<const ManifestEntry*> split(const std::string& tag) const;
};

// Deterministic seeded shuffle-and-split over the WAV/MELS files of a
// directory (non-recursive, sorted by name before shuffling).
Manifest build_manifest(const std::string& corpus_dir, double val_fraction, uint64_t seed);

// Manifest CSV: path,split,label.
void save_manifest(const std::string& path, const Manifest& manifest);
Manifest load_manifest(const std::string& path);

}  // namespace melpc::train
