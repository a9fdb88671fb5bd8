#include "melpc/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "melpc/common.hpp"
#include "melpc/csv.hpp"
#include "melpc/rng.hpp"

namespace melpc::train {

std::vector<const ManifestEntry*> Manifest::split(const std::string& tag) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries)
        if (e.split == tag) out.push_back(&e);
    return out;
}

namespace {

std::string label_from_name(const std::string& stem) {
    auto us = stem.find('_');
    return us == std::string::npos ? std::string("clip") : stem.substr(0, us);
}

}  // namespace

Manifest build_manifest(const std::string& corpus_dir, double val_fraction, uint64_t seed) {
    namespace fs = std::filesystem;
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw DataError("val_fraction must be in [0,1)");
    if (!fs::is_directory(corpus_dir)) throw DataError("not a directory: " + corpus_dir);

    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(corpus_dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        for (auto& c : ext) c = static_cast<char>(std::tolower(c));
        if (ext == ".wav" || ext == ".mels") files.push_back(entry.path().string());
    }
    if (files.empty()) throw DataError("no WAV or MELS files in " + corpus_dir);
    std::sort(files.begin(), files.end());

    Rng rng(seed);
    rng.shuffle(files);

    const int n = static_cast<int>(files.size());
    const int n_val = static_cast<int>(std::lround(n * val_fraction));
    if (n_val == 0 && val_fraction > 0.0)
        log_warn("val_fraction " + std::to_string(val_fraction) + " rounds to zero val clips");
    if (val_fraction == 0.0) log_warn("val_fraction is 0: no validation split");

    Manifest manifest;
    manifest.entries.reserve(files.size());
    for (int i = 0; i < n; ++i) {
        ManifestEntry e;
        e.path = files[i];
        e.split = i < n_val ? "val" : "train";
        e.label = label_from_name(fs::path(files[i]).stem().string());
        manifest.entries.push_back(std::move(e));
    }
    std::sort(manifest.entries.begin(), manifest.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    return manifest;
}

void save_manifest(const std::string& path, const Manifest& manifest) {
    CsvTable table;
    table.header = {"path", "split", "label"};
    for (const auto& e : manifest.entries) table.rows.push_back({e.path, e.split, e.label});
    csv_write_file(path, table);
}

Manifest load_manifest(const std::string& path) {
    CsvTable table = csv_read_file(path);
    const int path_col = table.require_column("path");
    const int split_col = table.require_column("split");
    const int label_col = table.require_column("label");

    Manifest manifest;
    std::set<std::string> seen;
    for (const auto& row : table.rows) {
        ManifestEntry e;
        e.path = row[path_col];
        e.split = row[split_col];
        e.label = row[label_col];
        if (e.split != "train" && e.split != "val" && e.split != "test")
            throw DataError("bad split tag '" + e.split + "' for " + e.path);
        if (!seen.insert(e.path).second) throw DataError("duplicate manifest path: " + e.path);
        manifest.entries.push_back(std::move(e));
    }
    if (manifest.entries.empty()) throw DataError("empty manifest: " + path);
    return manifest;
}

}  // namespace melpc::train
