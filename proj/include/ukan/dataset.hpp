#pragma once

#include <string>
#include <vector>

#include "ukan/data.hpp"

namespace ukan {

// One manifest row. Paths are stored as written; relative paths resolve
// against the manifest's directory.
struct ManifestEntry {
    std::string case_id;
    std::array<std::string, 4> modalities;  // t1, t1gd, t2, flair
    std::string label;
    std::string split;  // "train", "val", "test" or empty
};

struct Manifest {
    std::string directory;
    std::vector<ManifestEntry> entries;

    // CSV with header case_id,t1,t1gd,t2,flair,label[,split].
    static Manifest load(const std::string& path);
    void save(const std::string& path) const;
    std::vector<const ManifestEntry*> split(const std::string& name) const;
};

SampleVolume load_case(const Manifest& manifest, const ManifestEntry& entry);

// Writes the four modalities and labels as NIfTI files into `dir` and
// returns the manifest row (paths relative to `dir`).
ManifestEntry save_case(const SampleVolume& sample, const std::string& dir, const std::string& split = "train");

}  // namespace ukan
