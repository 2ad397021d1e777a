#include "ukan/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ukan/nifti.hpp"

namespace ukan {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string resolve(const Manifest& m, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? p : (fs::path(m.directory) / path).string();
}

}  // namespace

Manifest Manifest::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open manifest '" + path + "'");
    Manifest m;
    m.directory = fs::path(path).parent_path().string();
    std::string line;
    if (!std::getline(f, line)) throw Error("manifest '" + path + "' is empty");
    const auto header = split_csv(line);
    const std::vector<std::string> want{"case_id", "t1", "t1gd", "t2", "flair", "label"};
    if (header.size() < want.size() || !std::equal(want.begin(), want.end(), header.begin()) ||
        (header.size() == 7 && header[6] != "split") || header.size() > 7)
        throw Error("manifest '" + path + "': header must be case_id,t1,t1gd,t2,flair,label[,split]");
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw Error("manifest '" + path + "' line " + std::to_string(lineno) + ": expected " +
                        std::to_string(header.size()) + " columns");
        ManifestEntry e;
        e.case_id = cells[0];
        for (int i = 0; i < 4; ++i) e.modalities[i] = cells[1 + i];
        e.label = cells[5];
        if (header.size() == 7) e.split = cells[6];
        m.entries.push_back(std::move(e));
    }
    return m;
}

void Manifest::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw Error("cannot write manifest '" + path + "'");
    f << "case_id,t1,t1gd,t2,flair,label,split\n";
    for (const auto& e : entries)
        f << e.case_id << ',' << e.modalities[0] << ',' << e.modalities[1] << ',' << e.modalities[2] << ','
          << e.modalities[3] << ',' << e.label << ',' << e.split << '\n';
}

std::vector<const ManifestEntry*> Manifest::split(const std::string& name) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries)
        if (e.split == name) out.push_back(&e);
    return out;
}

SampleVolume load_case(const Manifest& manifest, const ManifestEntry& entry) {
    try {
        SampleVolume s;
        s.case_id = entry.case_id;
        for (int m = 0; m < kModalities; ++m) {
            const NiftiVolume v = read_nifti(resolve(manifest, entry.modalities[m]));
            if (m == 0) {
                s.ext = v.ext;
                s.spacing = {v.header.pixdim[3], v.header.pixdim[2], v.header.pixdim[1]};
                s.image.reserve(kModalities * s.ext.voxels());
            } else if (v.ext.d != s.ext.d || v.ext.h != s.ext.h || v.ext.w != s.ext.w) {
                throw ShapeError(std::string(kModalityNames[m]) + " extents differ from t1");
            }
            for (double x : v.voxels) s.image.push_back(static_cast<float>(x));
        }
        const NiftiVolume lab = read_nifti(resolve(manifest, entry.label));
        if (lab.ext.d != s.ext.d || lab.ext.h != s.ext.h || lab.ext.w != s.ext.w)
            throw ShapeError("label extents differ from t1");
        s.labels.reserve(lab.voxels.size());
        for (double x : lab.voxels) {
            if (x != std::floor(x) || x < 0 || x > 4) throw Error("label value " + std::to_string(x) + " outside 0..4");
            s.labels.push_back(static_cast<std::uint8_t>(x));
        }
        s.validate();
        return s;
    } catch (const Error& e) {
        throw Error("case " + entry.case_id + ": " + e.what());
    }
}

ManifestEntry save_case(const SampleVolume& sample, const std::string& dir, const std::string& split) {
    sample.validate();
    fs::create_directories(dir);
    ManifestEntry e;
    e.case_id = sample.case_id;
    e.split = split;
    NiftiWriteOptions opts;
    opts.spacing = sample.spacing;
    const std::int64_t V = sample.ext.voxels();
    for (int m = 0; m < kModalities; ++m) {
        e.modalities[m] = sample.case_id + "_" + kModalityNames[m] + ".nii";
        std::vector<double> v(sample.image.begin() + m * V, sample.image.begin() + (m + 1) * V);
        write_nifti((fs::path(dir) / e.modalities[m]).string(), v, sample.ext, opts);
    }
    e.label = sample.case_id + "_label.nii";
    opts.datatype = NiftiType::uint8;
    write_nifti((fs::path(dir) / e.label).string(), std::vector<double>(sample.labels.begin(), sample.labels.end()),
                sample.ext, opts);
    return e;
}

}  // namespace ukan
