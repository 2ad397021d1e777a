#pragma once

#include <array>
#include <optional>
#include <cstdint>
#include <string>
#include <vector>

#include "ukan/metrics.hpp"

namespace ukan {

enum class NiftiType : std::int16_t { uint8 = 2, int16 = 4, float32 = 16, float64 = 64 };

int nifti_bitpix(NiftiType t);

struct NiftiHeader {
    std::int32_t sizeof_hdr = 348;
    std::array<std::int16_t, 8> dim{};
    NiftiType datatype = NiftiType::float32;
    std::int16_t bitpix = 32;
    std::array<float, 8> pixdim{1, 1, 1, 1, 1, 1, 1, 1};
    float vox_offset = 352;
    float scl_slope = 1;
    float scl_inter = 0;
    std::uint8_t xyzt_units = 2;  // millimetres
    std::int16_t qform_code = 0;
    std::int16_t sform_code = 1;
    std::array<float, 4> srow_x{1, 0, 0, 0}, srow_y{0, 1, 0, 0}, srow_z{0, 0, 1, 0};
    std::array<char, 4> magic{'n', '+', '1', '\0'};
    bool big_endian = false;  // as found on read
};

// Voxels are [D, H, W] row-major with W = dim[1] varying fastest.
struct NiftiVolume {
    NiftiHeader header;
    Extents ext;
    std::vector<double> voxels;  // scaled by scl_slope / scl_inter when slope != 0
};

struct NiftiWriteOptions {
    NiftiType datatype = NiftiType::float32;
    Spacing spacing;
    std::optional<std::array<std::array<float, 4>, 3>> srow;
};

std::vector<std::uint8_t> encode_nifti(const std::vector<double>& voxels, const Extents& ext,
                                       const NiftiWriteOptions& opts, bool big_endian = false);
NiftiVolume decode_nifti(const std::vector<std::uint8_t>& bytes, const std::string& source = "<memory>");

void write_nifti(const std::string& path, const std::vector<double>& voxels, const Extents& ext,
                 const NiftiWriteOptions& opts = {});
NiftiVolume read_nifti(const std::string& path);

}  // namespace ukan
