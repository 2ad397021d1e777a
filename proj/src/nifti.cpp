#include "ukan/nifti.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ukan/tensor.hpp"

namespace ukan {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDataOffset = 352;

class ByteWriter {
public:
    ByteWriter(std::vector<std::uint8_t>& buf, bool big) : buf_(buf), big_(big) {}

    template <class T>
    void put(std::size_t offset, T value) {
        std::uint8_t raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        if (big_ == (std::endian::native == std::endian::little)) std::reverse(raw, raw + sizeof(T));
        std::memcpy(buf_.data() + offset, raw, sizeof(T));
    }

private:
    std::vector<std::uint8_t>& buf_;
    bool big_;
};

class ByteReader {
public:
    ByteReader(const std::vector<std::uint8_t>& buf, bool big) : buf_(buf), big_(big) {}

    template <class T>
    T get(std::size_t offset) const {
        std::uint8_t raw[sizeof(T)];
        std::memcpy(raw, buf_.data() + offset, sizeof(T));
        if (big_ == (std::endian::native == std::endian::little)) std::reverse(raw, raw + sizeof(T));
        T v;
        std::memcpy(&v, raw, sizeof(T));
        return v;
    }

private:
    const std::vector<std::uint8_t>& buf_;
    bool big_;
};

bool supported(std::int16_t code) { return code == 2 || code == 4 || code == 16 || code == 64; }

}  // namespace

int nifti_bitpix(NiftiType t) {
    switch (t) {
        case NiftiType::uint8: return 8;
        case NiftiType::int16: return 16;
        case NiftiType::float32: return 32;
        case NiftiType::float64: return 64;
    }
    return 0;
}

std::vector<std::uint8_t> encode_nifti(const std::vector<double>& voxels, const Extents& ext,
                                       const NiftiWriteOptions& opts, bool big_endian) {
    if (static_cast<std::int64_t>(voxels.size()) != ext.voxels() || ext.voxels() <= 0)
        throw ShapeError("write_nifti: voxel count does not match extents");
    if (ext.d > 32767 || ext.h > 32767 || ext.w > 32767) throw Error("write_nifti: extent exceeds the int16 dim field");
    const int bytes = nifti_bitpix(opts.datatype) / 8;
    std::vector<std::uint8_t> buf(kDataOffset + voxels.size() * bytes, 0);
    ByteWriter w(buf, big_endian);
    w.put<std::int32_t>(0, 348);
    buf[38] = 'r';
    const std::int16_t dim[8] = {3, static_cast<std::int16_t>(ext.w), static_cast<std::int16_t>(ext.h),
                                 static_cast<std::int16_t>(ext.d), 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i) w.put<std::int16_t>(40 + 2 * i, dim[i]);
    w.put<std::int16_t>(70, static_cast<std::int16_t>(opts.datatype));
    w.put<std::int16_t>(72, static_cast<std::int16_t>(nifti_bitpix(opts.datatype)));
    const float pixdim[8] = {1, static_cast<float>(opts.spacing.w), static_cast<float>(opts.spacing.h),
                             static_cast<float>(opts.spacing.d), 1, 1, 1, 1};
    for (int i = 0; i < 8; ++i) w.put<float>(76 + 4 * i, pixdim[i]);
    w.put<float>(108, static_cast<float>(kDataOffset));
    w.put<float>(112, 1.0f);
    w.put<float>(116, 0.0f);
    buf[123] = 2;
    w.put<std::int16_t>(252, 0);
    w.put<std::int16_t>(254, 1);
    std::array<std::array<float, 4>, 3> srow{{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}}};
    if (opts.srow) srow = *opts.srow;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) w.put<float>(280 + 16 * r + 4 * c, srow[r][c]);
    std::memcpy(buf.data() + 344, "n+1\0", 4);

    for (std::size_t i = 0; i < voxels.size(); ++i) {
        const std::size_t off = kDataOffset + i * bytes;
        const double v = voxels[i];
        switch (opts.datatype) {
            case NiftiType::uint8: {
                const double r = std::nearbyint(v);
                if (!(r >= 0 && r <= 255)) throw Error("write_nifti: value " + std::to_string(v) + " outside uint8");
                buf[off] = static_cast<std::uint8_t>(r);
                break;
            }
            case NiftiType::int16: {
                const double r = std::nearbyint(v);
                if (!(r >= -32768 && r <= 32767)) throw Error("write_nifti: value " + std::to_string(v) + " outside int16");
                w.put<std::int16_t>(off, static_cast<std::int16_t>(r));
                break;
            }
            case NiftiType::float32: w.put<float>(off, static_cast<float>(v)); break;
            case NiftiType::float64: w.put<double>(off, v); break;
        }
    }
    return buf;
}

NiftiVolume decode_nifti(const std::vector<std::uint8_t>& bytes, const std::string& source) {
    if (bytes.size() < kHeaderSize) throw Error(source + ": truncated NIfTI header");
    bool big = false;
    if (ByteReader(bytes, false).get<std::int32_t>(0) != 348) {
        if (ByteReader(bytes, true).get<std::int32_t>(0) != 348) throw Error(source + ": sizeof_hdr is not 348");
        big = true;
    }
    const ByteReader r(bytes, big);
    NiftiVolume vol;
    NiftiHeader& h = vol.header;
    h.big_endian = big;
    std::memcpy(h.magic.data(), bytes.data() + 344, 4);
    if (std::memcmp(h.magic.data(), "ni1\0", 4) == 0)
        throw Error(source + ": detached-header NIfTI (ni1) is not supported");
    if (std::memcmp(h.magic.data(), "n+1\0", 4) != 0) throw Error(source + ": bad NIfTI magic");
    for (int i = 0; i < 8; ++i) h.dim[i] = r.get<std::int16_t>(40 + 2 * i);
    const std::int16_t code = r.get<std::int16_t>(70);
    if (!supported(code)) throw Error(source + ": unsupported NIfTI datatype " + std::to_string(code));
    h.datatype = static_cast<NiftiType>(code);
    h.bitpix = r.get<std::int16_t>(72);
    if (h.bitpix != nifti_bitpix(h.datatype)) throw Error(source + ": bitpix does not match datatype");
    for (int i = 0; i < 8; ++i) h.pixdim[i] = r.get<float>(76 + 4 * i);
    h.vox_offset = r.get<float>(108);
    h.scl_slope = r.get<float>(112);
    h.scl_inter = r.get<float>(116);
    h.xyzt_units = bytes[123];
    h.qform_code = r.get<std::int16_t>(252);
    h.sform_code = r.get<std::int16_t>(254);
    for (int c = 0; c < 4; ++c) {
        h.srow_x[c] = r.get<float>(280 + 4 * c);
        h.srow_y[c] = r.get<float>(296 + 4 * c);
        h.srow_z[c] = r.get<float>(312 + 4 * c);
    }
    if (h.dim[0] < 1 || h.dim[0] > 7) throw Error(source + ": dim[0] outside 1..7");
    for (int i = 1; i <= h.dim[0]; ++i) {
        if (h.dim[i] < 1) throw Error(source + ": non-positive extent in dim[" + std::to_string(i) + "]");
        if (i > 3 && h.dim[i] != 1) throw Error(source + ": only 3D volumes are supported");
    }
    auto dim_or_1 = [&](int i) -> std::int64_t { return i <= h.dim[0] ? h.dim[i] : 1; };
    vol.ext = {dim_or_1(3), dim_or_1(2), dim_or_1(1)};
    if (!(h.vox_offset >= kDataOffset)) throw Error(source + ": vox_offset below 352");
    const auto offset = static_cast<std::size_t>(h.vox_offset);
    const int bytes_per = h.bitpix / 8;
    const auto n = static_cast<std::size_t>(vol.ext.voxels());
    if (bytes.size() < offset + n * bytes_per) throw Error(source + ": truncated NIfTI data");
    vol.voxels.resize(n);
    const bool scaled = h.scl_slope != 0 && !(h.scl_slope == 1 && h.scl_inter == 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t off = offset + i * bytes_per;
        double v = 0;
        switch (h.datatype) {
            case NiftiType::uint8: v = bytes[off]; break;
            case NiftiType::int16: v = r.get<std::int16_t>(off); break;
            case NiftiType::float32: v = r.get<float>(off); break;
            case NiftiType::float64: v = r.get<double>(off); break;
        }
        vol.voxels[i] = scaled ? v * static_cast<double>(h.scl_slope) + static_cast<double>(h.scl_inter) : v;
    }
    return vol;
}

void write_nifti(const std::string& path, const std::vector<double>& voxels, const Extents& ext,
                 const NiftiWriteOptions& opts) {
    const auto buf = encode_nifti(voxels, ext, opts);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw Error("write failed for '" + path + "'");
}

NiftiVolume read_nifti(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open NIfTI file '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_nifti(bytes, path);
}

}  // namespace ukan
