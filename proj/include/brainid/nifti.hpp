#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "brainid/volume.hpp"

namespace brainid::nifti {

enum class Datatype : std::int16_t {
    UInt8 = 2,
    Int16 = 4,
    Float32 = 16,
};

int bits_per_voxel(Datatype dt);

inline constexpr int kHeaderSize = 348;
inline constexpr int kVoxOffset = 352;
inline constexpr std::int16_t kIntentVector = 1007;

// Header fields this subset reads and writes. Byte offsets follow NIfTI-1.
struct Header {
    std::int32_t sizeof_hdr = kHeaderSize;
    std::array<std::int16_t, 8> dim{};
    float intent_p1 = 0, intent_p2 = 0, intent_p3 = 0;
    std::int16_t intent_code = 0;
    std::int16_t datatype = 0;
    std::int16_t bitpix = 0;
    std::array<float, 8> pixdim{};
    float vox_offset = kVoxOffset;
    float scl_slope = 1.0f;
    float scl_inter = 0.0f;
    std::uint8_t xyzt_units = 2;
    std::int16_t qform_code = 0;
    std::int16_t sform_code = 1;
    std::array<float, 4> srow_x{}, srow_y{}, srow_z{};
    std::array<char, 4> magic{'n', '+', '1', '\0'};
    bool big_endian = false;
};

// Decoded image: scaled voxel values, x-fastest, channels outermost.
struct Image {
    Header header;
    Geometry geometry;
    int channels = 1;
    std::vector<double> data;
};

// Parses a single-file NIfTI-1 byte stream (optionally gzip-wrapped). Accepts dim[0] of 3, 4
// or 5 (the latter two as channel stacks); read_nifti() below restricts to 3.
Image decode(std::span<const std::uint8_t> bytes);

// Volume for float data or scaled integers, LabelMap for unscaled integer datatypes.
std::variant<Volume, LabelMap> read_nifti(std::span<const std::uint8_t> bytes);
Volume read_volume(std::span<const std::uint8_t> bytes);
LabelMap read_labels(std::span<const std::uint8_t> bytes);
VolumeStack read_stack(std::span<const std::uint8_t> bytes);

// 348-byte header, 4 zero pad bytes, data at 352, little-endian, slope 1, sform_code 1.
// Integer datatypes round to nearest and clamp to the type's range.
std::vector<std::uint8_t> write_nifti(const Volume& v, Datatype dt = Datatype::Float32);
std::vector<std::uint8_t> write_nifti(const LabelMap& lm, Datatype dt = Datatype::Int16);

// Multi-channel: dim[0]=4 (channels along t) by default; vector layout uses dim[0]=5,
// dim[4]=1, dim[5]=channels and intent_code 1007.
enum class StackLayout { Series, Vector };
std::vector<std::uint8_t> write_nifti(const VolumeStack& s, StackLayout layout = StackLayout::Series,
                                      Datatype dt = Datatype::Float32);

bool is_gzip(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> gzip(std::span<const std::uint8_t> bytes);

// File helpers; a ".gz" suffix gzips on write. I/O failures throw ErrorCode::Io naming the path.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void save(const std::filesystem::path& path, std::span<const std::uint8_t> nifti_bytes);

} // namespace brainid::nifti
