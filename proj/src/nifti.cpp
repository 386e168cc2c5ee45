#include "brainid/nifti.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <zlib.h>

#include "brainid/error.hpp"

namespace brainid::nifti {

namespace {

template <typename T>
T byteswap_value(T v)
{
    std::array<std::uint8_t, sizeof(T)> b;
    std::memcpy(b.data(), &v, sizeof(T));
    std::reverse(b.begin(), b.end());
    std::memcpy(&v, b.data(), sizeof(T));
    return v;
}

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, bool big_endian) : bytes_(bytes), big_(big_endian) {}

    template <typename T>
    T get(std::size_t offset) const
    {
        T v;
        std::memcpy(&v, bytes_.data() + offset, sizeof(T));
        const bool host_big = std::endian::native == std::endian::big;
        return big_ != host_big ? byteswap_value(v) : v;
    }

private:
    std::span<const std::uint8_t> bytes_;
    bool big_;
};

template <typename T>
void put(std::vector<std::uint8_t>& buf, std::size_t offset, T v)
{
    if constexpr (std::endian::native == std::endian::big)
        v = byteswap_value(v);
    std::memcpy(buf.data() + offset, &v, sizeof(T));
}

Datatype checked_datatype(std::int16_t code)
{
    switch (code) {
    case 2: return Datatype::UInt8;
    case 4: return Datatype::Int16;
    case 16: return Datatype::Float32;
    default:
        throw Error(ErrorCode::UnsupportedDatatype, "datatype code " + std::to_string(code) +
                                                        " (supported: 2 uint8, 4 int16, 16 float32)");
    }
}

Header parse_header(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < static_cast<std::size_t>(kVoxOffset))
        throw Error(ErrorCode::TruncatedData, "stream of " + std::to_string(bytes.size()) +
                                                  " bytes is shorter than the 352-byte header block");
    Header h;
    const Reader le(bytes, false);
    const Reader be(bytes, true);
    if (le.get<std::int32_t>(0) == kHeaderSize)
        h.big_endian = false;
    else if (be.get<std::int32_t>(0) == kHeaderSize)
        h.big_endian = true;
    else
        throw Error(ErrorCode::BadHeader, "sizeof_hdr is not 348 in either byte order");
    const Reader& r = h.big_endian ? be : le;

    std::memcpy(h.magic.data(), bytes.data() + 344, 4);
    if (std::memcmp(h.magic.data(), "n+1\0", 4) != 0)
        throw Error(ErrorCode::BadMagic, "magic field is not \"n+1\\0\" (two-file .hdr/.img form is unsupported)");

    for (int i = 0; i < 8; ++i)
        h.dim[i] = r.get<std::int16_t>(40 + 2 * i);
    h.intent_p1 = r.get<float>(56);
    h.intent_p2 = r.get<float>(60);
    h.intent_p3 = r.get<float>(64);
    h.intent_code = r.get<std::int16_t>(68);
    h.datatype = r.get<std::int16_t>(70);
    h.bitpix = r.get<std::int16_t>(72);
    for (int i = 0; i < 8; ++i)
        h.pixdim[i] = r.get<float>(76 + 4 * i);
    h.vox_offset = r.get<float>(108);
    h.scl_slope = r.get<float>(112);
    h.scl_inter = r.get<float>(116);
    h.xyzt_units = bytes[123];
    h.qform_code = r.get<std::int16_t>(252);
    h.sform_code = r.get<std::int16_t>(254);
    for (int i = 0; i < 4; ++i) {
        h.srow_x[i] = r.get<float>(280 + 4 * i);
        h.srow_y[i] = r.get<float>(296 + 4 * i);
        h.srow_z[i] = r.get<float>(312 + 4 * i);
    }

    const Datatype dt = checked_datatype(h.datatype);
    if (h.bitpix != bits_per_voxel(dt))
        throw Error(ErrorCode::BadHeader, "bitpix " + std::to_string(h.bitpix) + " inconsistent with datatype " +
                                              std::to_string(h.datatype));
    if (h.dim[0] < 3 || h.dim[0] > 5)
        throw Error(ErrorCode::BadHeader, "dim[0] = " + std::to_string(h.dim[0]) + " (expected 3)");
    for (int i = 1; i <= h.dim[0]; ++i)
        if (h.dim[i] < 1)
            throw Error(ErrorCode::BadHeader, "dim[" + std::to_string(i) + "] = " + std::to_string(h.dim[i]));
    if (h.dim[0] == 5 && h.dim[4] != 1)
        throw Error(ErrorCode::BadHeader, "dim[4] must be 1 for vector-valued images");
    for (int i = 1; i <= 3; ++i)
        if (!(h.pixdim[i] > 0.0f))
            throw Error(ErrorCode::NonPositivePixdim, "pixdim[" + std::to_string(i) + "] = " + std::to_string(h.pixdim[i]));
    if (!(h.vox_offset >= static_cast<float>(kVoxOffset)))
        throw Error(ErrorCode::BadHeader, "vox_offset " + std::to_string(h.vox_offset) + " below 352");
    return h;
}

} // namespace

int bits_per_voxel(Datatype dt)
{
    switch (dt) {
    case Datatype::UInt8: return 8;
    case Datatype::Int16: return 16;
    case Datatype::Float32: return 32;
    }
    return 0;
}

bool is_gzip(std::span<const std::uint8_t> bytes)
{
    return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

std::vector<std::uint8_t> gunzip(std::span<const std::uint8_t> bytes)
{
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 32) != Z_OK)
        throw Error(ErrorCode::Io, "inflateInit2 failed");
    zs.next_in = const_cast<Bytef*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());
    std::vector<std::uint8_t> out;
    std::array<std::uint8_t, 1 << 16> chunk;
    int ret = Z_OK;
    while (ret != Z_STREAM_END) {
        zs.next_out = chunk.data();
        zs.avail_out = static_cast<uInt>(chunk.size());
        ret = inflate(&zs, Z_NO_FLUSH);
        if (ret != Z_OK && ret != Z_STREAM_END) {
            inflateEnd(&zs);
            throw Error(ErrorCode::TruncatedData, "gzip stream is corrupt or truncated");
        }
        out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
        if (ret == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            throw Error(ErrorCode::TruncatedData, "gzip stream ended early");
        }
    }
    inflateEnd(&zs);
    return out;
}

std::vector<std::uint8_t> gzip(std::span<const std::uint8_t> bytes)
{
    z_stream zs{};
    if (deflateInit2(&zs, 6, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw Error(ErrorCode::Io, "deflateInit2 failed");
    std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(bytes.size())));
    zs.next_in = const_cast<Bytef*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int ret = deflate(&zs, Z_FINISH);
    deflateEnd(&zs);
    if (ret != Z_STREAM_END)
        throw Error(ErrorCode::Io, "deflate failed");
    out.resize(zs.total_out);
    return out;
}

Image decode(std::span<const std::uint8_t> raw)
{
    std::vector<std::uint8_t> inflated;
    std::span<const std::uint8_t> bytes = raw;
    if (is_gzip(raw)) {
        inflated = gunzip(raw);
        bytes = inflated;
    }

    Image img;
    img.header = parse_header(bytes);
    const Header& h = img.header;
    const Datatype dt = checked_datatype(h.datatype);

    img.geometry.dims = {h.dim[1], h.dim[2], h.dim[3]};
    img.geometry.spacing = {h.pixdim[1], h.pixdim[2], h.pixdim[3]};
    img.geometry.grid_to_world = Mat4::Identity();
    if (h.sform_code > 0) {
        for (int c = 0; c < 4; ++c) {
            img.geometry.grid_to_world(0, c) = h.srow_x[c];
            img.geometry.grid_to_world(1, c) = h.srow_y[c];
            img.geometry.grid_to_world(2, c) = h.srow_z[c];
        }
    } else {
        for (int a = 0; a < 3; ++a)
            img.geometry.grid_to_world(a, a) = h.pixdim[a + 1];
    }
    if (std::abs(img.geometry.grid_to_world.topLeftCorner<3, 3>().determinant()) <= 1e-12)
        throw Error(ErrorCode::BadHeader, "srow_x/srow_y/srow_z describe a singular affine");

    if (h.dim[0] == 4)
        img.channels = h.dim[4];
    else if (h.dim[0] == 5)
        img.channels = h.dim[5];

    const std::size_t voxels = img.geometry.voxel_count() * static_cast<std::size_t>(img.channels);
    const std::size_t width = static_cast<std::size_t>(bits_per_voxel(dt) / 8);
    const auto offset = static_cast<std::size_t>(h.vox_offset);
    if (bytes.size() < offset + voxels * width)
        throw Error(ErrorCode::TruncatedData, "data section holds " +
                                                  std::to_string(bytes.size() > offset ? bytes.size() - offset : 0) +
                                                  " bytes, dim[] requires " + std::to_string(voxels * width));

    const double slope = h.scl_slope == 0.0f || !std::isfinite(h.scl_slope) ? 1.0 : h.scl_slope;
    const double inter = std::isfinite(h.scl_inter) ? h.scl_inter : 0.0;
    const Reader r(bytes, h.big_endian);
    img.data.resize(voxels);
    for (std::size_t i = 0; i < voxels; ++i) {
        const std::size_t at = offset + i * width;
        double raw_value = 0.0;
        switch (dt) {
        case Datatype::UInt8: raw_value = bytes[at]; break;
        case Datatype::Int16: raw_value = r.get<std::int16_t>(at); break;
        case Datatype::Float32: raw_value = r.get<float>(at); break;
        }
        img.data[i] = slope == 1.0 && inter == 0.0 ? raw_value : raw_value * slope + inter;
    }
    return img;
}

namespace {

void require_3d(const Image& img)
{
    if (img.header.dim[0] != 3)
        throw Error(ErrorCode::BadHeader, "dim[0] = " + std::to_string(img.header.dim[0]) + ", expected a 3D volume");
}

LabelMap to_labels(const Image& img)
{
    std::vector<std::int32_t> labels(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double v = img.data[i];
        if (v < 0.0 || v != std::floor(v) || v > std::numeric_limits<std::int32_t>::max())
            throw Error(ErrorCode::InvalidArgument, "voxel " + std::to_string(i) + " holds non-label value " +
                                                        std::to_string(v));
        labels[i] = static_cast<std::int32_t>(v);
    }
    return LabelMap(img.geometry, std::move(labels));
}

} // namespace

std::variant<Volume, LabelMap> read_nifti(std::span<const std::uint8_t> bytes)
{
    Image img = decode(bytes);
    require_3d(img);
    const bool integer_type = img.header.datatype != static_cast<std::int16_t>(Datatype::Float32);
    const bool unscaled = (img.header.scl_slope == 0.0f || img.header.scl_slope == 1.0f) && img.header.scl_inter == 0.0f;
    if (integer_type && unscaled &&
        std::all_of(img.data.begin(), img.data.end(), [](double v) { return v >= 0.0; }))
        return to_labels(img);
    return Volume(img.geometry, std::move(img.data));
}

Volume read_volume(std::span<const std::uint8_t> bytes)
{
    Image img = decode(bytes);
    require_3d(img);
    return Volume(img.geometry, std::move(img.data));
}

LabelMap read_labels(std::span<const std::uint8_t> bytes)
{
    const Image img = decode(bytes);
    require_3d(img);
    return to_labels(img);
}

VolumeStack read_stack(std::span<const std::uint8_t> bytes)
{
    const Image img = decode(bytes);
    const std::size_t n = img.geometry.voxel_count();
    std::vector<Volume> channels;
    channels.reserve(static_cast<std::size_t>(img.channels));
    for (int c = 0; c < img.channels; ++c) {
        const auto first = img.data.begin() + static_cast<std::ptrdiff_t>(c * n);
        channels.emplace_back(img.geometry, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(n)));
    }
    return VolumeStack(std::move(channels));
}

namespace {

std::vector<std::uint8_t> encode(const Geometry& g, std::span<const double> values, int channels,
                                 StackLayout layout, Datatype dt)
{
    const std::size_t width = static_cast<std::size_t>(bits_per_voxel(dt) / 8);
    if (width == 0)
        throw Error(ErrorCode::UnsupportedDatatype, "datatype code " + std::to_string(static_cast<int>(dt)));
    for (int a = 0; a < 3; ++a)
        if (g.dims[a] > std::numeric_limits<std::int16_t>::max())
            throw Error(ErrorCode::InvalidArgument, "dimension exceeds the NIfTI-1 int16 limit");

    std::vector<std::uint8_t> buf(kVoxOffset + values.size() * width, 0);
    put<std::int32_t>(buf, 0, kHeaderSize);

    std::array<std::int16_t, 8> dim{};
    dim.fill(1);
    dim[0] = 3;
    dim[1] = static_cast<std::int16_t>(g.dims[0]);
    dim[2] = static_cast<std::int16_t>(g.dims[1]);
    dim[3] = static_cast<std::int16_t>(g.dims[2]);
    std::int16_t intent = 0;
    if (channels > 1 || layout == StackLayout::Vector) {
        if (layout == StackLayout::Vector) {
            dim[0] = 5;
            dim[5] = static_cast<std::int16_t>(channels);
            intent = kIntentVector;
        } else {
            dim[0] = 4;
            dim[4] = static_cast<std::int16_t>(channels);
        }
    }
    for (int i = 0; i < 8; ++i)
        put<std::int16_t>(buf, 40 + 2 * i, dim[i]);
    put<std::int16_t>(buf, 68, intent);
    put<std::int16_t>(buf, 70, static_cast<std::int16_t>(dt));
    put<std::int16_t>(buf, 72, static_cast<std::int16_t>(bits_per_voxel(dt)));

    std::array<float, 8> pixdim{};
    pixdim.fill(1.0f);
    pixdim[0] = 1.0f; // qfac
    for (int a = 0; a < 3; ++a)
        pixdim[a + 1] = static_cast<float>(g.spacing[a]);
    for (int i = 0; i < 8; ++i)
        put<float>(buf, 76 + 4 * i, pixdim[i]);
    put<float>(buf, 108, static_cast<float>(kVoxOffset));
    put<float>(buf, 112, 1.0f);
    put<float>(buf, 116, 0.0f);
    buf[123] = 2; // mm
    const char descrip[] = "brainid";
    std::memcpy(buf.data() + 148, descrip, sizeof(descrip) - 1);
    put<std::int16_t>(buf, 252, 0);
    put<std::int16_t>(buf, 254, 1);
    for (int c = 0; c < 4; ++c) {
        put<float>(buf, 280 + 4 * c, static_cast<float>(g.grid_to_world(0, c)));
        put<float>(buf, 296 + 4 * c, static_cast<float>(g.grid_to_world(1, c)));
        put<float>(buf, 312 + 4 * c, static_cast<float>(g.grid_to_world(2, c)));
    }
    std::memcpy(buf.data() + 344, "n+1\0", 4);

    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::size_t at = kVoxOffset + i * width;
        const double v = values[i];
        switch (dt) {
        case Datatype::UInt8:
            buf[at] = static_cast<std::uint8_t>(std::clamp(std::round(std::isfinite(v) ? v : 0.0), 0.0, 255.0));
            break;
        case Datatype::Int16:
            put<std::int16_t>(buf, at, static_cast<std::int16_t>(
                                           std::clamp(std::round(std::isfinite(v) ? v : 0.0), -32768.0, 32767.0)));
            break;
        case Datatype::Float32:
            put<float>(buf, at, static_cast<float>(v));
            break;
        }
    }
    return buf;
}

} // namespace

std::vector<std::uint8_t> write_nifti(const Volume& v, Datatype dt)
{
    return encode(v.geometry(), v.data(), 1, StackLayout::Series, dt);
}

std::vector<std::uint8_t> write_nifti(const LabelMap& lm, Datatype dt)
{
    std::vector<double> values(lm.data().begin(), lm.data().end());
    return encode(lm.geometry(), values, 1, StackLayout::Series, dt);
}

std::vector<std::uint8_t> write_nifti(const VolumeStack& s, StackLayout layout, Datatype dt)
{
    std::vector<double> values;
    values.reserve(s.channel_count() * s.geometry().voxel_count());
    for (const auto& ch : s.channels())
        values.insert(values.end(), ch.data().begin(), ch.data().end());
    return encode(s.geometry(), values, static_cast<int>(s.channel_count()), layout, dt);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw Error(ErrorCode::Io, "short write to " + path.string());
}

void save(const std::filesystem::path& path, std::span<const std::uint8_t> nifti_bytes)
{
    if (path.extension() == ".gz")
        write_file(path, gzip(nifti_bytes));
    else
        write_file(path, nifti_bytes);
}

} // namespace brainid::nifti
