#include "smart/io.hpp"

#include "smart/errors.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace smart {

static_assert(std::endian::native == std::endian::little, "raw file I/O assumes a little-endian host");

namespace {

using nlohmann::json;

std::vector<char> read_bytes(const fs::path& path, std::size_t expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    if (size != expected) {
        throw DataError(path.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                        std::to_string(size));
    }
    in.seekg(0);
    std::vector<char> bytes(size);
    in.read(bytes.data(), static_cast<std::streamsize>(size));
    if (!in) throw DataError("failed to read " + path.string());
    return bytes;
}

void write_bytes(const fs::path& path, const void* data, std::size_t size) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot create " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw DataError("failed to write " + path.string());
}

json read_sidecar(const fs::path& raw) {
    const fs::path side = sidecar_path(raw);
    try {
        return json::parse(read_text(side));
    } catch (const json::exception& e) {
        throw DataError(side.string() + ": " + e.what());
    }
}

template <class T>
T field(const json& j, const char* key, const fs::path& raw) {
    if (!j.contains(key)) throw DataError(sidecar_path(raw).string() + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw DataError(sidecar_path(raw).string() + ": field '" + key + "': " + e.what());
    }
}

void expect_dtype(const json& j, const char* want, const fs::path& raw) {
    const auto dtype = field<std::string>(j, "dtype", raw);
    if (dtype != want) throw DataError(sidecar_path(raw).string() + ": dtype '" + dtype + "' is not " + want);
}

Grid grid_from_tail(const std::vector<long>& dims, std::size_t offset, const fs::path& raw) {
    if (dims.size() != offset + 3) throw DataError(sidecar_path(raw).string() + ": unexpected number of dims");
    Grid g{static_cast<int>(dims[offset + 2]), static_cast<int>(dims[offset + 1]), static_cast<int>(dims[offset])};
    if (g.nx < 1 || g.ny < 1 || g.nz < 1) throw DataError(sidecar_path(raw).string() + ": dims must be positive");
    return g;
}

std::vector<float> to_floats(const CMatrix& m) {
    std::vector<float> out(static_cast<std::size_t>(m.size()) * 2);
    const Complex* p = m.data();
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        out[static_cast<std::size_t>(2 * i)] = static_cast<float>(p[i].real());
        out[static_cast<std::size_t>(2 * i + 1)] = static_cast<float>(p[i].imag());
    }
    return out;
}

CMatrix from_floats(const std::vector<char>& bytes, Eigen::Index rows, Eigen::Index cols) {
    CMatrix m(rows, cols);
    const auto n = static_cast<std::size_t>(rows * cols);
    std::vector<float> f(2 * n);
    std::memcpy(f.data(), bytes.data(), bytes.size());
    Complex* p = m.data();
    for (std::size_t i = 0; i < n; ++i) p[i] = Complex(f[2 * i], f[2 * i + 1]);
    return m;
}

} // namespace

fs::path sidecar_path(const fs::path& raw) { return fs::path(raw.string() + ".json"); }

void write_text(const fs::path& path, const std::string& text) { write_bytes(path, text.data(), text.size()); }

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_series(const fs::path& path, const ImageSeries& x) {
    const Grid& g = x.grid();
    const auto f = to_floats(x.data());
    write_bytes(path, f.data(), f.size() * sizeof(float));
    json j;
    j["dims"] = {x.n_tsl(), g.nz, g.ny, g.nx};
    j["tsl_ms"] = x.tsl_ms();
    j["dtype"] = "c64le";
    j["order"] = "C order over dims; x varies fastest";
    write_text(sidecar_path(path), j.dump(2));
}

ImageSeries read_series(const fs::path& path) {
    const json j = read_sidecar(path);
    expect_dtype(j, "c64le", path);
    const auto dims = field<std::vector<long>>(j, "dims", path);
    const Grid g = grid_from_tail(dims, 1, path);
    const auto tsl = field<std::vector<double>>(j, "tsl_ms", path);
    if (static_cast<long>(tsl.size()) != dims[0]) throw DataError(sidecar_path(path).string() + ": tsl_ms length does not match dims");
    const auto bytes = read_bytes(path, static_cast<std::size_t>(g.voxels()) * tsl.size() * 2 * sizeof(float));
    return ImageSeries(g, tsl, from_floats(bytes, g.voxels(), static_cast<Eigen::Index>(tsl.size())));
}

void write_kspace(const fs::path& path, const KSpaceData& y) {
    const Grid& g = y.grid;
    const auto f = to_floats(y.data);
    write_bytes(path, f.data(), f.size() * sizeof(float));
    json j;
    j["dims"] = {y.n_tsl, y.n_coils, g.nz, g.ny, g.nx};
    j["dtype"] = "c64le";
    j["order"] = "C order over dims; x varies fastest; FFT-native k-space layout";
    write_text(sidecar_path(path), j.dump(2));
}

KSpaceData read_kspace(const fs::path& path, const SamplingMask& mask) {
    const json j = read_sidecar(path);
    expect_dtype(j, "c64le", path);
    const auto dims = field<std::vector<long>>(j, "dims", path);
    if (dims.size() != 5) throw DataError(sidecar_path(path).string() + ": k-space dims must have 5 entries");
    KSpaceData y;
    y.grid = grid_from_tail(dims, 2, path);
    y.n_tsl = static_cast<int>(dims[0]);
    y.n_coils = static_cast<int>(dims[1]);
    if (y.n_tsl < 1 || y.n_coils < 1) throw DataError(sidecar_path(path).string() + ": dims must be positive");
    if (!(mask.grid == y.grid) || mask.n_tsl != y.n_tsl) throw DataError(path.string() + ": mask does not match the k-space dims");
    const auto cols = static_cast<Eigen::Index>(y.n_tsl) * y.n_coils;
    const auto bytes = read_bytes(path, static_cast<std::size_t>(y.grid.voxels() * cols) * 2 * sizeof(float));
    y.data = from_floats(bytes, y.grid.voxels(), cols);
    y.mask = mask;
    return y;
}

void write_mask(const fs::path& path, const SamplingMask& mask) {
    write_bytes(path, mask.bits.data(), mask.bits.size());
    json j;
    j["dims"] = {mask.n_tsl, mask.grid.nz, mask.grid.ny, mask.grid.nx};
    j["dtype"] = "u8";
    j["R_requested"] = mask.r_requested;
    j["R_achieved"] = mask.r_achieved();
    j["seed"] = mask.seed;
    j["pattern"] = mask.pattern;
    j["center"] = mask.center;
    write_text(sidecar_path(path), j.dump(2));
}

SamplingMask read_mask(const fs::path& path) {
    const json j = read_sidecar(path);
    const auto dims = field<std::vector<long>>(j, "dims", path);
    SamplingMask m;
    m.grid = grid_from_tail(dims, 1, path);
    m.n_tsl = static_cast<int>(dims[0]);
    if (m.n_tsl < 1) throw DataError(sidecar_path(path).string() + ": dims must be positive");
    m.r_requested = field<double>(j, "R_requested", path);
    m.seed = field<std::uint64_t>(j, "seed", path);
    if (j.contains("pattern")) m.pattern = field<std::string>(j, "pattern", path);
    if (j.contains("center")) m.center = field<double>(j, "center", path);
    const auto bytes = read_bytes(path, static_cast<std::size_t>(m.grid.voxels()) * static_cast<std::size_t>(m.n_tsl));
    m.bits.assign(bytes.begin(), bytes.end());
    for (auto& b : m.bits) {
        if (b > 1) throw DataError(path.string() + ": mask entries must be 0 or 1");
    }
    return m;
}

void write_map(const fs::path& path, const RealImage& map, const std::string& units) {
    std::vector<float> f(map.data.begin(), map.data.end());
    write_bytes(path, f.data(), f.size() * sizeof(float));
    json j;
    j["dims"] = {map.grid.nz, map.grid.ny, map.grid.nx};
    j["dtype"] = "f32le";
    j["units"] = units;
    write_text(sidecar_path(path), j.dump(2));
}

RealImage read_map(const fs::path& path) {
    const json j = read_sidecar(path);
    expect_dtype(j, "f32le", path);
    const Grid g = grid_from_tail(field<std::vector<long>>(j, "dims", path), 0, path);
    const auto bytes = read_bytes(path, static_cast<std::size_t>(g.voxels()) * sizeof(float));
    std::vector<float> f(static_cast<std::size_t>(g.voxels()));
    std::memcpy(f.data(), bytes.data(), bytes.size());
    return RealImage(g, std::vector<double>(f.begin(), f.end()));
}

void write_labels(const fs::path& path, const std::vector<int>& labels, const Grid& grid) {
    if (static_cast<Eigen::Index>(labels.size()) != grid.voxels()) throw DataError("write_labels: size mismatch");
    std::vector<std::uint16_t> out(labels.size());
    for (std::size_t v = 0; v < labels.size(); ++v) out[v] = labels[v] < 0 ? 65535 : static_cast<std::uint16_t>(labels[v]);
    write_bytes(path, out.data(), out.size() * sizeof(std::uint16_t));
    json j;
    j["dims"] = {grid.nz, grid.ny, grid.nx};
    j["dtype"] = "u16le";
    j["background"] = 65535;
    write_text(sidecar_path(path), j.dump(2));
}

} // namespace smart
