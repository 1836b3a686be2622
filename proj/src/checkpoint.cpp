#include "necho/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace necho {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void to_little_endian(char* bytes, std::size_t count) {
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < count; ++i) {
            char* p = bytes + i * sizeof(Scalar);
            for (std::size_t j = 0; j < sizeof(Scalar) / 2; ++j) std::swap(p[j], p[sizeof(Scalar) - 1 - j]);
        }
    } else {
        (void)bytes;
        (void)count;
    }
}

}  // namespace

void save_checkpoint(const ParameterSet& params, const fs::path& dir) {
    fs::create_directories(dir);
    json manifest;
    manifest["format"] = "necho-checkpoint";
    manifest["version"] = 1;
    manifest["dtype"] = "float64";
    manifest["byte_order"] = "little";
    manifest["data_file"] = kDataFile;
    manifest["tensors"] = json::array();

    std::ofstream data(dir / kDataFile, std::ios::binary | std::ios::trunc);
    if (!data) throw std::runtime_error("cannot write " + (dir / kDataFile).string());
    std::uint64_t offset = 0;
    std::vector<char> buffer;
    for (const auto& [name, t] : params.entries()) {
        const auto nbytes = static_cast<std::uint64_t>(t.value().size()) * sizeof(Scalar);
        buffer.resize(nbytes);
        std::memcpy(buffer.data(), t.value().data(), nbytes);
        to_little_endian(buffer.data(), static_cast<std::size_t>(t.value().size()));
        data.write(buffer.data(), static_cast<std::streamsize>(nbytes));
        manifest["tensors"].push_back(
            {{"name", name}, {"shape", {t.rows(), t.cols()}}, {"offset", offset}, {"nbytes", nbytes}});
        offset += nbytes;
    }
    if (!data) throw std::runtime_error("short write to " + (dir / kDataFile).string());

    std::ofstream mf(dir / kManifestFile, std::ios::trunc);
    mf << manifest.dump(2) << "\n";
}

NamedMatrices read_checkpoint(const fs::path& dir) {
    std::ifstream mf(dir / kManifestFile);
    if (!mf) throw std::runtime_error("missing checkpoint manifest in " + dir.string());
    const json manifest = json::parse(mf);
    if (manifest.value("format", "") != "necho-checkpoint" || manifest.value("dtype", "") != "float64")
        throw std::runtime_error("unsupported checkpoint format in " + dir.string());

    std::ifstream data(dir / manifest.value("data_file", std::string(kDataFile)), std::ios::binary);
    if (!data) throw std::runtime_error("missing checkpoint data in " + dir.string());
    const std::string blob((std::istreambuf_iterator<char>(data)), std::istreambuf_iterator<char>());

    NamedMatrices out;
    for (const auto& entry : manifest.at("tensors")) {
        const Index rows = entry.at("shape").at(0).get<Index>();
        const Index cols = entry.at("shape").at(1).get<Index>();
        const auto offset = entry.at("offset").get<std::uint64_t>();
        const auto nbytes = static_cast<std::uint64_t>(rows * cols) * sizeof(Scalar);
        if (offset + nbytes > blob.size())
            throw std::runtime_error("checkpoint tensor " + entry.at("name").get<std::string>() +
                                     " runs past end of data file");
        std::vector<char> bytes(blob.begin() + static_cast<std::ptrdiff_t>(offset),
                                blob.begin() + static_cast<std::ptrdiff_t>(offset + nbytes));
        to_little_endian(bytes.data(), static_cast<std::size_t>(rows * cols));
        Matrix m(rows, cols);
        std::memcpy(m.data(), bytes.data(), nbytes);
        out.emplace_back(entry.at("name").get<std::string>(), std::move(m));
    }
    return out;
}

void load_checkpoint(ParameterSet& params, const fs::path& dir) {
    const NamedMatrices stored = read_checkpoint(dir);
    std::map<std::string, const Matrix*> by_name;
    for (const auto& [name, m] : stored) by_name[name] = &m;

    std::vector<std::string> problems;
    for (const auto& [name, t] : params.entries()) {
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            problems.push_back(name + " (missing)");
            continue;
        }
        if (it->second->rows() != t.rows() || it->second->cols() != t.cols())
            problems.push_back(name + " (checkpoint " +
                               to_string({it->second->rows(), it->second->cols()}) + ", model " +
                               to_string(t.shape()) + ")");
        by_name.erase(it);
    }
    for (const auto& [name, _] : by_name) problems.push_back(name + " (unexpected)");
    if (!problems.empty()) {
        std::ostringstream os;
        os << "checkpoint does not match model:";
        for (const auto& p : problems) os << " " << p << ";";
        throw DimensionError(os.str());
    }
    for (const auto& [name, m] : stored) {
        Tensor t = params.at(name);
        t.mutable_value() = m;
    }
}

}  // namespace necho
