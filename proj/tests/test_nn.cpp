#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "necho/checkpoint.hpp"
#include "necho/nn.hpp"

using namespace necho;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("necho_test_" + name);
    fs::remove_all(p);
    return p;
}

ParameterSet small_set(std::uint64_t seed) {
    ParameterSet ps;
    Initializer init(seed);
    Linear(ps, "a", 3, 4, init);
    LayerNorm(ps, "ln", 4);
    Conv1d(ps, "conv", 2, 4, 5, init);
    ps.create("table", init.normal(7, 3));
    return ps;
}

}  // namespace

TEST_CASE("parameter names are unique and ordered") {
    ParameterSet ps = small_set(1);
    CHECK(ps.size() == 7);
    CHECK(ps.entries().front().first == "a.weight");
    CHECK(ps.contains("conv.kernels"));
    CHECK(ps.at("conv.kernels").shape() == Shape{8, 5});
    CHECK_THROWS(ps.create("a.weight", Matrix::Zero(1, 1)));
    CHECK(ps.scalar_count() == 3 * 4 + 4 + 4 + 4 + 8 * 5 + 5 + 7 * 3);
}

TEST_CASE("initialisation follows the documented scheme") {
    Initializer init(3);
    ParameterSet ps;
    Linear lin(ps, "lin", 100, 50, init);
    const Scalar bound = 1.0 / std::sqrt(100.0);
    CHECK(lin.weight.value().cwiseAbs().maxCoeff() <= bound);
    CHECK(lin.bias.value() == Matrix::Zero(1, 50));
    const Matrix emb = init.normal(200, 50);
    const Scalar mean = emb.mean();
    const Scalar sd = std::sqrt((emb.array() - mean).square().mean());
    CHECK(std::abs(mean) < 0.002);
    CHECK(std::abs(sd - 0.02) < 0.002);
}

TEST_CASE("snapshot and restore") {
    ParameterSet ps = small_set(2);
    const auto snap = ps.snapshot();
    Tensor w = ps.at("a.weight");
    w.mutable_value().setConstant(9.0);
    ps.restore(snap);
    CHECK(ps.at("a.weight").value() == snap[0]);
}

TEST_CASE("checkpoint round trip is bit exact") {
    const fs::path dir = scratch("ckpt");
    ParameterSet src = small_set(4);
    Tensor t = src.at("table");
    t.mutable_value()(0, 0) = -0.0;
    t.mutable_value()(0, 1) = 1e-310;  // subnormal
    t.mutable_value()(0, 2) = std::nextafter(1.0, 2.0);
    save_checkpoint(src, dir);

    ParameterSet dst = small_set(5);
    load_checkpoint(dst, dir);
    for (std::size_t i = 0; i < src.size(); ++i) {
        const Matrix& a = src.entries()[i].second.value();
        const Matrix& b = dst.entries()[i].second.value();
        REQUIRE(a.size() == b.size());
        CHECK(std::memcmp(a.data(), b.data(), sizeof(Scalar) * static_cast<std::size_t>(a.size())) == 0);
    }
    fs::remove_all(dir);
}

TEST_CASE("checkpoint manifest lists names, shapes and offsets") {
    const fs::path dir = scratch("manifest");
    ParameterSet ps = small_set(6);
    save_checkpoint(ps, dir);
    std::ifstream in(dir / kManifestFile);
    const auto j = nlohmann::json::parse(in);
    CHECK(j["dtype"] == "float64");
    CHECK(j["byte_order"] == "little");
    REQUIRE(j["tensors"].size() == ps.size());
    std::size_t offset = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto& e = j["tensors"][i];
        CHECK(e["name"] == ps.entries()[i].first);
        CHECK(e["offset"].get<std::size_t>() == offset);
        CHECK(e["shape"][0].get<Index>() == ps.entries()[i].second.rows());
        offset += e["nbytes"].get<std::size_t>();
    }
    CHECK(fs::file_size(dir / kDataFile) == offset);
    fs::remove_all(dir);
}

TEST_CASE("loading into a different architecture lists every offending parameter") {
    const fs::path dir = scratch("mismatch");
    save_checkpoint(small_set(7), dir);
    ParameterSet other;
    Initializer init(1);
    Linear(other, "a", 3, 6, init);  // wrong shape
    other.create("extra", Matrix::Zero(1, 1));
    try {
        load_checkpoint(other, dir);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("a.weight") != std::string::npos);
        CHECK(msg.find("extra") != std::string::npos);
        CHECK(msg.find("table") != std::string::npos);
    }
    fs::remove_all(dir);
}
