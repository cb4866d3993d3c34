#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <unistd.h>

#include "fdelab/io.hpp"
#include "fdelab/random_fields.hpp"

using namespace fdelab;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("fdelab_io_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path dir_;
};

Field random_field(const GridPtr& g, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    return random_mode_direction(g, rng) + smooth_positive_field(g, rng);
}

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::IoFailure;
}

}  // namespace

TEST_F(IoTest, FieldRoundTripIsBitIdentical) {
    for (const auto& d : {GridDescriptor::interval(0.0, 1.0, 33), GridDescriptor::radial(3, 0.0, 2.0, 40),
                          GridDescriptor::polar2d(1.0, 1.5, 12, 16)}) {
        const auto g = build_grid(d);
        const Field f = random_field(g, 4);
        io::write_field(dir_ / "f.bin", f, 0.125);
        const auto dump = io::read_field(dir_ / "f.bin");
        EXPECT_EQ(dump.grid, d);
        EXPECT_EQ(dump.time, 0.125);
        ASSERT_EQ(dump.values.size(), f.size());
        EXPECT_EQ(std::memcmp(dump.values.data(), f.values().data(), f.size() * sizeof(double)), 0);

        double t = 0.0;
        const Field typed = io::read_field(dir_ / "f.bin", g, &t);
        EXPECT_EQ(t, 0.125);
        EXPECT_EQ(std::memcmp(typed.values().data(), f.values().data(), f.size() * sizeof(double)), 0);
    }
}

TEST_F(IoTest, CorruptMagicIsRejected) {
    const auto g = build_grid(GridDescriptor::interval(0.0, 1.0, 16));
    io::write_field(dir_ / "f.bin", random_field(g, 1));
    {
        std::fstream f(dir_ / "f.bin", std::ios::in | std::ios::out | std::ios::binary);
        f.write("XXXX", 4);
    }
    EXPECT_EQ(code_of([&] { io::read_field(dir_ / "f.bin"); }), ErrorCode::BadMagic);
}

TEST_F(IoTest, TruncatedFileIsRejected) {
    const auto g = build_grid(GridDescriptor::interval(0.0, 1.0, 16));
    io::write_field(dir_ / "f.bin", random_field(g, 1));
    fs::resize_file(dir_ / "f.bin", fs::file_size(dir_ / "f.bin") - 8);
    EXPECT_EQ(code_of([&] { io::read_field(dir_ / "f.bin"); }), ErrorCode::TruncatedFile);
    fs::resize_file(dir_ / "f.bin", 10);
    EXPECT_EQ(code_of([&] { io::read_field(dir_ / "f.bin"); }), ErrorCode::TruncatedFile);
}

TEST_F(IoTest, TypedReadNeedsMatchingDescriptor) {
    const auto coarse = build_grid(GridDescriptor::interval(0.0, 1.0, 16));
    const auto fine = build_grid(GridDescriptor::interval(0.0, 1.0, 32));
    io::write_field(dir_ / "f.bin", random_field(coarse, 1));
    EXPECT_EQ(code_of([&] { io::read_field(dir_ / "f.bin", fine); }), ErrorCode::DescriptorMismatch);
}

TEST_F(IoTest, MissingFileIsIoFailure) {
    EXPECT_EQ(code_of([&] { io::read_field(dir_ / "nope.bin"); }), ErrorCode::IoFailure);
}

TEST_F(IoTest, CsvHeadersAreFixed) {
    const FdeParams p(3.0, 1);
    const auto g = build_grid(GridDescriptor::interval(0.0, 1.0, 32));
    Rng rng = make_rng(2);
    const Field u0 = smooth_positive_field(g, rng);
    const auto [traj, est] = evolve_fde(u0, p, EvolutionConfig::physical());
    io::write_monitors_csv(dir_ / "m.csv", traj);
    EXPECT_EQ(first_line(dir_ / "m.csv"), "t,J,R,h10,lm,linf");

    const auto rt = evolve_rescaled(u0, 0.2, p, EvolutionConfig::fixed_step(0.05));
    io::write_rescaled_csv(dir_ / "r.csv", rt);
    EXPECT_EQ(first_line(dir_ / "r.csv"), "s,J,R,h10,lm,linf,dissipation,Jprime_hminus1");

    io::write_field_csv(dir_ / "f.csv", u0);
    EXPECT_EQ(first_line(dir_ / "f.csv"), "index,r,theta,value");

    std::ifstream in(dir_ / "r.csv");
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    EXPECT_EQ(rows, rt.s_times.size() + 1);
}

TEST_F(IoTest, GridDescriptorJsonRoundTrip) {
    for (const auto& d : {GridDescriptor::interval(0.5, 2.0, 20), GridDescriptor::radial(4, 1.0, 3.0, 20),
                          GridDescriptor::polar2d(1.0, 1.1, 32, 128)})
        EXPECT_EQ(io::grid_from_json(io::to_json(d)), d);
    EXPECT_THROW(io::grid_from_json(nlohmann::json{{"shape", "torus"}}), Error);
}

TEST_F(IoTest, ProfileSidecarCarriesDiagnostics) {
    const FdeParams p(3.0, 1);
    const auto g = build_grid(GridDescriptor::interval(0.0, 1.0, 32));
    const auto phi = minimize_rayleigh(p, g, default_initializer(g));
    io::write_profile(dir_ / "phi", phi);
    EXPECT_TRUE(fs::exists(dir_ / "phi.bin"));
    std::ifstream in(dir_ / "phi.json");
    const auto j = nlohmann::json::parse(in);
    EXPECT_EQ(j.at("method"), "rayleigh-min");
    EXPECT_DOUBLE_EQ(j.at("residual").get<double>(), phi.residual);
    EXPECT_DOUBLE_EQ(j.at("energy").get<double>(), phi.energy);
    EXPECT_TRUE(j.at("is_radial").get<bool>());
}
