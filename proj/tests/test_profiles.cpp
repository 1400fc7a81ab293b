#include <milne/profiles.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace milne;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST(Profiles, TentIsTakenVerbatim) {
    const Profile t = profiles::tent();
    EXPECT_EQ(t(0.01), 0.0);
    EXPECT_EQ(t(pi / 20), 0.0);
    EXPECT_EQ(t(pi - 0.01), 0.0);
    EXPECT_DOUBLE_EQ(t(pi / 2), 1.0);
    EXPECT_DOUBLE_EQ(t(pi / 2 + 0.3), 1.0 - 9 * pi / 20 * 0.3);
    // Just inside the band edge the formula reaches 1 - (9 pi/20)(9 pi/20), about -1.
    EXPECT_NEAR(t(pi / 20 + 1e-12), 1.0 - std::pow(9 * pi / 20, 2), 1e-9);
}

TEST(Profiles, CosineAndStep) {
    const Profile c = profiles::cosine();
    EXPECT_EQ(c(0.1), 1.0);
    EXPECT_EQ(c(pi - 0.1), 1.0);
    EXPECT_DOUBLE_EQ(c(1.0), std::cos(1.0));
    EXPECT_NEAR(c(pi / 2), 0.0, 1e-16);
    const Profile s = profiles::step();
    EXPECT_EQ(s(0.3), 1.0);
    EXPECT_EQ(s(2.0), 0.0);
}

TEST(Profiles, ParseNamesAndConstants) {
    EXPECT_DOUBLE_EQ(profiles::parse("constant:0.7")(1.0), 0.7);
    EXPECT_DOUBLE_EQ(profiles::parse("constant:-2e-3")(2.0), -2e-3);
    EXPECT_EQ(profiles::parse("tent")(0.01), 0.0);
    EXPECT_EQ(profiles::parse("cosine")(0.01), 1.0);
    EXPECT_EQ(profiles::parse("step")(0.01), 1.0);
    EXPECT_THROW(profiles::parse("constant:abc"), InvalidArgument);
    EXPECT_THROW(profiles::parse("constant:inf"), InvalidArgument);
    EXPECT_THROW(profiles::parse("gaussian"), InvalidArgument);
    EXPECT_THROW(profiles::parse("file:"), InvalidArgument);
    EXPECT_THROW(profiles::parse("file:/nonexistent/profile.csv"), IoError);
}

TEST(Profiles, SampledFileIsPiecewiseLinear) {
    const auto path = std::filesystem::temp_directory_path() / "milne_profile_test.csv";
    {
        std::ofstream out(path);
        out << "# theta,value\n1.0,3.0\n0.0,1.0\n\n2.0, 0.0  # trailing comment\n";
    }
    const Profile p = profiles::parse("file:" + path.string());
    EXPECT_DOUBLE_EQ(p(0.5), 2.0);
    EXPECT_DOUBLE_EQ(p(1.5), 1.5);
    EXPECT_DOUBLE_EQ(p(-1.0), 1.0);
    EXPECT_DOUBLE_EQ(p(3.0), 0.0);
    {
        std::ofstream out(path);
        out << "0.0,1.0\n0.5\n";
    }
    EXPECT_THROW(profiles::parse("file:" + path.string()), IoError);
    {
        std::ofstream out(path);
        out << "# nothing\n";
    }
    EXPECT_THROW(profiles::parse("file:" + path.string()), IoError);
    std::filesystem::remove(path);
}
