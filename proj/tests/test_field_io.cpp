#include <milne/field_io.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

using namespace milne;

namespace {

Field sample_field() {
    const Grid g = make_grid(2.5, 5, 8);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    Field f(g);
    for (double& v : f.values()) v = u(rng);
    f.at(0, 0) = 1e-300;
    f.at(1, 1) = -0.0;
    f.at(2, 2) = 0.1;
    return f;
}

void expect_identical(const Field& a, const Field& b) {
    ASSERT_TRUE(a.grid().same_as(b.grid()));
    for (std::size_t k = 0; k < a.values().size(); ++k) EXPECT_EQ(a.values()[k], b.values()[k]) << k;
}

}  // namespace

TEST(FieldIo, CsvRoundTripIsExact) {
    const Field f = sample_field();
    std::stringstream buf;
    write_field_csv(f, buf);
    expect_identical(f, read_field_csv(buf));
}

TEST(FieldIo, BinaryRoundTripIsExact) {
    const Field f = sample_field();
    std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
    write_field_binary(f, buf);
    expect_identical(f, read_field_binary(buf));
}

TEST(FieldIo, SaveLoadPicksFormatByExtension) {
    const auto dir = std::filesystem::temp_directory_path() / "milne_field_io_test";
    std::filesystem::create_directories(dir);
    const Field f = sample_field();
    save_field(f, dir / "f.csv");
    save_field(f, dir / "f.bin");
    expect_identical(f, load_field(dir / "f.csv"));
    expect_identical(f, load_field(dir / "f.bin"));
    std::ifstream raw(dir / "f.bin", std::ios::binary);
    char magic[4];
    raw.read(magic, 4);
    EXPECT_EQ(std::string(magic, 4), "MLNF");
    std::filesystem::remove_all(dir);
}

TEST(FieldIo, CsvHeaderCarriesGrid) {
    std::stringstream buf;
    write_field_csv(Field(make_grid(6, 3, 4), 1.0), buf);
    std::string header;
    std::getline(buf, header);
    EXPECT_EQ(header, "# milne-field R=6 n_eta=3 n_theta=4");
}

TEST(FieldIo, MalformedCsvIsRejected) {
    const char* cases[] = {
        "",
        "R=1\n",
        "# milne-field R=1 n_eta=2\n",
        "# milne-field R=1 n_eta=2 n_theta=4\n1,2,3,4\n1,2,3,4\n",
        "# milne-field R=1 n_eta=2 n_theta=4\n1,2,3,4\n1,2,3\n1,2,3,4\n",
        "# milne-field R=1 n_eta=2 n_theta=4\n1,2,3,4\n1,2,3,4,5\n1,2,3,4\n",
        "# milne-field R=1 n_eta=2 n_theta=4\n1,2,x,4\n1,2,3,4\n1,2,3,4\n",
        "# milne-field R=1 n_eta=2 n_theta=5\n",
        "# milne-field R=-1 n_eta=2 n_theta=4\n",
        "# milne-field R=1 n_eta=99999999999 n_theta=4\n",
    };
    for (const char* text : cases) {
        std::stringstream buf(text);
        EXPECT_THROW(read_field_csv(buf), IoError) << text;
    }
}

TEST(FieldIo, TruncatedBinaryIsRejected) {
    std::stringstream full(std::ios::in | std::ios::out | std::ios::binary);
    write_field_binary(sample_field(), full);
    const std::string bytes = full.str();
    for (std::size_t cut : {0u, 3u, 10u, 30u, 40u}) {
        std::stringstream buf(bytes.substr(0, bytes.size() - (cut == 40u ? 8 : bytes.size() - cut)),
                              std::ios::in | std::ios::binary);
        EXPECT_THROW(read_field_binary(buf), IoError) << cut;
    }
    std::string bad = bytes;
    bad[0] = 'X';
    std::stringstream buf(bad, std::ios::in | std::ios::binary);
    EXPECT_THROW(read_field_binary(buf), IoError);
}

TEST(FieldIo, MissingFileIsIoError) {
    EXPECT_THROW(load_field("/nonexistent/dir/f.csv"), IoError);
    EXPECT_THROW(save_field(sample_field(), "/nonexistent/dir/f.csv"), IoError);
}
