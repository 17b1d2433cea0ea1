#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "groklab/matrix.hpp"

using namespace groklab;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, RngStream& rng) {
    return sample(DistributionSpec::normal(0.0, 1.0), rows, cols, rng);
}

} // namespace

TEST_CASE("identity times anything is a no-op", "[matrix]") {
    RngStream rng(7, "test.matrix.identity");
    const Matrix b = random_matrix(3, 5, rng);
    const Matrix out = matmul(Matrix::identity(3), b);
    for (std::size_t i = 0; i < b.size(); ++i) {
        REQUIRE(out.data()[i] == b.data()[i]);
    }
}

TEST_CASE("zero matrix annihilates", "[matrix]") {
    RngStream rng(8, "test.matrix.zero");
    const Matrix b = random_matrix(4, 3, rng);
    const Matrix out = matmul(Matrix(2, 4, 0.0), b);
    for (double v : out.values()) {
        REQUIRE(v == 0.0);
    }
}

TEST_CASE("hand-multiplied 2x2 by 2x1", "[matrix]") {
    Matrix a(2, 2);
    a(0, 0) = 1;
    a(0, 1) = 2;
    a(1, 0) = 3;
    a(1, 1) = 4;
    Matrix b(2, 1);
    b(0, 0) = 5;
    b(1, 0) = 6;
    const Matrix out = matmul(a, b);
    REQUIRE(out(0, 0) == 17.0);
    REQUIRE(out(1, 0) == 39.0);
}

TEST_CASE("matmul rejects mismatched shapes and names both", "[matrix]") {
    const Matrix a(2, 3);
    const Matrix b(2, 3);
    try {
        matmul(a, b);
        FAIL("expected shape error");
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::ShapeMismatch);
        REQUIRE(std::string(e.what()).find("2x3") != std::string::npos);
    }
}

TEST_CASE("matmul flags non-finite results", "[matrix]") {
    Matrix a(2, 2, 1e200);
    Matrix b(2, 2, 1e200);
    REQUIRE_THROWS_AS(matmul(a, b), Error);
}

TEST_CASE("matmul is associative within 1e-10", "[matrix]") {
    RngStream rng(99, "test.matrix.assoc");
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix a = random_matrix(4, 6, rng);
        const Matrix b = random_matrix(6, 3, rng);
        const Matrix c = random_matrix(3, 5, rng);
        const Matrix left = matmul(matmul(a, b), c);
        const Matrix right = matmul(a, matmul(b, c));
        for (std::size_t i = 0; i < left.size(); ++i) {
            REQUIRE(std::fabs(left.data()[i] - right.data()[i]) < 1e-10);
        }
    }
}

TEST_CASE("transposed products agree with explicit transposes", "[matrix]") {
    RngStream rng(123, "test.matrix.t");
    const Matrix a = random_matrix(4, 3, rng);
    const Matrix b = random_matrix(5, 3, rng);
    Matrix abt(4, 5);
    matmul_bt_into(a, b, abt);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < 3; ++k) {
                dot += a(i, k) * b(j, k);
            }
            REQUIRE_THAT(abt(i, j), Catch::Matchers::WithinAbs(dot, 1e-12));
        }
    }
    const Matrix c = random_matrix(4, 6, rng);
    Matrix atc(3, 6);
    matmul_at_into(a, c, atc);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 6; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < 4; ++k) {
                dot += a(k, i) * c(k, j);
            }
            REQUIRE_THAT(atc(i, j), Catch::Matchers::WithinAbs(dot, 1e-12));
        }
    }
}

TEST_CASE("zero-variance normal sampling is constant", "[matrix]") {
    RngStream rng(1, "test.sample.const");
    const Matrix m = sample(DistributionSpec::normal(0.2, 0.0), 4, 4, rng);
    for (double v : m.values()) {
        REQUIRE(v == 0.2);
    }
}

TEST_CASE("uniform sampling stays in range with the right mean", "[matrix]") {
    RngStream rng(11, "test.sample.uniform");
    const Matrix m = sample(DistributionSpec::uniform(0.4, 0.8), 100, 100, rng);
    double sum = 0.0;
    for (double v : m.values()) {
        REQUIRE(v >= 0.4);
        REQUIRE(v <= 0.8);
        sum += v;
    }
    REQUIRE_THAT(sum / static_cast<double>(m.size()), Catch::Matchers::WithinAbs(0.6, 0.01));
}

TEST_CASE("normal sampling hits the requested spread", "[matrix]") {
    RngStream rng(21, "test.sample.normal");
    const Matrix m = sample(DistributionSpec::normal(0.0, 0.0625), 1000, 100, rng);
    const MeanStd ms = mean_std(m);
    REQUIRE(std::fabs(ms.std - 0.0625) / 0.0625 < 0.02);
}

TEST_CASE("sampling is reproducible from seed and label", "[matrix]") {
    RngStream a(5, "init.embedding");
    RngStream b(5, "init.embedding");
    const Matrix ma = sample(DistributionSpec::normal(0.0, 1.0), 17, 13, a);
    const Matrix mb = sample(DistributionSpec::normal(0.0, 1.0), 17, 13, b);
    REQUIRE(ma.values() == mb.values());
}

TEST_CASE("invalid distribution specs are rejected", "[matrix]") {
    RngStream rng(3, "test.sample.bad");
    try {
        sample(DistributionSpec::normal(0.0, -1.0), 2, 2, rng);
        FAIL("expected invalid-spec error");
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::InvalidSpec);
    }
    try {
        sample(DistributionSpec::uniform(0.8, 0.4), 2, 2, rng);
        FAIL("expected invalid-spec error");
    } catch (const Error& e) {
        REQUIRE(e.code() == ErrorCode::InvalidSpec);
    }
}

TEST_CASE("mean_std matches hand computation", "[matrix]") {
    const double values[] = {1.0, 2.0, 3.0, 4.0};
    const MeanStd ms = mean_std(values, 4);
    REQUIRE_THAT(ms.mean, Catch::Matchers::WithinAbs(2.5, 1e-15));
    REQUIRE_THAT(ms.std, Catch::Matchers::WithinAbs(std::sqrt(1.25), 1e-15));
}
