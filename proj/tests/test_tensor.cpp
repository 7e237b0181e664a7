#include <doctest.h>

#include <cmath>

#include "medfuse/tensor.hpp"

using namespace medfuse;

TEST_CASE("matmul identity and zeros") {
    Rng rng(7);
    Tensor a({3, 3});
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(-1, 1);

    Tensor ia = matmul(Tensor::identity(3), a);
    Tensor ai = matmul(a, Tensor::identity(3));
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(ia[i] == a[i]);
        CHECK(ai[i] == a[i]);
    }

    Tensor z = matmul(Tensor::zeros({2, 2}), Tensor({2, 2}, {1, 2, 3, 4}));
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
    Rng rng(11);
    Tensor a({4, 5}), b({5, 3});
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(-2, 2);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = rng.uniform(-2, 2);
    Tensor c = matmul(a, b);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < 5; ++p) acc += a.at(i, p) * b.at(p, j);
            CHECK(c.at(i, j) == acc);
        }
    }
}

TEST_CASE("matmul shape mismatch throws with both shapes named") {
    Tensor a({2, 3}), b({4, 2});
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[2x3]"), std::invalid_argument);
}

TEST_CASE("softmax analytic values") {
    Tensor u = softmax(Tensor::vector_of({0, 0, 0}));
    for (std::size_t i = 0; i < 3; ++i) CHECK(u[i] == doctest::Approx(1.0 / 3).epsilon(1e-15));

    Tensor v = softmax(Tensor::vector_of({0.0, std::log(2.0)}));
    CHECK(v[0] == doctest::Approx(1.0 / 3).epsilon(1e-14));
    CHECK(v[1] == doctest::Approx(2.0 / 3).epsilon(1e-14));
}

TEST_CASE("masked softmax zeroes absent entries and matches two-element oracle") {
    Rng rng(3);
    Tensor z({3});
    for (std::size_t i = 0; i < 3; ++i) z[i] = rng.uniform(-4, 4);
    Tensor w = softmax(z, {true, false, true});
    CHECK(w[1] == 0.0);
    const double m = std::max(z[0], z[2]);
    const double d = std::exp(z[0] - m) + std::exp(z[2] - m);
    CHECK(w[0] == doctest::Approx(std::exp(z[0] - m) / d).epsilon(1e-15));
    CHECK(w[2] == doctest::Approx(std::exp(z[2] - m) / d).epsilon(1e-15));
}

TEST_CASE("softmax all-false mask throws") {
    CHECK_THROWS_WITH_AS(softmax(Tensor::vector_of({1, 2}), {false, false}),
                         doctest::Contains("empty attention support"), std::invalid_argument);
}

TEST_CASE("softmax properties: simplex and shift invariance") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t k = 1 + rng.next_below(6);
        Tensor z({k});
        // dyadic grid so that z + c stays exact and the shift cancels bitwise
        for (std::size_t i = 0; i < k; ++i) {
            z[i] = std::round(rng.uniform(-30, 30) * 1024.0) / 1024.0;
        }
        Tensor w = softmax(z);
        double sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            CHECK(w[i] >= 0.0);
            sum += w[i];
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);

        const double c = std::round(rng.uniform(-100, 100) * 1024.0) / 1024.0;
        Tensor zs = z;
        for (std::size_t i = 0; i < k; ++i) zs[i] += c;
        Tensor ws = softmax(zs);
        for (std::size_t i = 0; i < k; ++i) CHECK(ws[i] == w[i]);  // bitwise via max shift
    }
}

TEST_CASE("tanh maps") {
    CHECK(map_tanh(Tensor::vector_of({0}))[0] == 0.0);
    // reference value of tanh(1) to full double precision
    CHECK(map_tanh(Tensor::vector_of({1}))[0] ==
          doctest::Approx(0.7615941559557648881).epsilon(1e-15));
    Rng rng(5);
    Tensor a({20});
    for (std::size_t i = 0; i < 20; ++i) a[i] = rng.uniform(-15, 15);
    Tensor t = map_tanh(a);
    Tensor g = map_tanh_grad(a);
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(t[i] > -1.0);
        CHECK(t[i] < 1.0);
        CHECK(g[i] == doctest::Approx(1.0 - t[i] * t[i]).epsilon(1e-15));
    }
}

TEST_CASE("rng reproducibility") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000000; ++i) {
        REQUIRE(a.next_u64() == b.next_u64());
    }
    Rng c(42), d(43);
    CHECK(c.next_u64() != d.next_u64());
}
