#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "medfuse/data.hpp"

using namespace medfuse;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/medfuse_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    f << text;
}

}  // namespace

TEST_CASE("load_csv small fixture") {
    TempFile tf("fixture.csv");
    write_text(tf.path,
               "station,timestamp,temp\n"
               "a,0,1.0\n"
               "a,1,2.0\n"
               "a,2,3.0\n"
               "b,0,4.0\n"
               "b,1,5.0\n"
               "b,2,6.0\n");
    RawSeries s = load_csv(tf.path);
    CHECK(s.station_count() == 2);
    CHECK(s.step_count() == 3);
    CHECK(s.feature_count() == 1);
    CHECK(s.values.at(0, 0, 0) == 1.0);
    CHECK(s.values.at(1, 2, 0) == 6.0);
}

TEST_CASE("load_csv rejects ragged coverage naming the station") {
    TempFile tf("ragged.csv");
    write_text(tf.path,
               "station,timestamp,temp\n"
               "a,0,1.0\n"
               "a,1,2.0\n"
               "b,0,4.0\n");
    CHECK_THROWS_WITH_AS(load_csv(tf.path), doctest::Contains("'b'"), std::runtime_error);
}

TEST_CASE("load_csv rejects non-numeric values with line number") {
    TempFile tf("badval.csv");
    write_text(tf.path,
               "station,timestamp,temp\n"
               "a,0,1.0\n"
               "a,1,oops\n");
    CHECK_THROWS_WITH_AS(load_csv(tf.path), doctest::Contains("line 3"), std::runtime_error);
}

TEST_CASE("load_csv rejects unsorted rows") {
    TempFile tf("unsorted.csv");
    write_text(tf.path,
               "station,timestamp,temp\n"
               "a,1,1.0\n"
               "a,0,2.0\n");
    CHECK_THROWS_AS(load_csv(tf.path), std::runtime_error);
}

TEST_CASE("load_csv accepts ISO-8601 timestamps") {
    TempFile tf("iso.csv");
    write_text(tf.path,
               "station,timestamp,temp\n"
               "a,2014-01-01T00:00:00,1.0\n"
               "a,2014-01-01T01:00:00,2.0\n");
    RawSeries s = load_csv(tf.path);
    CHECK(s.timestamps[1] - s.timestamps[0] == 3600);
}

TEST_CASE("write_csv then load_csv round trip") {
    RawSeries s = synth_generate(3, 600, 77);
    TempFile tf("roundtrip.csv");
    write_csv(tf.path, s);
    RawSeries r = load_csv(tf.path);
    CHECK(r.stations == s.stations);
    CHECK(r.timestamps == s.timestamps);
    CHECK(r.feature_names == s.feature_names);
    REQUIRE(r.values.size() == s.values.size());
    for (std::size_t i = 0; i < s.values.size(); ++i) CHECK(r.values[i] == s.values[i]);
}

TEST_CASE("window counts and offsets") {
    RawSeries s = synth_generate(3, 500, 1);

    auto resize = [&](std::size_t t) {
        RawSeries r = s;
        r.timestamps.resize(t);
        r.values = Tensor({std::size_t{3}, t, std::size_t{1}});
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t tt = 0; tt < t; ++tt) r.values.at(i, tt, 0) = s.values.at(i, tt, 0);
        }
        return r;
    };

    CHECK(window(resize(96), 72, 24, 24).size() == 1);
    auto w2 = window(resize(120), 72, 24, 24);
    CHECK(w2.size() == 2);
    CHECK(w2[1].x.at(0, 0, 0) == s.values.at(0, 24, 0));  // second window starts at offset 24

    // enumeration oracle over random tuples
    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t t_enc = 1 + rng.next_below(10);
        const std::size_t t_dec = 1 + rng.next_below(10);
        const std::size_t stride = 1 + rng.next_below(8);
        const std::size_t t_total = t_enc + t_dec + rng.next_below(60);
        if (t_total > 500) continue;
        std::size_t expected = 0;
        for (std::size_t off = 0; off + t_enc + t_dec <= t_total; off += stride) ++expected;
        CHECK(window(resize(t_total), t_enc, t_dec, stride).size() == expected);
    }
}

TEST_CASE("window rejects short series stating the minimum") {
    RawSeries s = synth_generate(3, 500, 2);
    s.timestamps.resize(50);
    RawSeries small = s;
    small.values = Tensor({std::size_t{3}, std::size_t{50}, std::size_t{1}});
    CHECK_THROWS_WITH_AS(window(small, 72, 24, 24), doctest::Contains("96"),
                         std::invalid_argument);
}

TEST_CASE("window never mixes encoder and decoder ranges") {
    RawSeries s = synth_generate(3, 600, 3);
    auto samples = window(s, 48, 24, 24);
    for (std::size_t n = 0; n < samples.size(); ++n) {
        const std::size_t start = n * 24;
        CHECK(samples[n].x.at(0, 47, 0) == s.values.at(0, start + 47, 0));
        CHECK(samples[n].y.at(0, 0, 0) == s.values.at(0, start + 48, 0));
    }
}

TEST_CASE("normalization: train region becomes zero-mean unit-variance") {
    RawSeries s = synth_generate(4, 1000, 4);
    NormStats stats = fit_normalize(s);
    RawSeries n = apply_normalize(s, stats);
    for (std::size_t i = 0; i < 4; ++i) {
        double mean = 0.0;
        for (std::size_t t = 0; t < 1000; ++t) mean += n.values.at(i, t, 0);
        mean /= 1000.0;
        CHECK(std::abs(mean) < 1e-9);
        double var = 0.0;
        for (std::size_t t = 0; t < 1000; ++t) {
            const double d = n.values.at(i, t, 0) - mean;
            var += d * d;
        }
        CHECK(std::abs(std::sqrt(var / 1000.0) - 1.0) < 1e-9);
    }
    // predicting zero on the normalized region scores exactly 1.0 MSE
    double mse = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t t = 0; t < 1000; ++t) {
            mse += n.values.at(i, t, 0) * n.values.at(i, t, 0);
        }
    }
    CHECK(std::abs(mse / 4000.0 - 1.0) < 1e-9);
}

TEST_CASE("normalization: constant channel saturates at the floor") {
    RawSeries s = synth_generate(3, 500, 5);
    for (std::size_t t = 0; t < 500; ++t) s.values.at(1, t, 0) = 7.0;
    NormStats stats = fit_normalize(s);
    RawSeries n = apply_normalize(s, stats);
    for (std::size_t t = 0; t < 500; ++t) CHECK(n.values.at(1, t, 0) == 0.0);
}

TEST_CASE("normalization is invertible") {
    RawSeries s = synth_generate(3, 500, 6);
    NormStats stats = fit_normalize(s);
    RawSeries back = undo_normalize(apply_normalize(s, stats), stats);
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        CHECK(back.values[i] == doctest::Approx(s.values[i]).epsilon(1e-12));
    }
}

TEST_CASE("split fractions") {
    RawSeries s = synth_generate(3, 1000, 7);
    SplitResult r = split(s, 0.7, 0.1, 0.2);
    CHECK(r.train.step_count() == 700);
    CHECK(r.valid.step_count() == 100);
    CHECK(r.test.step_count() == 200);
    CHECK(r.train.step_count() + r.valid.step_count() + r.test.step_count() == 1000);
    // no timestamp in two splits
    CHECK(r.train.timestamps.back() < r.valid.timestamps.front());
    CHECK(r.valid.timestamps.back() < r.test.timestamps.front());

    SplitResult all = split(s, 1.0, 0.0, 0.0);
    CHECK(all.train.step_count() == 1000);
    CHECK(all.valid.step_count() == 0);
    CHECK(all.test.step_count() == 0);
}

TEST_CASE("synth_generate determinism and structure") {
    RawSeries a = synth_generate(5, 600, 42);
    RawSeries b = synth_generate(5, 600, 42);
    for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(a.values[i] == b.values[i]);
    CHECK(a.values.all_finite());

    // with noise off, station 0 equals 0.9 x lagged active driver exactly;
    // verified via the regime segments being perfectly correlated
    SynthParams quiet;
    quiet.noise_scale = 0.0;
    RawSeries q = synth_generate(4, 600, 43, quiet);
    // within each 48-step regime, after the first step, either relation to one
    // of the drivers must hold exactly
    for (std::size_t seg = 0; seg < 600 / 48; ++seg) {
        const std::size_t t0 = seg * 48 + 1;
        bool matched = false;
        for (std::size_t d = 1; d < 4 && !matched; ++d) {
            bool all = true;
            for (std::size_t t = t0; t < std::min<std::size_t>(seg * 48 + 48, 600); ++t) {
                if (q.values.at(0, t, 0) != 0.9 * q.values.at(d, t - 1, 0)) {
                    all = false;
                    break;
                }
            }
            matched = all;
        }
        CHECK(matched);
    }

    // lag-1 correlation with the active driver is high within a regime
    RawSeries n = synth_generate(5, 2000, 44);
    SynthParams quiet5;
    quiet5.noise_scale = 0.0;
    RawSeries ref = synth_generate(5, 2000, 44, quiet5);  // same regime draws: same rng order?
    // regimes are drawn first per step block, so the noisy and quiet runs share
    // the regime sequence only if the draw order matches; check correlation on
    // the noisy series directly instead, regime identified via the quiet run of
    // the same seed is not guaranteed; use a generic check: station 0 is highly
    // correlated with its own construction, i.e. some driver, per segment
    for (std::size_t seg = 1; seg < 5; ++seg) {
        const std::size_t t0 = seg * 48 + 1;
        double best = -1.0;
        for (std::size_t d = 1; d < 5; ++d) {
            double sxy = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
            const std::size_t cnt = 47;
            for (std::size_t t = t0; t < t0 + cnt; ++t) {
                const double xv = n.values.at(d, t - 1, 0);
                const double yv = n.values.at(0, t, 0);
                sx += xv;
                sy += yv;
                sxx += xv * xv;
                syy += yv * yv;
                sxy += xv * yv;
            }
            const double num = cnt * sxy - sx * sy;
            const double den =
                std::sqrt((cnt * sxx - sx * sx) * (cnt * syy - sy * sy));
            if (den > 0) best = std::max(best, num / den);
        }
        CHECK(best > 0.8);
    }
}

TEST_CASE("synth_generate preconditions") {
    CHECK_THROWS_AS(synth_generate(2, 600, 1), std::invalid_argument);
    CHECK_THROWS_AS(synth_generate(3, 100, 1), std::invalid_argument);
}
