#include "medfuse/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace medfuse {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

[[noreturn]] void csv_error(std::size_t line_no, const std::string& msg) {
    throw std::runtime_error("csv line " + std::to_string(line_no) + ": " + msg);
}

std::int64_t parse_timestamp(const std::string& field, std::size_t line_no) {
    // integer epoch/step values or ISO-8601 "YYYY-MM-DDTHH:MM:SS"
    if (field.find('-') == std::string::npos || field.find('-') == 0) {
        std::size_t used = 0;
        try {
            const std::int64_t v = std::stoll(field, &used);
            if (used == field.size()) return v;
        } catch (const std::exception&) {
        }
        csv_error(line_no, "unparsable timestamp '" + field + "'");
    }
    std::tm tm{};
    int y, mo, d, h = 0, mi = 0, s = 0;
    const int n = std::sscanf(field.c_str(), "%d-%d-%d%*1[T ]%d:%d:%d", &y, &mo, &d, &h, &mi, &s);
    if (n < 3) csv_error(line_no, "unparsable timestamp '" + field + "'");
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = s;
    const std::time_t t = timegm(&tm);
    if (t == static_cast<std::time_t>(-1)) csv_error(line_no, "invalid timestamp '" + field + "'");
    return static_cast<std::int64_t>(t);
}

double parse_value(const std::string& field, std::size_t line_no) {
    if (field.empty()) csv_error(line_no, "missing cell");
    std::size_t used = 0;
    try {
        const double v = std::stod(field, &used);
        if (used == field.size()) return v;
    } catch (const std::exception&) {
    }
    csv_error(line_no, "non-numeric value '" + field + "'");
}

}  // namespace

RawSeries load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    std::vector<std::string> header = split_fields(line);
    if (header.size() < 3 || header[0] != "station" || header[1] != "timestamp") {
        throw std::runtime_error(path + ": header must be station,timestamp,<features...>");
    }
    std::vector<std::string> features(header.begin() + 2, header.end());
    const std::size_t f_count = features.size();

    struct Row {
        std::string station;
        std::int64_t ts;
        std::vector<double> vals;
    };
    std::vector<std::string> station_order;
    std::map<std::string, std::vector<Row>> by_station;

    std::size_t line_no = 1;
    std::string prev_station;
    std::int64_t prev_ts = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields = split_fields(line);
        if (fields.size() != 2 + f_count) {
            csv_error(line_no, "expected " + std::to_string(2 + f_count) + " fields, got " +
                                   std::to_string(fields.size()));
        }
        Row row;
        row.station = fields[0];
        row.ts = parse_timestamp(fields[1], line_no);
        for (std::size_t k = 0; k < f_count; ++k) {
            row.vals.push_back(parse_value(fields[2 + k], line_no));
        }
        auto it = by_station.find(row.station);
        if (it == by_station.end()) {
            station_order.push_back(row.station);
            it = by_station.emplace(row.station, std::vector<Row>{}).first;
        } else if (row.station == prev_station && row.ts <= prev_ts) {
            csv_error(line_no, "rows not sorted by (station, timestamp)");
        } else if (row.station != prev_station && !it->second.empty()) {
            csv_error(line_no, "station '" + row.station + "' rows are not contiguous");
        }
        prev_station = row.station;
        prev_ts = row.ts;
        it->second.push_back(std::move(row));
    }
    if (station_order.empty()) throw std::runtime_error(path + ": no data rows");

    const std::vector<Row>& first = by_station[station_order[0]];
    const std::size_t t_count = first.size();
    for (const std::string& st : station_order) {
        const std::vector<Row>& rows = by_station[st];
        if (rows.size() != t_count) {
            throw std::runtime_error(path + ": ragged coverage, station '" + st + "' has " +
                                     std::to_string(rows.size()) + " rows, expected " +
                                     std::to_string(t_count));
        }
        for (std::size_t t = 0; t < t_count; ++t) {
            if (rows[t].ts != first[t].ts) {
                throw std::runtime_error(path + ": ragged coverage, station '" + st +
                                         "' timestamp grid differs from station '" +
                                         station_order[0] + "'");
            }
        }
    }
    if (t_count >= 3) {
        const std::int64_t step = first[1].ts - first[0].ts;
        for (std::size_t t = 2; t < t_count; ++t) {
            if (first[t].ts - first[t - 1].ts != step) {
                throw std::runtime_error(path + ": timestamps not equally spaced at index " +
                                         std::to_string(t));
            }
        }
    }

    RawSeries series;
    series.stations = station_order;
    series.feature_names = features;
    series.timestamps.reserve(t_count);
    for (const Row& r : first) series.timestamps.push_back(r.ts);
    series.values = Tensor({station_order.size(), t_count, f_count});
    for (std::size_t i = 0; i < station_order.size(); ++i) {
        const std::vector<Row>& rows = by_station[station_order[i]];
        for (std::size_t t = 0; t < t_count; ++t) {
            for (std::size_t k = 0; k < f_count; ++k) {
                series.values.at(i, t, k) = rows[t].vals[k];
            }
        }
    }
    return series;
}

void write_csv(const std::string& path, const RawSeries& series) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "station,timestamp";
    for (const std::string& f : series.feature_names) out << "," << f;
    out << "\n";
    out << std::setprecision(17);
    for (std::size_t i = 0; i < series.station_count(); ++i) {
        for (std::size_t t = 0; t < series.step_count(); ++t) {
            out << series.stations[i] << "," << series.timestamps[t];
            for (std::size_t k = 0; k < series.feature_count(); ++k) {
                out << "," << series.values.at(i, t, k);
            }
            out << "\n";
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<SamplePair> window(const RawSeries& series, std::size_t t_enc, std::size_t t_dec,
                               std::size_t stride) {
    if (stride == 0) throw std::invalid_argument("window: stride must be >= 1");
    const std::size_t t_total = series.step_count();
    const std::size_t needed = t_enc + t_dec;
    if (t_total < needed) {
        throw std::invalid_argument("window: series has " + std::to_string(t_total) +
                                    " steps, need at least " + std::to_string(needed));
    }
    const std::size_t e_count = series.station_count();
    const std::size_t f_count = series.feature_count();
    const std::size_t count = (t_total - needed) / stride + 1;

    std::vector<SamplePair> out;
    out.reserve(count);
    for (std::size_t n = 0; n < count; ++n) {
        const std::size_t s = n * stride;
        SamplePair sp;
        sp.x = Tensor({e_count, t_enc, f_count});
        sp.y = Tensor({e_count, t_dec, f_count});
        for (std::size_t i = 0; i < e_count; ++i) {
            for (std::size_t t = 0; t < t_enc; ++t) {
                for (std::size_t k = 0; k < f_count; ++k) {
                    sp.x.at(i, t, k) = series.values.at(i, s + t, k);
                }
            }
            for (std::size_t t = 0; t < t_dec; ++t) {
                for (std::size_t k = 0; k < f_count; ++k) {
                    sp.y.at(i, t, k) = series.values.at(i, s + t_enc + t, k);
                }
            }
        }
        out.push_back(std::move(sp));
    }
    return out;
}

NormStats fit_normalize(const RawSeries& train) {
    const std::size_t e_count = train.station_count();
    const std::size_t t_count = train.step_count();
    const std::size_t f_count = train.feature_count();
    if (t_count == 0) throw std::invalid_argument("fit_normalize: empty training region");

    NormStats stats;
    stats.mean = Tensor({e_count, f_count});
    stats.stddev = Tensor({e_count, f_count});
    for (std::size_t i = 0; i < e_count; ++i) {
        for (std::size_t k = 0; k < f_count; ++k) {
            double sum = 0.0;
            for (std::size_t t = 0; t < t_count; ++t) sum += train.values.at(i, t, k);
            const double mean = sum / static_cast<double>(t_count);
            double sq = 0.0;
            for (std::size_t t = 0; t < t_count; ++t) {
                const double d = train.values.at(i, t, k) - mean;
                sq += d * d;
            }
            stats.mean.at(i, k) = mean;
            stats.stddev.at(i, k) =
                std::max(std::sqrt(sq / static_cast<double>(t_count)), NormStats::std_floor);
        }
    }
    return stats;
}

RawSeries apply_normalize(const RawSeries& series, const NormStats& stats) {
    RawSeries out = series;
    for (std::size_t i = 0; i < series.station_count(); ++i) {
        for (std::size_t t = 0; t < series.step_count(); ++t) {
            for (std::size_t k = 0; k < series.feature_count(); ++k) {
                out.values.at(i, t, k) =
                    (series.values.at(i, t, k) - stats.mean.at(i, k)) / stats.stddev.at(i, k);
            }
        }
    }
    return out;
}

RawSeries undo_normalize(const RawSeries& series, const NormStats& stats) {
    RawSeries out = series;
    for (std::size_t i = 0; i < series.station_count(); ++i) {
        for (std::size_t t = 0; t < series.step_count(); ++t) {
            for (std::size_t k = 0; k < series.feature_count(); ++k) {
                out.values.at(i, t, k) =
                    series.values.at(i, t, k) * stats.stddev.at(i, k) + stats.mean.at(i, k);
            }
        }
    }
    return out;
}

namespace {

RawSeries slice_time(const RawSeries& series, std::size_t begin, std::size_t end) {
    RawSeries out;
    out.stations = series.stations;
    out.feature_names = series.feature_names;
    if (begin >= end) return out;  // empty-flagged: zero steps
    out.timestamps.assign(series.timestamps.begin() + begin, series.timestamps.begin() + end);
    out.values = Tensor({series.station_count(), end - begin, series.feature_count()});
    for (std::size_t i = 0; i < series.station_count(); ++i) {
        for (std::size_t t = begin; t < end; ++t) {
            for (std::size_t k = 0; k < series.feature_count(); ++k) {
                out.values.at(i, t - begin, k) = series.values.at(i, t, k);
            }
        }
    }
    return out;
}

}  // namespace

SplitResult split(const RawSeries& series, double train_frac, double valid_frac,
                  double test_frac) {
    if (train_frac < 0 || valid_frac < 0 || test_frac < 0 ||
        train_frac + valid_frac + test_frac > 1.0 + 1e-9) {
        throw std::invalid_argument("split: fractions must be non-negative and sum to <= 1");
    }
    const std::size_t t_total = series.step_count();
    const auto t1 = static_cast<std::size_t>(std::floor(train_frac * static_cast<double>(t_total)));
    const auto t2 =
        t1 + static_cast<std::size_t>(std::floor(valid_frac * static_cast<double>(t_total)));
    SplitResult res;
    res.train = slice_time(series, 0, t1);
    res.valid = slice_time(series, t1, t2);
    res.test = slice_time(series, t2, test_frac > 0 ? t_total : t2);
    if (res.train.step_count() == 0) throw std::invalid_argument("split: empty training split");
    return res;
}

RawSeries synth_generate(std::size_t stations, std::size_t steps, std::uint64_t seed,
                         const SynthParams& params) {
    if (stations < 3) throw std::invalid_argument("synth_generate: need at least 3 stations");
    if (steps < 500) throw std::invalid_argument("synth_generate: need at least 500 steps");
    Rng rng(seed);

    RawSeries series;
    for (std::size_t i = 0; i < stations; ++i) series.stations.push_back("s" + std::to_string(i));
    series.feature_names = {"value"};
    series.timestamps.resize(steps);
    for (std::size_t t = 0; t < steps; ++t) series.timestamps[t] = static_cast<std::int64_t>(t);
    series.values = Tensor({stations, steps, std::size_t{1}});

    std::vector<double> prev(stations, 0.0);
    std::size_t regime = 1;
    for (std::size_t t = 0; t < steps; ++t) {
        if (t % params.regime_length == 0) {
            regime = 1 + static_cast<std::size_t>(rng.next_below(stations - 1));
        }
        std::vector<double> cur(stations, 0.0);
        for (std::size_t i = 1; i < stations; ++i) {
            const double phase = 24.0 * static_cast<double>(i) / static_cast<double>(stations);
            cur[i] = 0.6 * prev[i] +
                     0.8 * std::sin(2.0 * M_PI * (static_cast<double>(t) + phase) / 24.0) +
                     params.noise_scale * rng.normal();
        }
        cur[0] = 0.9 * prev[regime] + params.noise_scale * rng.normal();
        for (std::size_t i = 0; i < stations; ++i) series.values.at(i, t, 0) = cur[i];
        prev = cur;
    }
    return series;
}

}  // namespace medfuse
