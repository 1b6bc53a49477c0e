#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "loadfc/series.hpp"
#include "test_util.hpp"

using namespace loadfc;
using testutil::kNaN;

namespace {

RawSeries raw_of(std::vector<Timestamp> ts, std::vector<double> agg) {
    RawSeries r;
    r.channel_names = {"Aggregate"};
    r.timestamps = std::move(ts);
    r.channels = {std::move(agg)};
    return r;
}

CsvSchema aggregate_only() {
    CsvSchema s;
    s.appliance_columns.clear();
    return s;
}

}  // namespace

TEST(Ingest, ParsesRowsInFileOrder) {
    testutil::TempDir dir("ingest");
    testutil::write_file(dir / "a.csv", "Unix,Aggregate\n0,100\n8,110\n16,120\n");
    const RawSeries r = ingest_csv(dir / "a.csv", aggregate_only());
    ASSERT_EQ(r.size(), 3u);
    EXPECT_EQ(r.timestamps, (std::vector<Timestamp>{0, 8, 16}));
    EXPECT_EQ(r.channels[0], (std::vector<double>{100, 110, 120}));
}

TEST(Ingest, HeaderOnlyIsEmptySeries) {
    testutil::TempDir dir("ingest");
    testutil::write_file(dir / "a.csv", "Unix,Aggregate\n");
    try {
        ingest_csv(dir / "a.csv", aggregate_only());
        FAIL() << "expected IngestError";
    } catch (const IngestError& e) {
        EXPECT_NE(std::string(e.what()).find("empty series"), std::string::npos);
    }
}

TEST(Ingest, OutOfOrderRowsAreSorted) {
    testutil::TempDir dir("ingest");
    testutil::write_file(dir / "a.csv", "Unix,Aggregate\n0,100\n8,110\n16,120\n");
    testutil::write_file(dir / "b.csv", "Unix,Aggregate\n16,120\n0,100\n8,110\n");
    const RawSeries a = ingest_csv(dir / "a.csv", aggregate_only());
    const RawSeries b = ingest_csv(dir / "b.csv", aggregate_only());
    EXPECT_EQ(a.timestamps, b.timestamps);
    EXPECT_EQ(a.channels, b.channels);
}

TEST(Ingest, DuplicateTimestampKeepsLastRow) {
    testutil::TempDir dir("ingest");
    testutil::write_file(dir / "a.csv", "Unix,Aggregate\n0,1\n8,2\n0,3\n");
    const RawSeries r = ingest_csv(dir / "a.csv", aggregate_only());
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r.timestamps, (std::vector<Timestamp>{0, 8}));
    EXPECT_EQ(r.channels[0], (std::vector<double>{3, 2}));
}

TEST(Ingest, MalformedRowReportsLineNumber) {
    testutil::TempDir dir("ingest");
    std::string text = "Unix,Aggregate\n";
    for (int i = 0; i < 15; ++i) text += std::to_string(i * 8) + ",10\n";
    text += "120,abc\n";  // line 17
    testutil::write_file(dir / "a.csv", text);
    try {
        ingest_csv(dir / "a.csv", aggregate_only());
        FAIL() << "expected IngestError";
    } catch (const IngestError& e) {
        EXPECT_EQ(e.line(), 17u);
        EXPECT_NE(std::string(e.what()).find("line 17"), std::string::npos);
    }
}

TEST(Ingest, InvalidCellsBecomeNaN) {
    testutil::TempDir dir("ingest");
    testutil::write_file(dir / "a.csv", "Unix,Aggregate\n0,-5\n8,\n16,7\n");
    const RawSeries r = ingest_csv(dir / "a.csv", aggregate_only());
    EXPECT_TRUE(std::isnan(r.channels[0][0]));
    EXPECT_TRUE(std::isnan(r.channels[0][1]));
    EXPECT_EQ(r.channels[0][2], 7.0);
}

TEST(Ingest, MissingColumnAndMissingFile) {
    testutil::TempDir dir("ingest");
    testutil::write_file(dir / "a.csv", "Unix,Aggregate\n0,1\n");
    EXPECT_THROW(ingest_csv(dir / "a.csv", CsvSchema{}), IngestError);
    EXPECT_THROW(ingest_csv(dir / "nope.csv", aggregate_only()), IngestError);
}

TEST(Resample, MeanPerHourWithMissingSlot) {
    const RawSeries r = raw_of({10, 20, 7200 + 5}, {100, 200, 50});
    const HourlySeries h = resample_hourly(r);
    ASSERT_EQ(h.size(), 3u);
    EXPECT_EQ(h.channel(0)[0], 150.0);
    EXPECT_FALSE(h.channel(0)[1].has_value());
    EXPECT_EQ(h.channel(0)[2], 50.0);
}

TEST(Resample, SingleReading) {
    const HourlySeries h = resample_hourly(raw_of({3600 * 5 + 17}, {42}));
    ASSERT_EQ(h.size(), 1u);
    EXPECT_EQ(h.start(), 3600 * 5);
    EXPECT_EQ(h.channel(0)[0], 42.0);
}

TEST(Resample, ConstantEightSecondReadings) {
    std::vector<Timestamp> ts;
    std::vector<double> v;
    for (Timestamp t = 0; t < 3 * 3600; t += 8) {
        ts.push_back(t);
        v.push_back(300.0);
    }
    const HourlySeries h = resample_hourly(raw_of(ts, v));
    ASSERT_EQ(h.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(h.channel(0)[i], 300.0);
}

TEST(Resample, HourBoundaryBelongsToNextHour) {
    const HourlySeries h = resample_hourly(raw_of({0, 3599, 3600}, {1, 3, 10}));
    ASSERT_EQ(h.size(), 2u);
    EXPECT_EQ(h.channel(0)[0], 2.0);
    EXPECT_EQ(h.channel(0)[1], 10.0);
}

TEST(Resample, NaNReadingsAreSkipped) {
    const HourlySeries h = resample_hourly(raw_of({0, 10, 3700}, {kNaN, 4, kNaN}));
    EXPECT_EQ(h.channel(0)[0], 4.0);
    EXPECT_FALSE(h.channel(0)[1].has_value());
}

TEST(Resample, ConservesMassProperty) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> gap(1, 900);
    std::uniform_real_distribution<double> watts(0.0, 3000.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Timestamp> ts;
        std::vector<double> v;
        Timestamp t = gap(rng);
        for (int k = 0; k < 400; ++k) {
            ts.push_back(t);
            v.push_back(watts(rng));
            t += gap(rng);
        }
        const HourlySeries h = resample_hourly(raw_of(ts, v));
        std::vector<std::size_t> count(h.size());
        double raw_sum = 0.0;
        for (std::size_t k = 0; k < ts.size(); ++k) {
            ++count[static_cast<std::size_t>((ts[k] - h.start()) / 3600)];
            raw_sum += v[k];
        }
        double hourly_sum = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) {
            if (h.channel(0)[i]) hourly_sum += *h.channel(0)[i] * static_cast<double>(count[i]);
            else EXPECT_EQ(count[i], 0u);
        }
        EXPECT_NEAR(hourly_sum, raw_sum, 1e-6 * raw_sum);
    }
}

TEST(Gaps, ThresholdFiltersShortRuns) {
    std::vector<double> v(200, 1.0);
    for (int i = 10; i < 12; ++i) v[i] = kNaN;
    for (int i = 50; i < 130; ++i) v[i] = kNaN;
    const GapReport r = detect_gaps(testutil::series_of(v), 24);
    ASSERT_EQ(r.gaps.size(), 1u);
    EXPECT_EQ(r.gaps[0], (Gap{50, 80}));
    EXPECT_EQ(r.structural_threshold, 24u);
}

TEST(Gaps, FullyObservedAndFullyMissing) {
    EXPECT_TRUE(detect_gaps(testutil::series_of(std::vector<double>(40, 2.0)), 24).gaps.empty());
    const GapReport r = detect_gaps(testutil::series_of(std::vector<double>(50, kNaN)), 24);
    ASSERT_EQ(r.gaps.size(), 1u);
    EXPECT_EQ(r.gaps[0], (Gap{0, 50}));
    EXPECT_THROW(detect_gaps(testutil::series_of({1.0}), 0), std::invalid_argument);
}

TEST(Gaps, RunsAreMaximalProperty) {
    std::mt19937_64 rng(5);
    std::bernoulli_distribution miss(0.3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(300);
        for (auto& x : v) x = miss(rng) ? kNaN : 1.0;
        // Plant long runs so the report is not empty.
        for (int i = 100; i < 140; ++i) v[i] = kNaN;
        const HourlySeries s = testutil::series_of(v);
        const GapReport r = detect_gaps(s, 3);
        std::size_t prev_end = 0;
        for (const Gap& g : r.gaps) {
            EXPECT_GE(g.length, 3u);
            EXPECT_GE(g.start, prev_end);
            prev_end = g.start + g.length;
            for (std::size_t i = g.start; i < g.start + g.length; ++i) EXPECT_FALSE(s.channel(0)[i]);
            if (g.start > 0) EXPECT_TRUE(s.channel(0)[g.start - 1]);
            if (g.start + g.length < s.size()) EXPECT_TRUE(s.channel(0)[g.start + g.length]);
        }
    }
}

TEST(Scaler, FitOnSegmentOnly) {
    const HourlySeries s = testutil::series_of({0, 500, 1000, 5000, 9000});
    const ScalerParams p = minmax_fit(s, {0, 3});
    EXPECT_EQ(p.min[0], 0.0);
    EXPECT_EQ(p.max[0], 1000.0);
    EXPECT_EQ(p.transform(0, 500), 0.5);
    EXPECT_DOUBLE_EQ(p.transform(0, 1200), 1.2);
}

TEST(Scaler, DegenerateRangeMapsToZeroAndBackToMin) {
    const ScalerParams p = minmax_fit(testutil::series_of({5, 5, 5}), {0, 3});
    EXPECT_EQ(p.min[0], 5.0);
    EXPECT_EQ(p.max[0], 5.0);
    const HourlySeries t = minmax_transform(testutil::series_of({5, 5, 5}), p);
    for (const auto& v : t.channel(0)) EXPECT_EQ(*v, 0.0);
    EXPECT_EQ(p.inverse(0, 0.0), 5.0);
}

TEST(Scaler, AllMissingChannelInSegmentThrows) {
    EXPECT_THROW(minmax_fit(testutil::series_of({kNaN, kNaN, 3}), {0, 2}), std::invalid_argument);
    EXPECT_THROW(minmax_fit(testutil::series_of({1, 2}), {1, 1}), std::invalid_argument);
}

TEST(Scaler, RoundTripIdentityProperty) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> watts(0.0, 5000.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(64);
        for (auto& x : v) x = watts(rng);
        v[7] = kNaN;
        const HourlySeries s = testutil::series_of(v);
        const ScalerParams p = minmax_fit(s, {0, 32});
        const HourlySeries back = minmax_inverse(minmax_transform(s, p), p);
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i == 7) {
                EXPECT_FALSE(back.channel(0)[i]);
                continue;
            }
            EXPECT_NEAR(*back.channel(0)[i], v[i], 1e-9 * std::max(1.0, std::abs(v[i])));
        }
    }
    const ScalerParams p = minmax_fit(testutil::series_of({12.3, 999.9}), {0, 2});
    EXPECT_NEAR(p.inverse(0, p.transform(0, 12.3)), 12.3, 1e-9 * 12.3);
    EXPECT_NEAR(p.inverse(0, p.transform(0, 999.9)), 999.9, 1e-9 * 999.9);
}

TEST(Split, FloorRule) {
    auto lengths = [](std::size_t n, double f) {
        const auto [a, b] = chronological_split(testutil::series_of(std::vector<double>(n, 1.0)), f);
        return std::make_pair(a.size(), b.size());
    };
    EXPECT_EQ(lengths(10, 0.8), std::make_pair(std::size_t{8}, std::size_t{2}));
    EXPECT_EQ(lengths(5, 0.5), std::make_pair(std::size_t{2}, std::size_t{3}));
    EXPECT_EQ(lengths(10, 0.99), std::make_pair(std::size_t{9}, std::size_t{1}));
}

TEST(Split, ErrorsOnEmptySide) {
    const HourlySeries s = testutil::series_of(std::vector<double>(10, 1.0));
    EXPECT_THROW(chronological_split(s, 0.05), std::invalid_argument);
    EXPECT_THROW(chronological_split(s, 1.0), std::invalid_argument);
    EXPECT_THROW(chronological_split(s, 0.0), std::invalid_argument);
    EXPECT_THROW(chronological_split(testutil::series_of({1.0}), 0.5), std::invalid_argument);
}

TEST(Split, PartitionProperty) {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<std::size_t> len(2, 300);
    std::uniform_real_distribution<double> frac(0.01, 0.99);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = len(rng);
        const double f = frac(rng);
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i) * 1.5;
        const HourlySeries s = testutil::series_of(v);
        const auto k = static_cast<std::size_t>(std::floor(f * static_cast<double>(n)));
        if (k == 0 || k >= n) {
            EXPECT_THROW(chronological_split(s, f), std::invalid_argument);
            continue;
        }
        const auto [train, test] = chronological_split(s, f);
        EXPECT_EQ(train.size(), k);
        EXPECT_EQ(train.start() + static_cast<Timestamp>(train.size()) * 3600, test.start());
        Channel joined = train.channel(0);
        joined.insert(joined.end(), test.channel(0).begin(), test.channel(0).end());
        EXPECT_EQ(joined, s.channel(0));
    }
}

TEST(HourlyCache, CsvRoundTripIsExact) {
    testutil::TempDir dir("cache");
    const HourlySeries s(make_timestamp(2014, 3, 1, 5), {"Aggregate", "Appliance1"},
                         {{0.1, std::nullopt, 1234.5678901234567}, {std::nullopt, 2.0, 1e-300}});
    write_hourly_csv(dir / "h.csv", s);
    EXPECT_EQ(read_hourly_csv(dir / "h.csv"), s);
    const std::string text = testutil::read_file(dir / "h.csv");
    EXPECT_EQ(text.substr(0, text.find('\n')), "timestamp,Aggregate,Appliance1");
    EXPECT_NE(text.find("2014-03-01T05:00:00Z,0.1,\n"), std::string::npos);
}

TEST(HourlySeriesType, RejectsUnalignedStartAndRaggedChannels) {
    EXPECT_THROW(HourlySeries(10, {"a"}, {{1.0}}), std::invalid_argument);
    EXPECT_THROW(HourlySeries(0, {"a", "b"}, {{1.0}, {1.0, 2.0}}), std::invalid_argument);
    EXPECT_THROW(HourlySeries(0, {"a"}, {}), std::invalid_argument);
}

TEST(Calendar, IsoRoundTripAndWeekday) {
    const Timestamp t = make_timestamp(2014, 1, 6, 13);  // Monday
    EXPECT_EQ(format_iso_hour(t), "2014-01-06T13:00:00Z");
    EXPECT_EQ(parse_iso_hour("2014-01-06T13:00:00Z"), t);
    EXPECT_EQ(civil_hour(t).weekday, 0u);
    EXPECT_EQ(civil_hour(t + 6 * 86400).weekday, 6u);
    EXPECT_THROW(parse_iso_hour("2014-01-06"), std::invalid_argument);
}
