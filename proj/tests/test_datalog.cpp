#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <thread>

#include "laneforge/datalog.hpp"
#include "laneforge/dataset.hpp"
#include "support.hpp"

using namespace laneforge;

namespace {

Sample nominal(std::int64_t t, double steer = 3.5) { return {t, 1.2, steer, 0.3, frame_file_name(std::uint64_t(t))}; }

struct CraftedLog {
    std::vector<Sample> rows;
    std::set<std::size_t> dropped;
};

/// 100 rows: 10 stopped, 10 braking, 10 over the steering limit, 2 rows
/// breaking two rules at once, the rest legal (some exactly on a boundary).
CraftedLog crafted_log(double limit) {
    CraftedLog log;
    for (std::size_t i = 0; i < 100; ++i) {
        Sample s = nominal(std::int64_t(i) * 33, double(int(i % 21) - 10));
        if (i % 10 == 1) s.speed_mps = 0.0;
        if (i % 10 == 4) s.throttle = -0.3;
        if (i % 10 == 7) s.steer_deg = i % 20 == 7 ? 45.0 : -45.0;
        if (i == 50) s.steer_deg = limit;    // boundary kept
        if (i == 52) s.steer_deg = -limit;   // boundary kept
        if (i == 60) s.throttle = 0.0;       // boundary kept
        if (i == 62) s.speed_mps = 1e-9;     // boundary kept
        if (i == 98) s.speed_mps = 0.0, s.throttle = -1.0;
        if (i == 99) s.throttle = -0.01, s.steer_deg = 31.0;
        const bool drop = s.speed_mps == 0.0 || s.throttle < 0.0 || std::abs(s.steer_deg) > limit;
        if (i % 10 == 1 || i % 10 == 4 || i % 10 == 7 || i == 98 || i == 99) {
            EXPECT_TRUE(drop);
            log.dropped.insert(i);
        }
        log.rows.push_back(s);
    }
    return log;
}

LabeledSample labeled(std::uint8_t seed, double steer, int frames = 1) {
    LabeledSample s;
    for (int k = 0; k < frames; ++k) {
        Frame f(6, 4);
        for (std::size_t i = 0; i < f.pixels.size(); ++i) f.pixels[i] = std::uint8_t(seed * 13 + i * 7 + k);
        s.frames.push_back(f);
    }
    s.steer_deg = steer;
    return s;
}

}  // namespace

TEST(FilterRows, DropsExactlyTheThreeClassesOnACraftedLog) {
    const CraftedLog log = crafted_log(30.0);
    EXPECT_EQ(log.dropped.size(), 32u);
    const auto kept = filter_rows(log.rows, 30.0);
    std::vector<Sample> expected;
    for (std::size_t i = 0; i < log.rows.size(); ++i) {
        if (!log.dropped.count(i)) expected.push_back(log.rows[i]);
    }
    EXPECT_EQ(kept.size(), 68u);
    EXPECT_EQ(kept, expected);
}

TEST(FilterRows, SingleRuleExamples) {
    Sample s = nominal(0);
    s.speed_mps = 0.0;
    EXPECT_FALSE(keep_row(s, 30.0));
    s = nominal(0);
    s.throttle = -0.3;
    EXPECT_FALSE(keep_row(s, 30.0));
    s = nominal(0);
    s.steer_deg = 45.0;
    EXPECT_FALSE(keep_row(s, 30.0));
    EXPECT_TRUE(keep_row(nominal(0), 30.0));
}

TEST(FilterRows, IdempotentAndClean) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> sp(-0.5, 2.0), st(-50.0, 50.0), th(-1.0, 1.0);
    std::vector<Sample> rows;
    for (int i = 0; i < 2000; ++i) {
        Sample s = nominal(i * 33);
        s.speed_mps = std::max(0.0, sp(rng));
        s.steer_deg = st(rng);
        s.throttle = th(rng);
        rows.push_back(s);
    }
    const auto once = filter_rows(rows, 30.0);
    EXPECT_EQ(filter_rows(once, 30.0), once);
    for (const auto& s : once) {
        EXPECT_GT(s.speed_mps, 0.0);
        EXPECT_GE(s.throttle, 0.0);
        EXPECT_LE(std::abs(s.steer_deg), 30.0);
    }
    for (std::size_t i = 1; i < once.size(); ++i) EXPECT_LT(once[i - 1].timestamp_ms, once[i].timestamp_ms);
}

TEST(MirrorAugment, DoublesAndNegates) {
    const std::vector<LabeledSample> data{labeled(1, 7.5), labeled(2, -3.25), labeled(3, 0.0), labeled(4, 12.0)};
    const auto out = mirror_augment(data);
    ASSERT_EQ(out.size(), 8u);
    for (std::size_t i = 0; i < data.size(); ++i) {
        EXPECT_EQ(out[i].steer_deg, data[i].steer_deg);
        EXPECT_TRUE(out[i].frames[0].same_pixels(data[i].frames[0]));
        EXPECT_EQ(out[i + 4].steer_deg, -data[i].steer_deg);
        EXPECT_TRUE(out[i + 4].frames[0].same_pixels(flip_horizontal(data[i].frames[0])));
    }
}

TEST(MirrorAugment, MeanZeroAndAbsMultisetKept) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> st(-30.0, 30.0);
    std::vector<LabeledSample> data;
    for (int i = 0; i < 500; ++i) data.push_back(labeled(std::uint8_t(i), st(rng)));
    const auto out = mirror_augment(data);
    ASSERT_EQ(out.size(), 2 * data.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) sum += out[i].steer_deg + out[i + data.size()].steer_deg;
    EXPECT_EQ(sum, 0.0);
    std::multiset<double> a, b;
    for (const auto& s : data) a.insert(std::abs(s.steer_deg)), a.insert(std::abs(s.steer_deg));
    for (const auto& s : out) b.insert(std::abs(s.steer_deg));
    EXPECT_EQ(a, b);
}

TEST(MirrorAugment, MirrorOfMirrorsRecoversOriginals) {
    const std::vector<LabeledSample> data{labeled(5, 4.0, 3), labeled(6, -9.0, 3)};
    const auto once = mirror_augment(data);
    const std::vector<LabeledSample> copies(once.begin() + 2, once.end());
    const auto twice = mirror_augment(copies);
    for (std::size_t i = 0; i < data.size(); ++i) {
        EXPECT_EQ(twice[i + 2].steer_deg, data[i].steer_deg);
        for (std::size_t k = 0; k < 3; ++k) EXPECT_TRUE(twice[i + 2].frames[k].same_pixels(data[i].frames[k]));
    }
}

TEST(Triplets, ContiguityRule) {
    std::vector<Sample> rows;
    for (int i = 0; i < 5; ++i) rows.push_back(nominal(i * 33));
    EXPECT_EQ(make_triplets(rows, 33.0).size(), 3u);
    std::vector<Sample> broken = rows;
    for (std::size_t i = 3; i < broken.size(); ++i) broken[i].timestamp_ms += 1000;  // gate closed between 3 and 4
    const auto t = make_triplets(broken, 33.0);
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t[0], (std::array<std::size_t, 3>{0, 1, 2}));
    EXPECT_EQ(make_triplets(std::span(rows).first(2), 33.0).size(), 0u);
    EXPECT_DOUBLE_EQ(estimate_period_ms(broken), 33.0);
}

TEST(Csv, RoundTripIsByteStable) {
    std::vector<Sample> rows{{0, 0.1, -7.5, 1.0 / 3.0, "frames/frame_00000000.pgm"},
                             {33, 1e-7, 29.999999999999996, 0.0, "frames/frame_00000001.pgm"},
                             {67, 2.5, -0.0, -1.0, "frames/frame_00000002.pgm"}};
    const std::string text = format_csv(rows);
    EXPECT_EQ(text.substr(0, text.find('\n')), kCsvHeader);
    const CsvParse p = parse_csv(text);
    EXPECT_TRUE(p.malformed.empty());
    ASSERT_EQ(p.rows.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(p.rows[i].timestamp_ms, rows[i].timestamp_ms);
        EXPECT_EQ(p.rows[i].speed_mps, rows[i].speed_mps);
        EXPECT_EQ(p.rows[i].steer_deg, rows[i].steer_deg);
        EXPECT_EQ(p.rows[i].throttle, rows[i].throttle);
        EXPECT_EQ(p.rows[i].frame_file, rows[i].frame_file);
    }
    EXPECT_EQ(format_csv(p.rows), text);
}

TEST(Csv, RandomRoundTrip) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    std::vector<Sample> rows;
    for (int i = 0; i < 1000; ++i) rows.push_back({i * 33, std::abs(u(rng)), u(rng), u(rng) / 100.0, frame_file_name(i)});
    const std::string text = format_csv(rows);
    EXPECT_EQ(parse_csv(text).rows, rows);
    EXPECT_EQ(format_csv(parse_csv(text).rows), text);
}

TEST(Csv, MalformedRowsSkippedAndReported) {
    const std::string text = std::string(kCsvHeader) +
                             "\n0,1,2,0.5,a.pgm\n33,x,2,0.5,b.pgm\n67,1,2\n100,1,2,0.5,c.pgm\n";
    const CsvParse p = parse_csv(text);
    EXPECT_EQ(p.rows.size(), 2u);
    EXPECT_EQ(p.malformed, (std::vector<std::size_t>{1, 2}));
    try {
        parse_row("1,2", 7);
        FAIL();
    } catch (const MalformedRow& e) {
        EXPECT_EQ(e.row(), 7u);
    }
    EXPECT_THROW(parse_csv("time,speed\n"), std::runtime_error);
}

TEST(BoundedQueue, Policies) {
    BoundedQueue<int> drop(2, QueuePolicy::DropNewest);
    EXPECT_TRUE(drop.push(1));
    EXPECT_TRUE(drop.push(2));
    EXPECT_FALSE(drop.push(3));
    EXPECT_EQ(drop.dropped(), 1u);
    EXPECT_EQ(drop.try_pop(), 1);
    EXPECT_EQ(drop.try_pop(), 2);
    EXPECT_FALSE(drop.try_pop());

    BoundedQueue<int> block(1, QueuePolicy::Block);
    std::thread producer([&] {
        for (int i = 0; i < 100; ++i) block.push(i);
        block.close();
    });
    int expect = 0;
    while (auto v = block.pop()) EXPECT_EQ(*v, expect++);
    producer.join();
    EXPECT_EQ(expect, 100);
    EXPECT_EQ(block.dropped(), 0u);
    EXPECT_THROW(BoundedQueue<int>(0, QueuePolicy::Block), std::invalid_argument);
}

TEST(RunWriter, WritesLayoutAndLoadsBack) {
    lftest::TempDir tmp;
    const auto dir = RunWriter::make_run_dir(tmp.path());
    EXPECT_EQ(dir.filename().string().rfind("run_", 0), 0u);
    {
        RunWriter w(dir);
        for (int i = 0; i < 3; ++i) w.append(nominal(i * 33, i), Frame(8, 6, std::uint8_t(10 * i)));
        w.write_meta("seed=4\n");
        w.flush();
        EXPECT_EQ(w.rows(), 3u);
    }
    const RunData run = load_run(dir);
    ASSERT_EQ(run.rows.size(), 3u);
    EXPECT_EQ(run.meta, "seed=4\n");
    EXPECT_EQ(run.rows[2].frame_file, "frames/frame_00000066.pgm");
    EXPECT_EQ(run.frame(run.rows[2]).at(3, 3), 20);
    EXPECT_TRUE(std::filesystem::exists(dir / "frames" / "frame_00000000.pgm"));
    EXPECT_EQ(find_runs(tmp.path()), std::vector<std::filesystem::path>{dir});
}

TEST(AsyncRunWriter, BlockPolicyKeepsEverything) {
    lftest::TempDir tmp;
    AsyncRunWriter w(tmp / "run", 4, QueuePolicy::Block);
    for (int i = 0; i < 200; ++i) EXPECT_TRUE(w.submit(nominal(i * 33), Frame(4, 4, 1)));
    w.close();
    EXPECT_EQ(w.written(), 200u);
    EXPECT_EQ(w.dropped(), 0u);
    EXPECT_EQ(load_run(tmp / "run").rows.size(), 200u);
}

TEST(AsyncRunWriter, IoFailureStopsLoggingWithoutThrowing) {
    lftest::TempDir tmp;
    AsyncRunWriter w(tmp / "run", 8, QueuePolicy::Block);
    std::filesystem::remove_all(tmp / "run" / "frames");
    lftest::spit(tmp / "run" / "frames", "not a directory");
    for (int i = 0; i < 5; ++i) w.submit(nominal(i * 33), Frame(4, 4, 1));
    w.close();
    EXPECT_TRUE(w.failed());
    EXPECT_EQ(w.written(), 0u);
}

TEST(Dataset, LoadsFilteredModelFrames) {
    lftest::TempDir tmp;
    {
        RunWriter w(tmp / "run_a");
        for (int i = 0; i < 10; ++i) {
            Sample s = nominal(i * 33, i);
            if (i == 4) s.speed_mps = 0.0;
            Frame f(160, 120, 0);
            for (int y = 80; y < 120; ++y) {
                for (int x = 40 + 8 * i; x < 46 + 8 * i; ++x) f.at(x, y) = 255;
            }
            w.append(s, f);
        }
    }
    DatasetOptions opt;
    const Dataset single = load_dataset(std::vector{tmp / "run_a"}, opt);
    EXPECT_EQ(single.source_rows, 10u);
    EXPECT_EQ(single.filtered_rows, 9u);
    ASSERT_EQ(single.samples.size(), 9u);
    EXPECT_EQ(single.samples[0].frames[0].width, kModelWidth);
    EXPECT_EQ(single.samples[0].frames[0].height, kModelHeight);

    opt.arch = Arch::Sequence;
    const Dataset seq = load_dataset(std::vector{tmp / "run_a"}, opt);
    // The dropped row splits the run into 4 and 5 contiguous rows.
    ASSERT_EQ(seq.samples.size(), 2u + 3u);
    for (const auto& s : seq.samples) {
        ASSERT_EQ(s.frames.size(), 3u);
        const auto it = std::find_if(single.samples.begin(), single.samples.end(),
                                     [&](const LabeledSample& x) { return x.frames[0].same_pixels(s.frames[2]); });
        ASSERT_NE(it, single.samples.end());
        EXPECT_EQ(it->steer_deg, s.steer_deg);
    }
    const Dataset m = mirrored(single);
    EXPECT_EQ(m.samples.size(), 18u);
    EXPECT_EQ(m.groups.size(), 18u);
    EXPECT_EQ(m.groups[0], m.groups[9]);
}
