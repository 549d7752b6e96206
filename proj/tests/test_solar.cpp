#include <gtest/gtest.h>

#include <chrono>
#include <random>
#include <thread>

#include <httplib.h>

#include "streetlight/solar.hpp"
#include "streetlight/solar_fetch.hpp"
#include "streetlight/time.hpp"
#include "support/almanac_oracle.hpp"

using namespace streetlight;

namespace {

SolarTimes solar_or_fail(const GeoLocation& loc, CivilDate d) {
    auto r = compute_solar_times(loc, d);
    if (!std::holds_alternative<SolarTimes>(r)) ADD_FAILURE() << "unexpected NoEvent on " << format_date(d);
    return std::get<SolarTimes>(r);
}

// Unrounded, so neighbouring days near the solstice do not tie.
double day_length_minutes(const GeoLocation& loc, CivilDate d) {
    auto set = detail::horizon_crossing(loc, d, +1);
    auto rise = detail::horizon_crossing(loc, d, -1);
    return std::get<double>(set) - std::get<double>(rise);
}

}  // namespace

TEST(TimeOfDay, RangeEnforced) {
    EXPECT_THROW(TimeOfDay(1440), std::out_of_range);
    EXPECT_THROW(TimeOfDay(-1), std::out_of_range);
    EXPECT_EQ(TimeOfDay(0).str(), "00:00");
    EXPECT_EQ(TimeOfDay(1439).str(), "23:59");
    EXPECT_EQ(TimeOfDay::wrap(-1).str(), "23:59");
    EXPECT_EQ(TimeOfDay::wrap(1441).str(), "00:01");
}

TEST(TimeOfDay, ParseStrict) {
    EXPECT_EQ(TimeOfDay::parse("18:49"), TimeOfDay::hm(18, 49));
    EXPECT_FALSE(TimeOfDay::parse("24:00"));
    EXPECT_FALSE(TimeOfDay::parse("7:00"));
    EXPECT_FALSE(TimeOfDay::parse("07:60"));
    EXPECT_FALSE(TimeOfDay::parse("07-00"));
}

TEST(TimeOfDay, WrapAroundInterval) {
    const auto on = TimeOfDay::hm(18, 0), off = TimeOfDay::hm(6, 0);
    EXPECT_TRUE(in_interval(TimeOfDay::hm(23, 59), on, off));
    EXPECT_TRUE(in_interval(TimeOfDay::hm(18, 0), on, off));
    EXPECT_FALSE(in_interval(TimeOfDay::hm(6, 0), on, off));
    EXPECT_FALSE(in_interval(TimeOfDay::hm(12, 0), on, off));
    EXPECT_TRUE(in_interval(TimeOfDay::hm(2, 0), TimeOfDay::hm(1, 0), TimeOfDay::hm(4, 0)));
    EXPECT_FALSE(in_interval(TimeOfDay::hm(4, 0), TimeOfDay::hm(1, 0), TimeOfDay::hm(4, 0)));
    EXPECT_FALSE(in_interval(TimeOfDay::hm(4, 0), TimeOfDay::hm(4, 0), TimeOfDay::hm(4, 0)));
}

TEST(Timestamp, IsoRoundTrip) {
    auto t = Timestamp::at(make_date(2019, 7, 22), TimeOfDay::hm(22, 0), 30);
    EXPECT_EQ(t.iso(), "2019-07-22T22:00:30");
    EXPECT_EQ(Timestamp::parse(t.iso()), t);
    EXPECT_EQ(Timestamp::parse("2019-07-22T22:00"), t + -30);
    EXPECT_FALSE(Timestamp::parse("2019-07-22 22"));
    auto before_epoch = Timestamp::at(make_date(1950, 1, 1), TimeOfDay::hm(3, 4));
    EXPECT_EQ(before_epoch.iso(), "1950-01-01T03:04:00");
}

TEST(Rtc, YearRollover) {
    auto t = Timestamp::at(make_date(2019, 12, 31), TimeOfDay::hm(23, 59));
    EXPECT_EQ(rtc_tick(t, 120).iso(), "2020-01-01T00:01:00");
    Rtc rtc(t);
    EXPECT_EQ(rtc.tick(120).iso(), "2020-01-01T00:01:00");
}

TEST(Rtc, LeapDayRollover) {
    auto t = Timestamp::at(make_date(2020, 2, 28), TimeOfDay::hm(23, 59));
    EXPECT_EQ(rtc_tick(t, 60).iso(), "2020-02-29T00:00:00");
    EXPECT_EQ(rtc_tick(t, 60 + 86400).iso(), "2020-03-01T00:00:00");
}

TEST(Rtc, LinearDrift) {
    const auto start = Timestamp::at(make_date(2019, 1, 1), TimeOfDay(0));
    Rtc rtc(start, 8.0);
    for (int k = 0; k < 30 * 24; ++k) rtc.tick(3600);
    EXPECT_EQ(rtc.now() - rtc.true_time(), 240);
}

TEST(Rtc, NonPositiveStepRejected) {
    Rtc rtc(Timestamp{});
    EXPECT_THROW(rtc.tick(0), std::invalid_argument);
    EXPECT_THROW(rtc_tick(Timestamp{}, -5), std::invalid_argument);
}

TEST(Rtc, StepsComposeProperty) {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> n_dist(1, 5000);
    std::uniform_int_distribution<std::int64_t> start_dist(-2'000'000'000LL, 4'000'000'000LL);
    for (int trial = 0; trial < 200; ++trial) {
        Timestamp t{start_dist(rng)};
        const int n = n_dist(rng);
        Timestamp stepped = t;
        for (int k = 0; k < n; ++k) stepped = rtc_tick(stepped, 60);
        EXPECT_EQ(stepped, rtc_tick(t, 60LL * n));
        EXPECT_EQ(stepped.iso(), Timestamp::parse(stepped.iso())->iso());
    }
}

TEST(GeoLocation, RangesEnforced) {
    EXPECT_THROW(GeoLocation::make(91, 0, 0), std::out_of_range);
    EXPECT_THROW(GeoLocation::make(0, -181, 0), std::out_of_range);
    EXPECT_THROW(GeoLocation::make(0, 0, 841), std::out_of_range);
    EXPECT_NO_THROW(GeoLocation::make(-90, 180, -840));
}

TEST(SolarTimes, EquinoxAtEquator) {
    auto st = solar_or_fail(GeoLocation::make(0, 0, 0), make_date(2019, 3, 20));
    EXPECT_NEAR(st.sunrise_next.minutes(), 6 * 60, 10);
    // Solar noon is 12:07 (equation of time) and the -0.833 deg horizon adds
    // another 3.3 min, so sunset lands at 18:11, just outside 18:00 +/- 10.
    EXPECT_EQ(st.sunset, TimeOfDay::hm(18, 11));
    EXPECT_EQ(st.sunrise_next, TimeOfDay::hm(6, 4));
    EXPECT_EQ(st.source, SolarSource::Computed);
}

TEST(SolarTimes, MirpurMatchesOracle) {
    const auto loc = GeoLocation::make(23.79, 90.40, 360);
    auto st = solar_or_fail(loc, make_date(2019, 7, 22));
    auto ref = oracle::scan(2019, 7, 22, 23.79, 90.40, 360);
    ASSERT_TRUE(ref);
    EXPECT_LE(std::abs(oracle::dial_diff(st.sunset.minutes(), ref->sunset_minutes)), 2.0);
    EXPECT_LE(std::abs(oracle::dial_diff(st.sunrise_next.minutes(), ref->sunrise_next_minutes)), 2.0);
    // Dhaka late July: sunset around 18:45, sunrise around 05:25
    EXPECT_NEAR(st.sunset.minutes(), 18 * 60 + 45, 5);
    EXPECT_NEAR(st.sunrise_next.minutes(), 5 * 60 + 25, 5);
}

TEST(SolarTimes, PolarCases) {
    auto summer = compute_solar_times(GeoLocation::make(80, 0, 0), make_date(2019, 6, 21));
    ASSERT_TRUE(std::holds_alternative<NoEvent>(summer));
    EXPECT_EQ(std::get<NoEvent>(summer), NoEvent::PolarDay);
    auto winter = compute_solar_times(GeoLocation::make(80, 0, 0), make_date(2019, 12, 21));
    ASSERT_TRUE(std::holds_alternative<NoEvent>(winter));
    EXPECT_EQ(std::get<NoEvent>(winter), NoEvent::PolarNight);
    auto south = compute_solar_times(GeoLocation::make(-80, 0, 0), make_date(2019, 6, 21));
    EXPECT_EQ(std::get<NoEvent>(south), NoEvent::PolarNight);
}

TEST(SolarTimes, DateRangeEnforced) {
    EXPECT_THROW(compute_solar_times(GeoLocation{}, make_date(1899, 12, 31)), std::out_of_range);
    EXPECT_THROW(compute_solar_times(GeoLocation{}, make_date(2101, 1, 1)), std::out_of_range);
    EXPECT_NO_THROW(compute_solar_times(GeoLocation{}, make_date(2100, 12, 31)));
}

TEST(SolarTimes, OracleAgreementSample) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> lat(-60.0, 60.0), lon(-180.0, 180.0);
    std::uniform_int_distribution<int> day(0, 365 * 100);
    const auto base = days_since_epoch(make_date(1950, 1, 1));
    for (int k = 0; k < 100; ++k) {
        const double la = lat(rng), lo = lon(rng);
        const int off = static_cast<int>(std::lround(lo / 15.0)) * 60;
        const CivilDate d = date_from_days(base + day(rng));
        auto st = solar_or_fail(GeoLocation::make(la, lo, off), d);
        auto ref = oracle::scan(static_cast<int>(d.year()), static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()),
                                la, lo, off);
        ASSERT_TRUE(ref);
        EXPECT_LE(std::abs(oracle::dial_diff(st.sunset.minutes(), ref->sunset_minutes)), 2.0)
            << la << "," << lo << " " << format_date(d);
        EXPECT_LE(std::abs(oracle::dial_diff(st.sunrise_next.minutes(), ref->sunrise_next_minutes)), 2.0)
            << la << "," << lo << " " << format_date(d);
    }
}

TEST(SolarTimes, LongestDayNearJuneSolstice) {
    const auto loc = GeoLocation::make(45.0, 10.0, 60);
    CivilDate best{};
    double best_len = -1;
    for (int k = 0; k < 365; ++k) {
        CivilDate d = add_days(make_date(2019, 1, 1), k);
        double len = day_length_minutes(loc, d);
        if (len > best_len) {
            best_len = len;
            best = d;
        }
    }
    auto delta = days_since_epoch(best) - days_since_epoch(make_date(2019, 6, 21));
    EXPECT_LE(std::abs(delta), 4) << format_date(best);
}

TEST(Schedule, Validation) {
    ScheduleTable t;
    EXPECT_FALSE(t.validation_error());
    t.preset_off = t.preset_on;
    EXPECT_EQ(t.validation_error(), "empty interval");
    t = {};
    t.fetch_time = TimeOfDay::hm(7, 59);
    EXPECT_TRUE(t.validation_error());
    t.fetch_time = TimeOfDay::hm(16, 0);
    EXPECT_FALSE(t.validation_error());
    t.sleep_window = SleepWindow{TimeOfDay::hm(1, 0), TimeOfDay::hm(1, 0)};
    EXPECT_EQ(t.validation_error(), "empty sleep window");
}

TEST(EffectiveTimes, SemiAutoUsesPreset) {
    auto r = effective_times(Mode::SemiAuto, ScheduleTable{}, std::nullopt, make_date(2019, 7, 22));
    EXPECT_EQ(std::get<EffectiveTimes>(r),
              (EffectiveTimes{TimeOfDay::hm(18, 0), TimeOfDay::hm(6, 0), std::nullopt, Provenance::Preset}));
}

TEST(EffectiveTimes, FullAutoStaleCacheIsMissing) {
    const auto today = make_date(2019, 7, 22);
    SolarTimes yesterday{add_days(today, -1), TimeOfDay::hm(18, 49), TimeOfDay::hm(5, 22), SolarSource::Computed, {}};
    auto r = effective_times(Mode::FullAuto, ScheduleTable{}, yesterday, today);
    ASSERT_TRUE(std::holds_alternative<MissingTimes>(r));
    EXPECT_EQ(std::get<MissingTimes>(r).wanted, today);
    EXPECT_TRUE(std::holds_alternative<MissingTimes>(effective_times(Mode::FullAuto, ScheduleTable{}, std::nullopt, today)));
}

TEST(EffectiveTimes, FullAutoFreshCache) {
    const auto today = make_date(2019, 7, 22);
    SolarTimes fresh{today, TimeOfDay::hm(18, 49), TimeOfDay::hm(5, 22), SolarSource::Computed, {}};
    auto r = effective_times(Mode::FullAuto, ScheduleTable{}, fresh, today);
    EXPECT_EQ(std::get<EffectiveTimes>(r),
              (EffectiveTimes{TimeOfDay::hm(18, 49), TimeOfDay::hm(5, 22), std::nullopt, Provenance::Solar}));
}

TEST(EffectiveTimes, OperativeDateSwitchesAtFetchTime) {
    const auto d = make_date(2019, 7, 22);
    const auto fetch = TimeOfDay::hm(10, 0);
    EXPECT_EQ(operative_solar_date(Timestamp::at(d, TimeOfDay::hm(9, 59)), fetch), add_days(d, -1));
    EXPECT_EQ(operative_solar_date(Timestamp::at(d, TimeOfDay::hm(10, 0)), fetch), d);
    EXPECT_EQ(operative_solar_date(Timestamp::at(d, TimeOfDay::hm(3, 0)), fetch), add_days(d, -1));
}

TEST(SolarBody, ParseAndReject) {
    auto ok = parse_solar_body(R"({"sunset":"18:49","sunrise":"05:22"})");
    ASSERT_TRUE(std::holds_alternative<SolarPair>(ok));
    EXPECT_EQ(std::get<SolarPair>(ok).sunset, TimeOfDay::hm(18, 49));
    EXPECT_EQ(std::get<SolarPair>(ok).sunrise, TimeOfDay::hm(5, 22));
    auto reordered = parse_solar_body(R"({"sunrise":"05:22","sunset":"18:49"})");
    EXPECT_TRUE(std::holds_alternative<SolarPair>(reordered));
    EXPECT_EQ(std::get<FetchError>(parse_solar_body(R"({"sunset":"18:49"})")), FetchError::BadBody);
    EXPECT_EQ(std::get<FetchError>(parse_solar_body(R"({"sunset":"18:49","sunrise":"25:00"})")), FetchError::BadBody);
    EXPECT_EQ(std::get<FetchError>(parse_solar_body("not json")), FetchError::BadBody);
    EXPECT_EQ(format_solar_body(TimeOfDay::hm(18, 49), TimeOfDay::hm(5, 22)), R"({"sunset":"18:49","sunrise":"05:22"})");
}

class SolarHttp : public ::testing::Test {
protected:
    void SetUp() override {
        server_.Get("/solar", solar_stub_handler(360));
        server_.Get("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    void TearDown() override {
        server_.stop();
        thread_.join();
    }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

TEST_F(SolarHttp, FetchMatchesComputed) {
    const auto loc = GeoLocation::make(23.79, 90.40, 360);
    const auto d = make_date(2019, 7, 22);
    const auto now = Timestamp::at(d, TimeOfDay::hm(10, 0));
    auto fetched = fetch_solar_times(endpoint(), loc, d, now);
    ASSERT_TRUE(std::holds_alternative<SolarTimes>(fetched));
    auto computed = solar_or_fail(loc, d);
    const auto& st = std::get<SolarTimes>(fetched);
    EXPECT_EQ(st.sunset, computed.sunset);
    EXPECT_EQ(st.sunrise_next, computed.sunrise_next);
    EXPECT_EQ(st.source, SolarSource::Fetched);
    EXPECT_EQ(st.acquired_at, now);
}

TEST_F(SolarHttp, ServerErrorIsBadStatus) {
    httplib::Client c(endpoint());
    EXPECT_EQ(c.Get("/broken")->status, 500);
    // polar query answers 422
    auto polar = fetch_solar_times(endpoint(), GeoLocation::make(80, 0, 360), make_date(2019, 6, 21), Timestamp{});
    EXPECT_EQ(std::get<FetchError>(polar), FetchError::BadStatus);
}

TEST(SolarFetch, UnreachableIsTimeout) {
    // Port 9 on loopback is closed in the sandbox; the connection is refused at once.
    auto r = fetch_solar_times("http://127.0.0.1:9", GeoLocation{}, make_date(2019, 7, 22), Timestamp{},
                               std::chrono::milliseconds(300));
    EXPECT_EQ(std::get<FetchError>(r), FetchError::Timeout);
}

TEST(SolarFetch, DeadlineAndCancel) {
    // A server that accepts and never answers.
    httplib::Server slow;
    std::atomic<bool> release{false};
    slow.Get("/solar", [&](const httplib::Request&, httplib::Response& res) {
        while (!release) std::this_thread::sleep_for(std::chrono::milliseconds(10));
        res.set_content("{}", "application/json");
    });
    const int port = slow.bind_to_any_port("127.0.0.1");
    std::thread th([&] { slow.listen_after_bind(); });
    slow.wait_until_ready();
    const std::string ep = "http://127.0.0.1:" + std::to_string(port);

    auto t0 = std::chrono::steady_clock::now();
    auto r = fetch_solar_times(ep, GeoLocation{}, make_date(2019, 7, 22), Timestamp{}, std::chrono::milliseconds(200));
    auto elapsed = std::chrono::steady_clock::now() - t0;
    EXPECT_EQ(std::get<FetchError>(r), FetchError::Timeout);
    EXPECT_LT(elapsed, std::chrono::seconds(2));

    SolarFetchClient client(ep);
    std::thread canceller([&] {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        client.cancel();
    });
    t0 = std::chrono::steady_clock::now();
    auto c = client.fetch(GeoLocation{}, make_date(2019, 7, 22), Timestamp{}, std::chrono::seconds(10));
    elapsed = std::chrono::steady_clock::now() - t0;
    canceller.join();
    EXPECT_TRUE(std::holds_alternative<FetchError>(c));
    EXPECT_LT(elapsed, std::chrono::seconds(5));

    release = true;
    slow.stop();
    th.join();
}
