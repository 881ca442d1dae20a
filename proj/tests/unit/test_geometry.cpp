#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "doctest.h"
#include "stream/common/errors.hpp"
#include "stream/geometry/events.hpp"
#include "stream/geometry/formats.hpp"
#include "stream/geometry/points.hpp"
#include "stream/verify/geometry_oracles.hpp"

using namespace stream;
using namespace stream::geometry;

namespace {

const std::filesystem::path kFixtures = STREAM_FIXTURE_DIR;

PointCloud random_cloud(CounterRng& rng, std::size_t n) {
  PointCloud pts(n);
  for (auto& p : pts) p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  return pts;
}

// Coordinates on a coarse grid, so equal coordinates and equal distances are common.
PointCloud grid_cloud(CounterRng& rng, std::size_t n) {
  PointCloud pts(n);
  for (auto& p : pts) {
    p = {static_cast<double>(rng.below(4)), static_cast<double>(rng.below(4)), static_cast<double>(rng.below(4))};
  }
  return pts;
}

template <class T>
std::vector<T> shuffled(std::vector<T> v, CounterRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  return v;
}

layer::Vector coordinate_encoder(const Point3& p) {
  layer::Vector v(4);
  v << p.x, p.y, p.z, p.x * p.y - p.z;
  return v;
}

EventStream load_csv(const std::string& name) {
  std::ifstream in(kFixtures / name);
  REQUIRE(in);
  return read_events_csv(in);
}

}  // namespace

TEST_CASE("serialize_points") {
  CounterRng rng(41);
  const auto emb = AxisEmbedding::init(4);

  SUBCASE("one point gives three tokens") {
    const auto seq = serialize_points({{0.5, -1.0, 2.0}}, coordinate_encoder, emb);
    CHECK(seq.size() == 3);
    CHECK(seq.t == std::vector<double>{0.5, -1.0, 2.0});
    CHECK(seq.segment_starts == std::vector<std::size_t>{1, 2});
    const layer::Vector u = coordinate_encoder({0.5, -1.0, 2.0});
    for (int s = 0; s < 3; ++s) {
      CHECK((seq.features.row(s).transpose() - (u.array() + 0.5 * (s - 1)).matrix()).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  SUBCASE("four points against a hand sort") {
    const PointCloud pts{{3, 0, 1}, {1, 2, 0}, {2, 3, 3}, {0, 1, 2}};
    const auto seq = serialize_points(pts, coordinate_encoder, emb);
    CHECK(seq.t == std::vector<double>{0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3});
    // X segment visits points 3, 1, 2, 0
    const std::size_t x_order[] = {3, 1, 2, 0};
    for (int i = 0; i < 4; ++i) CHECK(seq.features(i, 0) == pts[x_order[i]].x - 0.5);
    const auto gaps = seq.gaps();
    CHECK(gaps == std::vector<double>{0, 1, 1, 1, 0, 1, 1, 1, 0, 1, 1, 1});
  }

  SUBCASE("permutation invariance and per-segment order") {
    for (int trial = 0; trial < 100; ++trial) {
      const auto pts = trial % 2 ? random_cloud(rng, 20) : grid_cloud(rng, 20);
      const auto base = serialize_points(pts, coordinate_encoder, emb);
      const auto perm = serialize_points(shuffled(pts, rng), coordinate_encoder, emb);
      CHECK(base.t == perm.t);
      CHECK(base.features == perm.features);
      CHECK(base.segment_starts == std::vector<std::size_t>{20, 40});
      for (std::size_t k = 1; k < base.size(); ++k) {
        if (!base.starts_segment(k)) CHECK(base.t[k] >= base.t[k - 1]);
      }
    }
  }

  CHECK_THROWS_AS(serialize_points({}, coordinate_encoder, emb), ContractError);
  CHECK_THROWS_AS(serialize_points({{0, 0, 0}}, coordinate_encoder, AxisEmbedding::init(3)), ContractError);
}

TEST_CASE("fps") {
  CounterRng rng(42);
  const auto pts = random_cloud(rng, 8);
  CHECK(fps(pts, 1, 5) == std::vector<std::size_t>{5});
  auto all = fps(pts, 8, 0);
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});
  CHECK(fps(pts, 3, 0) == verify::fps_reference(pts, 3, 0));
  CHECK_THROWS_AS(fps(pts, 9, 0), ContractError);
  CHECK_THROWS_AS(fps(pts, 0, 0), ContractError);

  // ties go to the smaller index: the square corners 1 and 2 are equally far from 0
  const PointCloud square{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  CHECK(fps(square, 2, 0) == std::vector<std::size_t>{0, 3});
  CHECK(fps(square, 3, 0) == std::vector<std::size_t>{0, 3, 1});

  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(128);
    const auto cloud = trial % 2 ? random_cloud(rng, n) : grid_cloud(rng, n);
    const std::size_t k = 1 + rng.below(n);
    const std::size_t seed = rng.below(n);
    CHECK(fps(cloud, k, seed) == verify::fps_reference(cloud, k, seed));
  }
}

TEST_CASE("fps selections do not depend on input order") {
  CounterRng rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    const auto pts = random_cloud(rng, 40);
    std::vector<std::size_t> perm(40);
    std::iota(perm.begin(), perm.end(), 0);
    perm = shuffled(perm, rng);
    PointCloud moved(40);
    for (std::size_t i = 0; i < 40; ++i) moved[i] = pts[perm[i]];
    std::set<Point3> a, b;
    for (auto i : fps(pts, 10, canonical_seed(pts))) a.insert(pts[i]);
    for (auto i : fps(moved, 10, canonical_seed(moved))) b.insert(moved[i]);
    CHECK(a == b);
  }
  CHECK(canonical_seed({{1, 0, 0}, {0, 5, 5}, {0, 5, 1}}) == 2);
}

TEST_CASE("knn_group") {
  CounterRng rng(44);
  const auto pts = random_cloud(rng, 10);
  for (auto& g : knn_group(pts, {0, 3, 7}, 1)) CHECK(g.size() == 1);
  CHECK(knn_group(pts, {0, 3, 7}, 1) == std::vector<std::vector<std::size_t>>{{0}, {3}, {7}});
  const PointCloud line{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}};
  CHECK(knn_group(line, {0}, 2) == std::vector<std::vector<std::size_t>>{{0, 1}});
  CHECK(knn_group(line, {1}, 3) == std::vector<std::vector<std::size_t>>{{1, 0, 2}});
  CHECK_THROWS_AS(knn_group(line, {0}, 5), ContractError);

  const auto cloud = random_cloud(rng, 64);
  const auto centers = fps(cloud, 8, canonical_seed(cloud));
  CHECK(knn_group(cloud, centers, 8) == verify::knn_reference(cloud, centers, 8));
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(128);
    const auto c = trial % 2 ? random_cloud(rng, n) : grid_cloud(rng, n);
    std::vector<std::size_t> ctr;
    for (int i = 0; i < 4; ++i) ctr.push_back(rng.below(n));
    const std::size_t k = 1 + rng.below(n);
    CHECK(knn_group(c, ctr, k) == verify::knn_reference(c, ctr, k));
  }
}

TEST_CASE("tokenize_events") {
  CHECK(token_id({0, 1, 0, 0}, 2, 2) == 1);
  CHECK(token_id({0, 0, 1, 1}, 2, 2) == 6);
  CHECK_THROWS_AS(token_id({0, 2, 0, 0}, 2, 2), DataError);

  EventStream same{2, 2, {{5, 0, 0, 0}, {5, 1, 1, 1}}};
  const auto toks = tokenize_events(same);
  CHECK(toks.size() == 2);
  CHECK(toks.t[1] - toks.t[0] == 0.0);

  const auto fixture = load_csv("ten_events.csv");
  const auto ids = tokenize_events(fixture).ids;
  CHECK(ids == std::vector<std::uint32_t>{0, 15, 9, 18, 23, 4, 17, 10, 22, 7});
  CHECK(tokenize_events(fixture).t[9] == doctest::Approx(999e-6));

  std::set<std::uint32_t> seen;
  for (std::uint16_t x = 0; x < 5; ++x)
    for (std::uint16_t y = 0; y < 3; ++y)
      for (std::uint8_t p = 0; p < 2; ++p) seen.insert(token_id({0, x, y, p}, 5, 3));
  CHECK(seen.size() == 30);
  CHECK(*seen.rbegin() == 29);

  EventStream backwards{2, 2, {{5, 0, 0, 0}, {4, 0, 0, 0}}};
  CHECK_THROWS_AS(tokenize_events(backwards), OrderError);
}

TEST_CASE("event_cutmix") {
  const auto a = load_csv("cutmix_a.csv");
  const auto b = load_csv("cutmix_b.csv");

  SUBCASE("empty window keeps a") {
    const auto r = event_cutmix(a, b, 20, 0);
    CHECK(r.stream == a);
    CHECK(r.lambda == 0.0);
  }
  SUBCASE("full window gives b") {
    const auto r = event_cutmix(a, b, 0, duration(a));
    CHECK(r.lambda == 1.0);
    std::vector<std::uint64_t> t;
    for (const auto& e : r.stream.events) t.push_back(e.t);
    CHECK(t == std::vector<std::uint64_t>{0, 5, 12, 25, 40});
    CHECK(r.stream.events[0].y == 3);
  }
  SUBCASE("hand merge") {
    // window [5, 25) drops a@10, a@20 and brings in b@105, b@112 shifted to 5, 12
    const auto r = event_cutmix(a, b, 5, 20);
    const std::vector<EventRecord> expected{
        {0, 0, 0, 0}, {5, 1, 3, 1}, {12, 2, 3, 1}, {30, 3, 0, 0}, {40, 0, 1, 0}};
    CHECK(r.stream.events == expected);
    CHECK(r.lambda == doctest::Approx(0.4));
    const auto label = mix_labels({1, 0}, {0, 1}, r.lambda);
    CHECK(label[0] == doctest::Approx(0.6));
    CHECK(label[1] == doctest::Approx(0.4));
  }
  SUBCASE("equal times keep a first") {
    EventStream x{4, 4, {{0, 0, 0, 0}, {10, 1, 1, 0}}};
    EventStream y{4, 4, {{50, 2, 2, 1}, {60, 3, 3, 1}}};
    const auto r = event_cutmix(x, y, 10, 1);  // y@60 sits at offset 10 and replaces x@10
    CHECK(r.stream.events.size() == 2);
    CHECK(r.stream.events[1] == EventRecord{10, 3, 3, 1});
    const auto r2 = event_cutmix(x, y, 0, 1);  // y@50 replaces x@0 at t=0
    CHECK(r2.stream.events[0].x == 2);
    CHECK(r2.lambda == 0.5);
  }
  SUBCASE("random windows keep lambda a convex weight equal to the b fraction") {
    CounterRng rng(45);
    for (int trial = 0; trial < 200; ++trial) {
      const auto r = event_cutmix(a, b, rng);
      CHECK(r.lambda >= 0.0);
      CHECK(r.lambda <= 1.0);
      std::size_t from_b = 0;
      for (const auto& e : r.stream.events) from_b += e.polarity;  // b's events have polarity 1
      if (!r.stream.events.empty()) {
        CHECK(r.lambda == static_cast<double>(from_b) / static_cast<double>(r.stream.events.size()));
      }
      CHECK(std::is_sorted(r.stream.events.begin(), r.stream.events.end(),
                           [](const EventRecord& l, const EventRecord& q) { return l.t < q.t; }));
    }
  }
  CHECK_THROWS_AS(event_cutmix(EventStream{4, 4, {}}, b, 0, 0), ContractError);
}

TEST_CASE("augment_events") {
  const auto s = load_csv("ten_events.csv");
  CounterRng rng(46);
  AugmentConfig off{0, 0, 0, 2, 0, 0.9, 1.1};
  CHECK(augment_events(s, rng, off) == s);

  EventStream w4{4, 1, {{0, 0, 0, 0}, {1, 3, 0, 0}}};
  CHECK(flip_x(w4).events[0].x == 3);
  CHECK(flip_x(w4).events[1].x == 0);
  CHECK(translate(w4, 2, 0).events[1].x == 3);
  CHECK(translate(w4, -5, 0).events[0].x == 0);

  EventStream gaps{4, 1, {{100, 0, 0, 0}, {110, 0, 0, 0}, {130, 0, 0, 0}, {130, 0, 0, 0}}};
  const auto scaled = time_scale(gaps, 1.5);
  for (std::size_t i = 1; i < gaps.size(); ++i) {
    CHECK(scaled.events[i].t - scaled.events[i - 1].t == (gaps.events[i].t - gaps.events[i - 1].t) * 3 / 2);
  }
  // offsets round to whole microseconds, so a gap moves at most 1 from the exact product
  const auto rounded = time_scale(s, 1.07);
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double exact = 1.07 * static_cast<double>(s.events[i].t - s.events[i - 1].t);
    CHECK(std::abs(static_cast<double>(rounded.events[i].t - rounded.events[i - 1].t) - exact) <= 1.0);
  }

  AugmentConfig on{1, 1, 1, 2, 1, 0.9, 1.1};
  for (int trial = 0; trial < 50; ++trial) {
    const auto out = augment_events(s, rng, on);
    CHECK_NOTHROW(out.validate());
    CHECK(out.size() == s.size());
  }
  CounterRng r1(7), r2(7);
  CHECK(augment_events(s, r1, AugmentConfig{}) == augment_events(s, r2, AugmentConfig{}));
}

TEST_CASE("native event format") {
  const std::vector<std::uint8_t> golden{
      0x53, 0x54, 0x45, 0x56, 0x01, 0x00, 0x00, 0x00, 0x80, 0x02, 0x00, 0x00, 0xe0, 0x01, 0x00, 0x00,
      0xcb, 0x04, 0xfb, 0x71, 0x1f, 0x01, 0x00, 0x00, 0x7f, 0x02, 0x11, 0x00, 0x01, 0x00, 0x00, 0x00};
  const EventStream one{640, 480, {{1234567890123ull, 639, 17, 1}}};
  CHECK(encode_events(one) == golden);
  CHECK(read_file(kFixtures / "one_event.bin") == golden);
  CHECK(decode_events(golden) == one);

  auto bad = golden;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_events(bad), DataError);
  auto short_file = golden;
  short_file.pop_back();
  CHECK_THROWS_AS(decode_events(short_file), DataError);
  auto out_of_bounds = golden;
  out_of_bounds[25] = 0x03;  // x = 0x037f
  CHECK_THROWS_AS(decode_events(out_of_bounds), DataError);
}

TEST_CASE("csv round trips") {
  std::ifstream in(kFixtures / "ten_events.csv");
  const std::string original((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::istringstream src(original);
  const auto s = read_events_csv(src);
  CHECK(s.size() == 10);
  const auto back = decode_events(encode_events(s));
  std::ostringstream out;
  write_events_csv(out, back);
  CHECK(out.str() == original);

  std::istringstream oob("# width=4 height=3\nt,x,y,polarity\n1,0,0,0\n2,4,0,0\n");
  try {
    read_events_csv(oob);
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(e.line() == 4);
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
  std::istringstream garbage("# width=4 height=3\nt,x,y,polarity\n1,0,zero,0\n");
  CHECK_THROWS_AS(read_events_csv(garbage), DataError);
  std::istringstream no_header("1,0,0,0\n");
  CHECK_THROWS_AS(read_events_csv(no_header), DataError);
}

TEST_CASE("point formats round trip") {
  CounterRng rng(47);
  const auto pts = random_cloud(rng, 25);
  CHECK(decode_points(encode_points(pts)) == pts);
  std::stringstream text;
  write_points_text(text, pts);
  CHECK(read_points_text(text) == pts);
  std::istringstream bad("1 2\n");
  CHECK_THROWS_AS(read_points_text(bad), DataError);
  CHECK_THROWS_AS(decode_points(std::vector<std::uint8_t>(23)), DataError);
}
