#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vosap/belief.hpp"
#include "vosap/errors.hpp"
#include "vosap/prediction.hpp"
#include "vosap/rng.hpp"
#include "vosap/vision.hpp"
#include "vosap/world.hpp"

#include <algorithm>
#include <cmath>

using namespace vosap;

namespace {

CameraIntrinsics default_intr() {
    return CameraIntrinsics::from_fov(640, 480, 82.0, 66.0);
}

ExtendedState make_state(double x, double y, double heading, double pan,
                         double tilt_deg) {
    ExtendedState s;
    s.body = {x, y, heading};
    s.mast = {pan, deg2rad(tilt_deg), 1.4};
    return s;
}

GrayImage square_image(int ox, int oy, int side, float bg = 0.0f, float fg = 1.0f) {
    GrayImage img(200, 160, bg);
    for (int y = oy; y < oy + side; ++y)
        for (int x = ox; x < ox + side; ++x) img.set(x, y, fg);
    return img;
}

GrayImage shift_image(const GrayImage& src, int dx, int dy) {
    GrayImage out(src.width, src.height, 0.0f);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) {
            const int sx = x - dx, sy = y - dy;
            if (sx >= 0 && sx < src.width && sy >= 0 && sy < src.height)
                out.set(x, y, src.at(sx, sy));
        }
    return out;
}

GrayImage noise_image(std::uint64_t seed, int w = 200, int h = 160) {
    GrayImage img(w, h);
    Rng rng(seed);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.set(x, y, static_cast<float>(rng.uniform()));
    return img;
}

Homography random_homography(Rng& rng) {
    Homography h;
    h.h << rng.uniform(0.8, 1.25), rng.uniform(-0.15, 0.15), rng.uniform(-30.0, 30.0),
        rng.uniform(-0.15, 0.15), rng.uniform(0.8, 1.25), rng.uniform(-30.0, 30.0),
        rng.uniform(-5e-5, 5e-5), rng.uniform(-5e-5, 5e-5), 1.0;
    return h;
}

std::vector<PointPair> synthesize_pairs(const Homography& h, int n, Rng& rng) {
    std::vector<PointPair> pairs;
    for (int i = 0; i < n; ++i) {
        PointPair p;
        p.a = {rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)};
        p.b = h.apply(p.a.x(), p.a.y());
        pairs.push_back(p);
    }
    return pairs;
}

double normalized_distance(const Homography& a, const Homography& b) {
    const Eigen::Matrix3d an = a.normalized().h / a.normalized().h.norm();
    const Eigen::Matrix3d bn = b.normalized().h / b.normalized().h.norm();
    return std::min((an - bn).norm(), (an + bn).norm());
}

}  // namespace

TEST_CASE("detector: constant image yields nothing") {
    const GrayImage img(100, 100, 0.5f);
    CHECK(detect_features(img, HarrisParams{}).empty());
}

TEST_CASE("detector: white square produces its four vertices") {
    const GrayImage img = square_image(60, 50, 40);
    const auto corners = detect_features(img, HarrisParams{});
    REQUIRE(corners.size() == 4);
    const double ex[4] = {60, 99, 60, 99};
    const double ey[4] = {50, 50, 89, 89};
    for (int i = 0; i < 4; ++i) {
        bool found = false;
        for (const auto& c : corners)
            if (std::abs(c.u - ex[i]) <= 1.0 && std::abs(c.v - ey[i]) <= 1.0) found = true;
        CHECK(found);
    }
}

TEST_CASE("detector: intensity scaling preserves the corner set and order") {
    // Binary noise: every response sits far above threshold even after the
    // 0.5^4 response scaling, so thresholding cannot cut the set.
    GrayImage img = noise_image(33);
    for (auto& p : img.pixels) p = p > 0.5f ? 0.9f : 0.1f;
    GrayImage half = img;
    for (auto& p : half.pixels) p *= 0.5f;

    HarrisParams hp;
    hp.max_corners = 10000;
    const auto a = detect_features(img, hp);
    const auto b = detect_features(half, hp);
    REQUIRE(a.size() == b.size());
    REQUIRE(a.size() > 50);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].u == doctest::Approx(b[i].u).epsilon(1e-9));
        CHECK(a[i].v == doctest::Approx(b[i].v).epsilon(1e-9));
    }
}

TEST_CASE("detector: invalid pixels never contribute") {
    GrayImage img = square_image(60, 50, 40);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (x > 80) img.valid[img.idx(x, y)] = 0;
    const auto corners = detect_features(img, HarrisParams{});
    for (const auto& c : corners) CHECK(c.u < 81.0);
}

TEST_CASE("matching: identical images match one-to-one at zero distance") {
    const GrayImage img = noise_image(9);
    const auto corners = detect_features(img, HarrisParams{});
    REQUIRE(corners.size() >= 10);
    const auto matches = describe_and_match(img, corners, img, corners, PatchParams{});
    CHECK(matches.size() >= corners.size() * 9 / 10);
    for (const auto& m : matches) {
        CHECK(m.a == m.b);
        CHECK(m.score < 1e-6);
    }
}

TEST_CASE("matching: translated image displaces matches by the shift") {
    const TerrainWorld world =
        generate_terrain(5, WorldSpec{Scenario::UniformRock, 22.0, 21.0, 0.01, 1.0});
    const auto intr = default_intr();
    const GrayImage img =
        capture_image(world, make_state(0, 0, 0, 0, 40.0), intr, {0.0, 0});
    const GrayImage moved = shift_image(img, 10, 0);
    const auto ca = detect_features(img, HarrisParams{});
    const auto cb = detect_features(moved, HarrisParams{});
    const auto matches = describe_and_match(img, ca, moved, cb, PatchParams{});
    REQUIRE(matches.size() >= 30);
    int good = 0;
    for (const auto& m : matches) {
        const double du = cb[static_cast<std::size_t>(m.b)].u -
                          ca[static_cast<std::size_t>(m.a)].u;
        const double dv = cb[static_cast<std::size_t>(m.b)].v -
                          ca[static_cast<std::size_t>(m.a)].v;
        if (std::abs(du - 10.0) <= 0.5 && std::abs(dv) <= 0.5) ++good;
    }
    CHECK(good >= static_cast<int>(matches.size() * 9 / 10));
}

TEST_CASE("matching: unrelated noise rarely survives the ratio test") {
    const GrayImage a = noise_image(11);
    const GrayImage b = noise_image(12);
    const auto ca = detect_features(a, HarrisParams{});
    const auto cb = detect_features(b, HarrisParams{});
    REQUIRE(ca.size() >= 50);
    const auto matches = describe_and_match(a, ca, b, cb, PatchParams{});
    CHECK(matches.size() < ca.size() / 10);
}

TEST_CASE("dlt: recovers exact homographies from four points") {
    Rng rng(101);
    for (int trial = 0; trial < 20; ++trial) {
        const Homography h = random_homography(rng);
        const auto pairs = synthesize_pairs(h, 4, rng);
        const Homography est = dlt_homography(pairs);
        CHECK(normalized_distance(h, est) < 1e-8);
    }
}

TEST_CASE("dlt: identity correspondences give the identity") {
    Rng rng(103);
    Homography id;
    const auto pairs = synthesize_pairs(id, 8, rng);
    const Homography est = dlt_homography(pairs);
    CHECK((est.h - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("dlt: collinear points are degenerate") {
    std::vector<PointPair> pairs;
    for (int i = 0; i < 6; ++i) {
        PointPair p;
        p.a = {10.0 * i, 20.0 * i};  // all on one line
        p.b = {10.0 * i + 5.0, 20.0 * i - 3.0};
        pairs.push_back(p);
    }
    CHECK_THROWS_AS((void)dlt_homography(pairs), DegenerateMatches);
    CHECK_THROWS_AS((void)dlt_homography(std::vector<PointPair>(3)), DegenerateMatches);
}

TEST_CASE("ransac: outlier-free input keeps every match and matches dlt") {
    Rng rng(107);
    const Homography h = random_homography(rng);
    const auto pairs = synthesize_pairs(h, 60, rng);
    RansacParams rp;
    rp.seed = 17;
    const RansacResult res = ransac_homography(pairs, rp);
    CHECK(res.inliers.size() == pairs.size());
    const Homography direct = dlt_homography(pairs);
    CHECK(normalized_distance(res.h, direct) < 1e-8);
}

TEST_CASE("ransac: tolerates 30% gross outliers") {
    Rng rng(109);
    int ok = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const Homography h = random_homography(rng);
        auto pairs = synthesize_pairs(h, 70, rng);
        for (int i = 0; i < 30; ++i) {
            PointPair p;
            p.a = {rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)};
            p.b = {rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)};
            pairs.push_back(p);
        }
        RansacParams rp;
        rp.seed = 1000 + static_cast<std::uint64_t>(trial);
        const RansacResult res = ransac_homography(pairs, rp);
        const Homography hi = invert_homography(res.h);
        double worst = 0.0;
        for (int i = 0; i < 70; ++i)
            worst = std::max(worst,
                             symmetric_transfer_error(res.h, hi,
                                                      pairs[static_cast<std::size_t>(i)]));
        if (worst < 0.5) ++ok;
    }
    CHECK(ok >= 19);
}

TEST_CASE("ransac: fewer than four matches is a precondition error") {
    CHECK_THROWS_AS((void)ransac_homography(std::vector<PointPair>(3), RansacParams{}),
                    DegenerateMatches);
}

TEST_CASE("ransac: deterministic for a fixed seed") {
    Rng rng(113);
    const Homography h = random_homography(rng);
    auto pairs = synthesize_pairs(h, 50, rng);
    for (int i = 0; i < 25; ++i) {
        PointPair p;
        p.a = {rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)};
        p.b = {rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0)};
        pairs.push_back(p);
    }
    RansacParams rp;
    rp.seed = 4242;
    const RansacResult a = ransac_homography(pairs, rp);
    const RansacResult b = ransac_homography(pairs, rp);
    CHECK(a.inliers == b.inliers);
    CHECK(a.h.h == b.h.h);
}

TEST_CASE("vo: identical images give zero displacement") {
    const TerrainWorld world =
        generate_terrain(7, WorldSpec{Scenario::UniformRock, 22.0, 21.0, 0.01, 1.0});
    const auto intr = default_intr();
    const auto s = make_state(0, 0, 0, 0, 38.0);
    const GrayImage img = capture_image(world, s, intr, {0.0, 0});
    const VoResult vo = visual_odometry(img, img, intr, s, VoParams{});
    CHECK(vo.ok);
    CHECK(vo.displacement < 1e-6);
}

TEST_CASE("vo: recovers a 0.2 m forward move on rock texture") {
    const TerrainWorld world =
        generate_terrain(7, WorldSpec{Scenario::UniformRock, 22.0, 21.0, 0.01, 1.0});
    const auto intr = default_intr();
    for (int trial = 0; trial < 5; ++trial) {
        const auto si = make_state(-1.0 + 0.4 * trial, 0.3 * trial, 0.2 * trial, 0, 38.0);
        auto sj = si;
        sj.body.x += 0.2 * std::cos(si.body.heading);
        sj.body.y += 0.2 * std::sin(si.body.heading);
        const GrayImage a = capture_image(world, si, intr, {0.0, 0});
        const GrayImage b = capture_image(world, sj, intr, {0.0, 1});
        const VoResult vo = visual_odometry(a, b, intr, si, VoParams{});
        REQUIRE(vo.ok);
        CHECK(vo.displacement > 0.18);
        CHECK(vo.displacement < 0.22);
    }
}

TEST_CASE("vo: uniform sand reports failure instead of throwing") {
    const TerrainWorld world =
        generate_terrain(7, WorldSpec{Scenario::UniformSand, 22.0, 21.0, 0.01, 1.0});
    const auto intr = default_intr();
    const auto si = make_state(0, 0, 0, 0, 36.0);
    auto sj = si;
    sj.body.x += 0.2;
    const GrayImage a = capture_image(world, si, intr, {0.0, 0});
    const GrayImage b = capture_image(world, sj, intr, {0.0, 1});
    const VoResult vo = visual_odometry(a, b, intr, si, VoParams{});
    CHECK_FALSE(vo.ok);
}

TEST_CASE("align_to_map: reproduces the state-derived registration") {
    const auto intr = default_intr();
    const TerrainWorld world =
        generate_terrain(19, WorldSpec{Scenario::UniformRock, 22.0, 21.0, 0.01, 1.0});
    const auto s = make_state(0, 0, 0, 0, 36.0);
    const GrayImage img = capture_image(world, s, intr, {0.0, 0});
    const std::vector<GrayImage> images = {img};
    const std::vector<ExtendedState> states = {s};
    const auto geometry = GridGeometry::cover(-8, -8, 8, 8, 0.02);
    const BeliefGrid grid = init_map(images, states, intr, NoiseParams{}, geometry);

    const Homography aligned = align_to_map(img, grid, s, intr, AlignParams{});
    const Homography state_derived = invert_homography(ground_homography(intr, s));

    // Ground reprojection of image points through both registrations.
    double worst = 0.0;
    for (int y = 260; y < 480; y += 40) {
        for (int x = 20; x < 640; x += 60) {
            const Eigen::Vector2d ga = aligned.apply(x, y);
            const Eigen::Vector2d gs = state_derived.apply(x, y);
            worst = std::max(worst, (ga - gs).norm());
        }
    }
    CHECK(worst < 0.01);  // half a 2 cm cell

    // A noiseless repeat of the registered image aligns identically, so the
    // relative homography between the two registrations is the identity.
    const Homography again = align_to_map(img, grid, s, intr, AlignParams{});
    const Homography rel = compose(invert_homography(aligned), again);
    CHECK((rel.h - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("align_to_map: uniform sand fails cleanly") {
    const auto intr = default_intr();
    const TerrainWorld world =
        generate_terrain(19, WorldSpec{Scenario::UniformSand, 22.0, 21.0, 0.01, 1.0});
    const auto s = make_state(0, 0, 0, 0, 36.0);
    const GrayImage img = capture_image(world, s, intr, {0.0, 0});
    const std::vector<GrayImage> images = {img};
    const std::vector<ExtendedState> states = {s};
    const auto geometry = GridGeometry::cover(-8, -8, 8, 8, 0.02);
    const BeliefGrid grid = init_map(images, states, intr, NoiseParams{}, geometry);
    CHECK_THROWS_AS((void)align_to_map(img, grid, s, intr, AlignParams{}),
                    AlignmentFailed);
}

TEST_CASE("dlt exactness across 100 random homographies") {
    Rng rng(211);
    for (int trial = 0; trial < 100; ++trial) {
        const Homography h = random_homography(rng);
        const auto pairs = synthesize_pairs(h, 12, rng);
        const Homography est = dlt_homography(pairs);
        CHECK(normalized_distance(h, est) < 1e-8);
    }
}
