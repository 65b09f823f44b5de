#include "vosap/vision.hpp"

#include "vosap/belief.hpp"
#include "vosap/errors.hpp"
#include "vosap/prediction.hpp"
#include "vosap/rng.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace vosap {

namespace {

// Max response for unit-contrast input: |g| <= 0.5 through the /8 Sobel
// kernels, so lambda <= 0.25 and R <= 0.25^2 (1 - 4k).
double max_possible_response(double k) { return 0.0625 * (1.0 - 4.0 * k); }

double subpixel_offset(double rm, double r0, double rp) {
    const double denom = rm - 2.0 * r0 + rp;
    if (std::abs(denom) < 1e-18) return 0.0;
    const double off = 0.5 * (rm - rp) / denom;
    return std::clamp(off, -0.5, 0.5);
}

}  // namespace

std::vector<Corner> detect_features(const GrayImage& img, const HarrisParams& params) {
    const int w = img.width, h = img.height;
    std::vector<Corner> out;
    if (w < 7 || h < 7) return out;

    const std::size_t n = static_cast<std::size_t>(w) * h;
    std::vector<float> gx(n, 0.0f), gy(n, 0.0f);
    std::vector<std::uint8_t> gvalid(n, 0);

    for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
            bool ok = true;
            for (int dy = -1; dy <= 1 && ok; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    if (!img.is_valid(x + dx, y + dy)) {
                        ok = false;
                        break;
                    }
            if (!ok) continue;
            const std::size_t i = img.idx(x, y);
            const float a = img.at(x - 1, y - 1), b = img.at(x, y - 1), c = img.at(x + 1, y - 1);
            const float d = img.at(x - 1, y), f = img.at(x + 1, y);
            const float g = img.at(x - 1, y + 1), e = img.at(x, y + 1), i2 = img.at(x + 1, y + 1);
            gx[i] = ((c + 2.0f * f + i2) - (a + 2.0f * d + g)) / 8.0f;
            gy[i] = ((g + 2.0f * e + i2) - (a + 2.0f * b + c)) / 8.0f;
            gvalid[i] = 1;
        }
    }

    // Structure tensor over a 3x3 window, then the Harris response.
    std::vector<double> resp(n, -1.0);
    const double k = params.k;
    for (int y = 2; y < h - 2; ++y) {
        for (int x = 2; x < w - 2; ++x) {
            double sxx = 0.0, sxy = 0.0, syy = 0.0;
            bool ok = true;
            for (int dy = -1; dy <= 1 && ok; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const std::size_t i = img.idx(x + dx, y + dy);
                    if (!gvalid[i]) {
                        ok = false;
                        break;
                    }
                    const double vx = gx[i], vy = gy[i];
                    sxx += vx * vx;
                    sxy += vx * vy;
                    syy += vy * vy;
                }
            }
            if (!ok) continue;
            sxx /= 9.0;
            sxy /= 9.0;
            syy /= 9.0;
            const double det = sxx * syy - sxy * sxy;
            const double tr = sxx + syy;
            resp[img.idx(x, y)] = det - k * tr * tr;
        }
    }

    const double threshold = params.response_rel_threshold * max_possible_response(k);
    const int r = params.nms_radius;
    for (int y = 2 + r; y < h - 2 - r; ++y) {
        for (int x = 2 + r; x < w - 2 - r; ++x) {
            const double v = resp[img.idx(x, y)];
            if (v < threshold) continue;
            bool maximal = true;
            for (int dy = -r; dy <= r && maximal; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    if (resp[img.idx(x + dx, y + dy)] >= v) {
                        maximal = false;
                        break;
                    }
                }
            }
            if (!maximal) continue;
            Corner c;
            c.u = x + subpixel_offset(resp[img.idx(x - 1, y)], v, resp[img.idx(x + 1, y)]);
            c.v = y + subpixel_offset(resp[img.idx(x, y - 1)], v, resp[img.idx(x, y + 1)]);
            c.strength = v;
            out.push_back(c);
        }
    }

    std::sort(out.begin(), out.end(), [](const Corner& a, const Corner& b) {
        if (a.strength != b.strength) return a.strength > b.strength;
        if (a.v != b.v) return a.v < b.v;
        return a.u < b.u;
    });
    if (static_cast<int>(out.size()) > params.max_corners)
        out.resize(static_cast<std::size_t>(params.max_corners));
    return out;
}

// Zero-mean, unit-norm 9x9 patch sampled in a frame aligned with the local
// intensity-centroid orientation, so mast pan swings between views do not
// decorrelate the descriptors. Corners whose support leaves the image,
// touches invalid pixels, or is flat get no descriptor.
void add_descriptors(FeatureSet& fs, const GrayImage& img, const PatchParams& pp) {
    const int r = pp.radius;
    // Orientation comes from the intensity centroid over a wider disc than
    // the descriptor itself; small supports flip unstably on repetitive
    // texture.
    const int moment_r = 2 * r + 1;
    const int guard = std::max(moment_r,
                               static_cast<int>(std::ceil(r * 1.4142135623730951)) + 1);
    for (int ci = 0; ci < static_cast<int>(fs.corners.size()); ++ci) {
        const auto& c = fs.corners[static_cast<std::size_t>(ci)];
        const int x0 = static_cast<int>(std::lround(c.u));
        const int y0 = static_cast<int>(std::lround(c.v));
        if (x0 - guard < 0 || x0 + guard >= img.width || y0 - guard < 0 ||
            y0 + guard >= img.height)
            continue;
        bool ok = true;
        double m01 = 0.0, m10 = 0.0;
        for (int dy = -moment_r; dy <= moment_r && ok; ++dy) {
            for (int dx = -moment_r; dx <= moment_r; ++dx) {
                if (!img.is_valid(x0 + dx, y0 + dy)) {
                    ok = false;
                    break;
                }
                if (dx * dx + dy * dy > moment_r * moment_r) continue;
                const float v = img.at(x0 + dx, y0 + dy);
                m10 += dx * v;
                m01 += dy * v;
            }
        }
        if (!ok) continue;
        const double theta = std::atan2(m01, m10);
        const double ct = std::cos(theta), st = std::sin(theta);

        std::array<float, 81> d{};
        double sum = 0.0;
        int idx = 0;
        for (int dy = -r; dy <= r && ok; ++dy) {
            for (int dx = -r; dx <= r; ++dx) {
                const double px = x0 + ct * dx - st * dy;
                const double py = y0 + st * dx + ct * dy;
                const auto v = img.sample_bilinear(px, py);
                if (!v) {
                    ok = false;
                    break;
                }
                d[static_cast<std::size_t>(idx++)] = *v;
                sum += *v;
            }
        }
        if (!ok) continue;
        const double mean = sum / 81.0;
        double norm2 = 0.0;
        for (auto& v : d) {
            v = static_cast<float>(v - mean);
            norm2 += static_cast<double>(v) * v;
        }
        if (norm2 < 1e-12) continue;
        const auto inv = static_cast<float>(1.0 / std::sqrt(norm2));
        for (auto& v : d) v *= inv;
        fs.descriptors.push_back(d);
        fs.descriptor_corner.push_back(ci);
    }
}

FeatureSet extract_features(const GrayImage& img, const HarrisParams& hp,
                            const PatchParams& pp) {
    FeatureSet fs;
    fs.corners = detect_features(img, hp);
    add_descriptors(fs, img, pp);
    return fs;
}

std::vector<Match> match_feature_sets(const FeatureSet& a, const FeatureSet& b,
                                      double ratio) {
    std::vector<Match> out;
    const int na = static_cast<int>(a.descriptors.size());
    const int nb = static_cast<int>(b.descriptors.size());
    if (na == 0 || nb == 0) return out;

    // One pass over the distance matrix keeps per-row best/second-best for a
    // and per-column best for b.
    std::vector<int> best_b(static_cast<std::size_t>(nb), -1);
    std::vector<double> best_b_d(static_cast<std::size_t>(nb),
                                 std::numeric_limits<double>::infinity());
    std::vector<int> best_a(static_cast<std::size_t>(na), -1);
    std::vector<double> best_a_d1(static_cast<std::size_t>(na),
                                  std::numeric_limits<double>::infinity());
    std::vector<double> best_a_d2(static_cast<std::size_t>(na),
                                  std::numeric_limits<double>::infinity());

    for (int i = 0; i < na; ++i) {
        const float* da = a.descriptors[static_cast<std::size_t>(i)].data();
        for (int j = 0; j < nb; ++j) {
            const float* db = b.descriptors[static_cast<std::size_t>(j)].data();
            float dot = 0.0f;
            for (int t = 0; t < 81; ++t) dot += da[t] * db[t];
            const double d = 1.0 - static_cast<double>(dot);
            if (d < best_a_d1[static_cast<std::size_t>(i)]) {
                best_a_d2[static_cast<std::size_t>(i)] = best_a_d1[static_cast<std::size_t>(i)];
                best_a_d1[static_cast<std::size_t>(i)] = d;
                best_a[static_cast<std::size_t>(i)] = j;
            } else if (d < best_a_d2[static_cast<std::size_t>(i)]) {
                best_a_d2[static_cast<std::size_t>(i)] = d;
            }
            if (d < best_b_d[static_cast<std::size_t>(j)]) {
                best_b_d[static_cast<std::size_t>(j)] = d;
                best_b[static_cast<std::size_t>(j)] = i;
            }
        }
    }

    for (int i = 0; i < na; ++i) {
        const int best = best_a[static_cast<std::size_t>(i)];
        if (best < 0) continue;
        if (best_b[static_cast<std::size_t>(best)] != i) continue;  // mutual check
        const double d1 = best_a_d1[static_cast<std::size_t>(i)];
        const double d2 = best_a_d2[static_cast<std::size_t>(i)];
        const bool pass = std::isinf(d2) ? (d1 < 0.5) : (d1 < ratio * d2);
        if (!pass) continue;
        Match m;
        m.a = a.descriptor_corner[static_cast<std::size_t>(i)];
        m.b = b.descriptor_corner[static_cast<std::size_t>(best)];
        m.score = d1;
        out.push_back(m);
    }
    return out;
}

std::vector<Match> describe_and_match(const GrayImage& img_a,
                                      const std::vector<Corner>& corners_a,
                                      const GrayImage& img_b,
                                      const std::vector<Corner>& corners_b,
                                      const PatchParams& params) {
    FeatureSet fa, fb;
    fa.corners = corners_a;
    fb.corners = corners_b;
    add_descriptors(fa, img_a, params);
    add_descriptors(fb, img_b, params);
    return match_feature_sets(fa, fb, params.ratio);
}

namespace {

struct Normalization {
    Eigen::Matrix3d t;
};

Normalization normalize_points(const std::vector<Eigen::Vector2d>& pts) {
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= static_cast<double>(pts.size());
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += (p - centroid).norm();
    mean_dist /= static_cast<double>(pts.size());
    const double s = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
    Normalization n;
    n.t << s, 0.0, -s * centroid.x(), 0.0, s, -s * centroid.y(), 0.0, 0.0, 1.0;
    return n;
}

}  // namespace

Homography dlt_homography(const std::vector<PointPair>& pairs) {
    const std::size_t n = pairs.size();
    if (n < 4) throw DegenerateMatches("dlt_homography needs at least 4 pairs");

    std::vector<Eigen::Vector2d> pa(n), pb(n);
    for (std::size_t i = 0; i < n; ++i) {
        pa[i] = pairs[i].a;
        pb[i] = pairs[i].b;
    }
    const Normalization na = normalize_points(pa);
    const Normalization nb = normalize_points(pb);

    Eigen::MatrixXd a(2 * static_cast<Eigen::Index>(n), 9);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d x = na.t * Eigen::Vector3d(pa[i].x(), pa[i].y(), 1.0);
        const Eigen::Vector3d y = nb.t * Eigen::Vector3d(pb[i].x(), pb[i].y(), 1.0);
        const auto r0 = 2 * static_cast<Eigen::Index>(i);
        a.row(r0) << x.x(), x.y(), 1.0, 0.0, 0.0, 0.0, -y.x() * x.x(), -y.x() * x.y(),
            -y.x();
        a.row(r0 + 1) << 0.0, 0.0, 0.0, x.x(), x.y(), 1.0, -y.y() * x.x(), -y.y() * x.y(),
            -y.y();
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    // The design matrix must have rank 8; collinear or coincident points
    // collapse it further.
    if (sv(7) < 1e-10 * sv(0))
        throw DegenerateMatches("dlt_homography: rank-deficient configuration");

    const Eigen::VectorXd hv = svd.matrixV().col(8);
    Eigen::Matrix3d hn;
    hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);

    Homography out;
    out.h = nb.t.inverse() * hn * na.t;
    return out.normalized();
}

double symmetric_transfer_error(const Homography& h, const Homography& h_inv,
                                const PointPair& pair) {
    const Eigen::Vector2d fwd = h.apply(pair.a.x(), pair.a.y());
    const Eigen::Vector2d bwd = h_inv.apply(pair.b.x(), pair.b.y());
    const double ef = (fwd - pair.b).norm();
    const double eb = (bwd - pair.a).norm();
    return std::max(ef, eb);
}

RansacResult ransac_homography(const std::vector<PointPair>& pairs,
                               const RansacParams& params) {
    const int n = static_cast<int>(pairs.size());
    if (n < 4) throw DegenerateMatches("ransac_homography needs at least 4 matches");

    Rng rng(derive_seed(params.seed, 0x4a5acu));
    std::vector<int> best_inliers;
    int needed = params.iters;

    for (int iter = 0; iter < params.iters && iter < needed; ++iter) {
        int idx[4];
        int got = 0;
        while (got < 4) {
            const int cand = static_cast<int>(rng.uniform_index(static_cast<std::uint32_t>(n)));
            bool dup = false;
            for (int t = 0; t < got; ++t)
                if (idx[t] == cand) dup = true;
            if (!dup) idx[got++] = cand;
        }
        std::vector<PointPair> minimal = {pairs[static_cast<std::size_t>(idx[0])],
                                          pairs[static_cast<std::size_t>(idx[1])],
                                          pairs[static_cast<std::size_t>(idx[2])],
                                          pairs[static_cast<std::size_t>(idx[3])]};
        Homography h;
        try {
            h = dlt_homography(minimal);
        } catch (const DegenerateMatches&) {
            continue;
        }
        Homography hi;
        try {
            hi = invert_homography(h);
        } catch (const SingularHomography&) {
            continue;
        }

        std::vector<int> inliers;
        for (int i = 0; i < n; ++i)
            if (symmetric_transfer_error(h, hi, pairs[static_cast<std::size_t>(i)]) <
                params.inlier_px)
                inliers.push_back(i);

        // Local refit: a least-squares model over the trial consensus counts
        // noticeably more inliers than the noisy 4-point fit.
        if (inliers.size() >= 8 && inliers.size() > best_inliers.size()) {
            std::vector<PointPair> support;
            support.reserve(inliers.size());
            for (int i : inliers) support.push_back(pairs[static_cast<std::size_t>(i)]);
            try {
                const Homography hr = dlt_homography(support);
                const Homography hri = invert_homography(hr);
                std::vector<int> refined;
                for (int i = 0; i < n; ++i)
                    if (symmetric_transfer_error(hr, hri,
                                                 pairs[static_cast<std::size_t>(i)]) <
                        params.inlier_px)
                        refined.push_back(i);
                if (refined.size() > inliers.size()) inliers = std::move(refined);
            } catch (const Error&) {
            }
        }

        if (inliers.size() > best_inliers.size()) {
            best_inliers = std::move(inliers);
            // Adaptive termination, 99.9% confidence.
            const double w = static_cast<double>(best_inliers.size()) / n;
            const double p_outlier = 1.0 - w * w * w * w;
            if (p_outlier < 1e-12) {
                needed = iter + 1;
            } else {
                const double trials = std::log(1e-3) / std::log(p_outlier);
                needed = static_cast<int>(std::min<double>(params.iters,
                                                           std::ceil(trials)));
            }
        }

        if (params.hopeless_after > 0 && iter + 1 >= params.hopeless_after &&
            static_cast<int>(best_inliers.size()) < params.min_inliers / 2)
            break;
    }

    if (static_cast<int>(best_inliers.size()) < params.min_inliers)
        throw NoConsensus("ransac_homography: best consensus " +
                          std::to_string(best_inliers.size()) + " < min_inliers");

    std::vector<PointPair> support;
    support.reserve(best_inliers.size());
    for (int i : best_inliers) support.push_back(pairs[static_cast<std::size_t>(i)]);
    RansacResult out;
    out.h = dlt_homography(support);
    const Homography hi = invert_homography(out.h);
    for (int i = 0; i < n; ++i)
        if (symmetric_transfer_error(out.h, hi, pairs[static_cast<std::size_t>(i)]) <
            params.inlier_px)
            out.inliers.push_back(i);
    return out;
}

namespace {

// Recovers the camera center from a ground->pixel homography H ~ K [r1 r2 t]
// using the known plane z = 0. The open sign is fixed by requiring the
// camera above the plane.
Eigen::Vector3d camera_center_from_ground_homography(const Homography& h,
                                                     const CameraIntrinsics& intr) {
    const Eigen::Matrix3d m = intr.k_matrix().inverse() * h.h;
    const double scale = 0.5 * (m.col(0).norm() + m.col(1).norm());
    if (scale < 1e-12) throw SingularHomography("degenerate euclidean homography");

    for (const double sign : {1.0, -1.0}) {
        const Eigen::Matrix3d ms = m * (sign / scale);
        Eigen::Vector3d r1 = ms.col(0);
        r1.normalize();
        Eigen::Vector3d r2 = ms.col(1) - r1.dot(ms.col(1)) * r1;
        r2.normalize();
        const Eigen::Vector3d r3 = r1.cross(r2);
        Eigen::Matrix3d r_cw;
        r_cw.col(0) = r1;
        r_cw.col(1) = r2;
        r_cw.col(2) = ms.col(2);  // translation column, t = -R c
        const Eigen::Vector3d t = r_cw.col(2);
        Eigen::Matrix3d rot;
        rot.col(0) = r1;
        rot.col(1) = r2;
        rot.col(2) = r3;
        const Eigen::Vector3d c = -rot.transpose() * t;
        if (c.z() > 0.0) return c;
    }
    throw SingularHomography("no physically valid decomposition");
}

}  // namespace

VoResult vo_from_features(const FeatureSet& fi, const FeatureSet& fj,
                          const CameraIntrinsics& intr,
                          const ExtendedState& assumed_state_i, const VoParams& params) {
    VoResult out;
    const auto matches = match_feature_sets(fi, fj, params.patch.ratio);
    if (static_cast<int>(matches.size()) < std::max(4, params.ransac.min_inliers)) {
        out.omega = 0;
        return out;
    }

    std::vector<PointPair> pairs;
    pairs.reserve(matches.size());
    for (const auto& m : matches) {
        PointPair p;
        p.a = {fi.corners[static_cast<std::size_t>(m.a)].u,
               fi.corners[static_cast<std::size_t>(m.a)].v};
        p.b = {fj.corners[static_cast<std::size_t>(m.b)].u,
               fj.corners[static_cast<std::size_t>(m.b)].v};
        pairs.push_back(p);
    }

    RansacResult rr;
    try {
        rr = ransac_homography(pairs, params.ransac);
    } catch (const DegenerateMatches&) {
        return out;
    } catch (const NoConsensus&) {
        return out;
    }

    try {
        const Homography g_i = ground_homography(intr, assumed_state_i);
        const Homography g_j = compose(rr.h, g_i);
        const Eigen::Vector3d ci = camera_center_from_ground_homography(g_i, intr);
        const Eigen::Vector3d cj = camera_center_from_ground_homography(g_j, intr);
        out.displacement = (cj - ci).norm();
        out.delta = (cj - ci).head<2>();
    } catch (const Error&) {
        return out;
    }

    out.h = rr.h;
    out.inliers = static_cast<int>(rr.inliers.size());
    out.omega = out.inliers;
    out.ok = out.inliers >= params.ransac.min_inliers;
    return out;
}

VoResult visual_odometry(const GrayImage& img_i, const GrayImage& img_j,
                         const CameraIntrinsics& intr,
                         const ExtendedState& assumed_state_i, const VoParams& params) {
    const FeatureSet fi = extract_features(img_i, params.harris, params.patch);
    const FeatureSet fj = extract_features(img_j, params.harris, params.patch);
    return vo_from_features(fi, fj, intr, assumed_state_i, params);
}

Homography align_to_map(const GrayImage& img, const BeliefGrid& grid,
                        const ExtendedState& predicted_state,
                        const CameraIntrinsics& intr, const AlignParams& params) {
    const SyntheticImage ref = render_synthetic(grid, predicted_state, intr);
    if (ref.valid_fraction < params.min_valid)
        throw AlignmentFailed("reference render has insufficient coverage");

    const FeatureSet fi = extract_features(img, params.vo.harris, params.vo.patch);
    const FeatureSet fr = extract_features(ref.img, params.vo.harris, params.vo.patch);
    const auto matches = match_feature_sets(fi, fr, params.vo.patch.ratio);
    if (static_cast<int>(matches.size()) < std::max(4, params.vo.ransac.min_inliers))
        throw AlignmentFailed("too few matches against the reference view");

    std::vector<PointPair> pairs;
    pairs.reserve(matches.size());
    for (const auto& m : matches) {
        PointPair p;
        p.a = {fi.corners[static_cast<std::size_t>(m.a)].u,
               fi.corners[static_cast<std::size_t>(m.a)].v};
        p.b = {fr.corners[static_cast<std::size_t>(m.b)].u,
               fr.corners[static_cast<std::size_t>(m.b)].v};
        pairs.push_back(p);
    }

    RansacResult rr;
    try {
        rr = ransac_homography(pairs, params.vo.ransac);
    } catch (const Error& e) {
        throw AlignmentFailed(std::string("consensus failed: ") + e.what());
    }

    // Reference pixels live exactly in the predicted view, so ground <- image
    // is the predicted inverse projection chained with the relative map.
    const Homography ground_from_ref =
        invert_homography(ground_homography(intr, predicted_state));
    return compose(ground_from_ref, rr.h);
}

}  // namespace vosap
