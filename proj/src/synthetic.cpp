#include "sqrtba/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sqrtba {

namespace {

Eigen::Vector3d gaussian3(std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> n(0.0, sigma);
  return {n(rng), n(rng), n(rng)};
}

CameraParams make_camera(const Eigen::Vector3d& center,
                         const Eigen::Vector3d& rotation, double focal,
                         double k1, double k2) {
  CameraParams c;
  c.rotation = rotation;
  c.translation = -angle_axis_to_rotation(rotation) * center;
  c.focal = focal;
  c.k1 = k1;
  c.k2 = k2;
  return c;
}

void perturb_state(std::vector<CameraParams>& cameras,
                   std::vector<Eigen::Vector3d>& landmarks,
                   const SyntheticOptions& o, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& c : cameras) {
    c.rotation += gaussian3(rng, o.rotation_noise);
    c.translation += gaussian3(rng, o.translation_noise);
    c.focal *= 1.0 + o.intrinsics_noise * n(rng);
    c.k1 += o.intrinsics_noise * n(rng);
    c.k2 += 0.1 * o.intrinsics_noise * n(rng);
  }
  for (auto& p : landmarks) p += gaussian3(rng, o.landmark_noise);
}

Eigen::Vector2d observe(const CameraParams& cam, const Eigen::Vector3d& p,
                        const SyntheticOptions& o, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, o.pixel_noise);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::Vector2d px = project(cam, p) + Eigen::Vector2d(n(rng), n(rng));
  if (o.outlier_fraction > 0 && u(rng) < o.outlier_fraction) {
    std::uniform_real_distribution<double> off(-30.0, 30.0);
    px += Eigen::Vector2d(off(rng), off(rng));
  }
  return px;
}

}  // namespace

BaProblem random_problem(const SyntheticOptions& o, std::uint64_t seed) {
  if (o.num_cameras == 0 || o.num_landmarks == 0 || o.min_obs == 0 ||
      o.min_obs > o.max_obs)
    throw Error("invalid synthetic problem options");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  std::vector<CameraParams> cameras;
  for (std::size_t i = 0; i < o.num_cameras; ++i) {
    const Eigen::Vector3d center(u(rng), u(rng), 0.3 * u(rng));
    const Eigen::Vector3d rot = gaussian3(rng, 0.05);
    cameras.push_back(make_camera(center, rot, 500.0 + 50.0 * u(rng),
                                  -0.05 + 0.02 * u(rng), 0.01 * u(rng)));
  }
  std::vector<Eigen::Vector3d> landmarks;
  for (std::size_t j = 0; j < o.num_landmarks; ++j)
    landmarks.emplace_back(1.5 * u(rng), 1.5 * u(rng), -6.0 + u(rng));

  const std::size_t kmax = std::min(o.max_obs, o.num_cameras);
  const std::size_t kmin = std::min(o.min_obs, kmax);
  std::uniform_int_distribution<std::size_t> kd(kmin, kmax);
  std::vector<std::size_t> cams(o.num_cameras);
  std::vector<Observation> observations;
  for (std::size_t j = 0; j < o.num_landmarks; ++j) {
    std::iota(cams.begin(), cams.end(), 0);
    std::shuffle(cams.begin(), cams.end(), rng);
    const std::size_t k = kd(rng);
    std::sort(cams.begin(), cams.begin() + k);
    for (std::size_t a = 0; a < k; ++a)
      observations.push_back(
          {cams[a], j, observe(cameras[cams[a]], landmarks[j], o, rng)});
  }
  std::stable_sort(observations.begin(), observations.end(),
                   [](const Observation& a, const Observation& b) {
                     return a.camera_index < b.camera_index;
                   });
  perturb_state(cameras, landmarks, o, rng);
  return BaProblem(std::move(cameras), std::move(landmarks),
                   std::move(observations));
}

namespace {

constexpr std::size_t kSurrogateCameras = 49;
constexpr std::size_t kSurrogateLandmarks = 7766;
constexpr std::size_t kSurrogateObservations = 31812;
constexpr std::size_t kSurrogateMaxObs = 29;

bool rounds_to(double value, double target) {
  return std::abs(std::round(value * 10.0) / 10.0 - target) < 1e-9;
}

// Observation counts with the exact total and the ladybug49 statistics.
std::vector<std::size_t> surrogate_counts(std::mt19937_64& rng) {
  std::lognormal_distribution<double> logn(0.4, 1.05);
  while (true) {
    std::vector<std::size_t> k(kSurrogateLandmarks);
    for (auto& v : k)
      v = std::min<std::size_t>(2 + std::size_t(std::floor(logn(rng))),
                                kSurrogateMaxObs);
    k[0] = kSurrogateMaxObs;
    std::size_t sum = std::accumulate(k.begin(), k.end(), std::size_t(0));
    std::uniform_int_distribution<std::size_t> pick(1, k.size() - 1);
    while (sum != kSurrogateObservations) {
      std::size_t& v = k[pick(rng)];
      if (sum < kSurrogateObservations && v < kSurrogateMaxObs) {
        ++v;
        ++sum;
      } else if (sum > kSurrogateObservations && v > 2) {
        --v;
        --sum;
      }
    }
    double mean = double(sum) / double(k.size());
    double var = 0.0;
    for (auto v : k) var += (double(v) - mean) * (double(v) - mean);
    const double stddev = std::sqrt(var / double(k.size()));
    if (rounds_to(mean, 4.1) && rounds_to(stddev, 3.3)) return k;
  }
}

}  // namespace

BaProblem ladybug49_surrogate(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SyntheticOptions o;
  o.pixel_noise = 0.7;
  o.outlier_fraction = 0.01;
  o.landmark_noise = 0.05;
  o.rotation_noise = 1e-3;
  o.translation_noise = 0.02;
  o.intrinsics_noise = 5e-3;

  // cameras drive along x with small heading changes
  std::vector<CameraParams> cameras;
  const double spacing = 0.3;
  for (std::size_t i = 0; i < kSurrogateCameras; ++i) {
    const Eigen::Vector3d center(spacing * double(i), 0.05 * std::sin(0.3 * i),
                                 0.02 * u(rng));
    const Eigen::Vector3d rot(0.01 * u(rng), 0.02 * u(rng), 0.01 * u(rng));
    cameras.push_back(make_camera(center, rot, 500.0 + 20.0 * u(rng),
                                  -0.05 + 0.01 * u(rng), 0.005 * u(rng)));
  }

  const std::vector<std::size_t> counts = surrogate_counts(rng);
  std::vector<Eigen::Vector3d> landmarks;
  std::vector<Observation> observations;
  landmarks.reserve(kSurrogateLandmarks);
  for (std::size_t j = 0; j < kSurrogateLandmarks; ++j) {
    const std::size_t k = counts[j];
    std::uniform_int_distribution<std::size_t> first(0, kSurrogateCameras - k);
    const std::size_t s = first(rng);
    const double mid = spacing * (double(s) + 0.5 * double(k - 1));
    std::uniform_real_distribution<double> depth(8.0, 20.0);
    landmarks.emplace_back(mid + 1.5 * u(rng), 2.0 * u(rng), -depth(rng));
    for (std::size_t i = s; i < s + k; ++i)
      observations.push_back({i, j, observe(cameras[i], landmarks[j], o, rng)});
  }
  std::stable_sort(observations.begin(), observations.end(),
                   [](const Observation& a, const Observation& b) {
                     return a.camera_index < b.camera_index;
                   });
  perturb_state(cameras, landmarks, o, rng);
  return BaProblem(std::move(cameras), std::move(landmarks),
                   std::move(observations));
}

}  // namespace sqrtba
