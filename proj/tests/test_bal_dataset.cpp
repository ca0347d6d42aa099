#include <gtest/gtest.h>
#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracle.hpp"
#include "sqrtba/bal_problem.hpp"
#include "sqrtba/synthetic.hpp"

using namespace sqrtba;

namespace {

// header plus a body of the stated size with trivial values
std::string synthetic_bal_text(std::size_t np, std::size_t nl, std::size_t nr) {
  std::ostringstream os;
  os << np << ' ' << nl << ' ' << nr << '\n';
  for (std::size_t o = 0; o < nr; ++o)
    os << o % np << ' ' << o % nl << " 1.5 -2.5\n";
  for (std::size_t i = 0; i < np; ++i)
    os << "0\n0\n0\n0\n0\n0\n500\n0\n0\n";
  for (std::size_t j = 0; j < nl; ++j) os << "1\n2\n-10\n";
  return os.str();
}

CameraParams identity_camera() {
  CameraParams c;
  c.focal = 500;
  return c;
}

Observation obs(std::size_t cam, std::size_t lm) {
  return Observation{cam, lm, Eigen::Vector2d(1.0, 2.0)};
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("sqrtba_test_" + name);
}

}  // namespace

TEST(BalParse, LadybugSizedHeader) {
  std::ostringstream os;
  write_bal(os, ladybug49_surrogate());
  const BaProblem p = parse_bal_string(os.str());
  EXPECT_EQ(p.num_cameras(), 49u);
  EXPECT_EQ(p.num_landmarks(), 7766u);
  EXPECT_EQ(p.num_observations(), 31812u);
}

TEST(BalParse, DubrovnikSizedHeader) {
  const BaProblem p = parse_bal_string(synthetic_bal_text(16, 22106, 83718));
  EXPECT_EQ(p.num_cameras(), 16u);
  EXPECT_EQ(p.num_landmarks(), 22106u);
  EXPECT_EQ(p.num_observations(), 83718u);
  EXPECT_EQ(p.observations()[5].camera_index, 5u);
  EXPECT_EQ(p.observations()[5].landmark_index, 5u);
}

TEST(BalParse, MinimalFileParsesButPreprocessingRejects) {
  const BaProblem p = parse_bal_string(synthetic_bal_text(1, 1, 1));
  EXPECT_EQ(p.num_observations(), 1u);
  EXPECT_THROW(preprocess(p, PreprocessOptions{}), Error);
}

TEST(BalParse, ErrorsCarryLineNumbers) {
  try {
    parse_bal_string("a b c\n");
    FAIL() << "expected parse error";
  } catch (const BalParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
  try {
    parse_bal_string("1 1 1\n0 3 1 2\n");
    FAIL() << "expected parse error";
  } catch (const BalParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::string text = synthetic_bal_text(2, 3, 4);
  text.resize(text.size() - 8);
  EXPECT_THROW(parse_bal_string(text), BalParseError);
}

TEST(BalParse, WriteParseRoundTrip) {
  test::Rng rng(3);
  const BaProblem p = test::random_small_problem(rng);
  std::ostringstream os;
  write_bal(os, p);
  const BaProblem q = parse_bal_string(os.str());
  ASSERT_EQ(q.num_observations(), p.num_observations());
  for (std::size_t i = 0; i < p.num_cameras(); ++i)
    EXPECT_LT((p.cameras()[i].to_vector() - q.cameras()[i].to_vector())
                  .cwiseAbs().maxCoeff(), 1e-12);
  for (std::size_t j = 0; j < p.num_landmarks(); ++j)
    EXPECT_LT((p.landmarks()[j] - q.landmarks()[j]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BalParse, ReadsGzip) {
  const std::string text = synthetic_bal_text(3, 4, 8);
  const auto path = temp_path("small.txt.gz");
  gzFile f = gzopen(path.c_str(), "wb");
  ASSERT_NE(f, nullptr);
  gzwrite(f, text.data(), unsigned(text.size()));
  gzclose(f);
  const BaProblem p = load_bal(path);
  EXPECT_EQ(p, parse_bal_string(text));
  std::filesystem::remove(path);
}

TEST(BalParse, RejectsBzip2WithMessage) {
  const auto path = temp_path("small.txt.bz2");
  std::ofstream(path) << "BZh91AY&SY";
  try {
    load_bal(path);
    FAIL() << "expected error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("bzip2"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
}

TEST(NormalizeGauge, CentredCloudWithMad100IsUnchanged) {
  std::vector<Eigen::Vector3d> lms{{100, 0, 0}, {-100, 0, 0}, {0, 0, 0}};
  const BaProblem p({identity_camera()}, lms, {obs(0, 0), obs(0, 1), obs(0, 2)});
  GaugeNormalization info;
  const BaProblem q = normalize_gauge(p, &info);
  EXPECT_DOUBLE_EQ(info.scale, 1.0);
  for (std::size_t j = 0; j < 3; ++j)
    EXPECT_LT((q.landmarks()[j] - lms[j]).norm(), 1e-12);
}

TEST(NormalizeGauge, HandComputedMedianAndMad) {
  // median (2,0,0); L1 deviations 2, 0, 2 -> MAD 2 -> scale 50
  std::vector<Eigen::Vector3d> lms{{0, 0, 0}, {2, 0, 0}, {4, 0, 0}};
  const BaProblem p({identity_camera()}, lms, {obs(0, 0), obs(0, 1), obs(0, 2)});
  GaugeNormalization info;
  const BaProblem q = normalize_gauge(p, &info);
  EXPECT_EQ(info.median, Eigen::Vector3d(2, 0, 0));
  EXPECT_DOUBLE_EQ(info.scale, 50.0);
  EXPECT_LT((q.landmarks()[0] - Eigen::Vector3d(-100, 0, 0)).norm(), 1e-12);
  EXPECT_LT((q.landmarks()[1] - Eigen::Vector3d(0, 0, 0)).norm(), 1e-12);
  EXPECT_LT((q.landmarks()[2] - Eigen::Vector3d(100, 0, 0)).norm(), 1e-12);
}

TEST(NormalizeGauge, DegenerateCloudReportedWithoutRescale) {
  std::vector<Eigen::Vector3d> lms(3, Eigen::Vector3d(1, 2, 3));
  const BaProblem p({identity_camera()}, lms, {obs(0, 0), obs(0, 1), obs(0, 2)});
  GaugeNormalization info;
  normalize_gauge(p, &info);
  EXPECT_TRUE(info.degenerate);
  EXPECT_DOUBLE_EQ(info.scale, 1.0);
}

TEST(NormalizeGauge, IdempotentAndResidualInvariant) {
  test::Rng rng(11);
  const BaProblem p = test::random_small_problem(rng);
  const BaProblem q = normalize_gauge(p);
  const BaProblem qq = normalize_gauge(q);
  for (std::size_t j = 0; j < q.num_landmarks(); ++j)
    EXPECT_LT((q.landmarks()[j] - qq.landmarks()[j]).norm(), 1e-9);
  for (const Observation& o : p.observations()) {
    const auto r0 = residual(p.cameras()[o.camera_index],
                             p.landmarks()[o.landmark_index], o.pixel);
    const auto r1 = residual(q.cameras()[o.camera_index],
                             q.landmarks()[o.landmark_index], o.pixel);
    EXPECT_LT((r0 - r1).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Perturb, ZeroSigmaSeedsAndDeterminism) {
  test::Rng rng(5);
  const BaProblem p = test::random_small_problem(rng);
  EXPECT_EQ(perturb(p, 0.0, 1), p);
  EXPECT_EQ(perturb(p, 0.1, 7), perturb(p, 0.1, 7));
  const BaProblem a = perturb(p, 0.1, 7);
  const BaProblem b = perturb(p, 0.1, 8);
  bool differ = false;
  for (std::size_t j = 0; j < a.num_landmarks(); ++j)
    differ |= a.landmarks()[j] != b.landmarks()[j];
  EXPECT_TRUE(differ);
  // positions only: orientations and intrinsics untouched
  for (std::size_t i = 0; i < p.num_cameras(); ++i) {
    EXPECT_EQ(a.cameras()[i].rotation, p.cameras()[i].rotation);
    EXPECT_EQ(a.cameras()[i].focal, p.cameras()[i].focal);
  }
  EXPECT_THROW(perturb(p, -1.0, 1), Error);
}

TEST(FilterObservations, AllValidUnchanged) {
  std::vector<Eigen::Vector3d> lms{{0, 0, -5}, {1, 0, -6}};
  const BaProblem p({identity_camera(), identity_camera()}, lms,
                    {obs(0, 0), obs(1, 0), obs(0, 1), obs(1, 1)});
  EXPECT_EQ(filter_observations(p, 1e-8), p);
}

TEST(FilterObservations, LandmarkWithOneInvalidOfTwoRemoved) {
  CameraParams flipped = identity_camera();
  flipped.translation = Eigen::Vector3d(0, 0, 10);  // sees z=-5 behind it
  std::vector<Eigen::Vector3d> lms{{0, 0, -5}, {1, 0, -12}};
  const BaProblem p({identity_camera(), flipped}, lms,
                    {obs(0, 0), obs(1, 0), obs(0, 1), obs(1, 1)});
  FilterStats stats;
  const BaProblem q = filter_observations(p, 1e-8, &stats);
  EXPECT_EQ(q.num_landmarks(), 1u);
  EXPECT_EQ(q.num_observations(), 2u);
  EXPECT_EQ(q.landmarks()[0], lms[1]);
  EXPECT_EQ(stats.removed_landmarks, 1u);
  EXPECT_EQ(stats.removed_observations, 2u);
}

TEST(FilterObservations, CascadingRemovalAndEmptyResult) {
  CameraParams flipped = identity_camera();
  flipped.translation = Eigen::Vector3d(0, 0, 10);
  // landmark 0 keeps 2 of 3, landmark 1 drops to 1 and goes as well
  std::vector<Eigen::Vector3d> lms{{0, 0, -8}, {0, 0, -5}};
  std::vector<CameraParams> cams{identity_camera(), identity_camera(), flipped};
  const BaProblem p(cams, lms,
                    {obs(0, 0), obs(1, 0), obs(2, 0), obs(0, 1), obs(2, 1)});
  const BaProblem q = filter_observations(p, 1e-8);
  EXPECT_EQ(q.num_landmarks(), 1u);
  EXPECT_EQ(q.num_observations(), 2u);
  EXPECT_EQ(q.num_cameras(), 2u);

  const BaProblem bad({flipped, flipped}, {{0, 0, -5}}, {obs(0, 0), obs(1, 0)});
  EXPECT_THROW(filter_observations(bad, 1e-8), Error);
}

TEST(Preprocess, PostconditionsAndPurity) {
  const BaProblem raw = ladybug49_surrogate();
  PreprocessOptions opts;
  const BaProblem a = preprocess(raw, opts);
  EXPECT_EQ(a, preprocess(raw, opts));
  for (std::size_t j = 0; j < a.num_landmarks(); ++j)
    EXPECT_GE(a.landmark_observations(j).size(), 2u);
  for (const Observation& o : a.observations()) {
    const CameraParams& c = a.cameras()[o.camera_index];
    const Eigen::Vector3d P =
        rotate<double>(c.rotation, a.landmarks()[o.landmark_index]) + c.translation;
    EXPECT_GT(-P.z(), opts.z_min);
  }
}
