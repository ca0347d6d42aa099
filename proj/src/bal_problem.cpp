#include "sqrtba/bal_problem.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace sqrtba {

std::string_view to_string(Precision p) {
  return p == Precision::kSingle ? "single" : "double";
}

Precision parse_precision(std::string_view s) {
  if (s == "single" || s == "float" || s == "32") return Precision::kSingle;
  if (s == "double" || s == "64") return Precision::kDouble;
  throw Error("unknown precision '" + std::string(s) + "'");
}

BaProblem::BaProblem(std::vector<CameraParams> cameras,
                     std::vector<Eigen::Vector3d> landmarks,
                     std::vector<Observation> observations)
    : cameras_(std::move(cameras)),
      landmarks_(std::move(landmarks)),
      observations_(std::move(observations)) {
  validate();
  build_index();
}

void BaProblem::validate() const {
  for (std::size_t i = 0; i < observations_.size(); ++i) {
    const auto& o = observations_[i];
    if (o.camera_index >= cameras_.size() ||
        o.landmark_index >= landmarks_.size()) {
      throw Error("observation " + std::to_string(i) +
                  " references camera " + std::to_string(o.camera_index) +
                  " / landmark " + std::to_string(o.landmark_index) +
                  " out of range");
    }
  }
}

void BaProblem::build_index() {
  by_landmark_.assign(landmarks_.size(), {});
  for (std::size_t i = 0; i < observations_.size(); ++i) {
    by_landmark_[observations_[i].landmark_index].push_back(i);
  }
  for (auto& idx : by_landmark_) {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return observations_[a].camera_index < observations_[b].camera_index;
    });
  }
}

double BaProblem::cost(double huber_delta) const {
  double sum = 0;
  for (const auto& o : observations_) {
    Eigen::Vector2d r;
    try {
      r = residual(cameras_[o.camera_index], landmarks_[o.landmark_index],
                   o.pixel);
    } catch (const ProjectionDegenerate&) {
      return std::numeric_limits<double>::infinity();
    }
    const double s = r.squaredNorm();
    if (!std::isfinite(s)) return std::numeric_limits<double>::infinity();
    sum += huber_loss(s, huber_delta);
  }
  return 0.5 * sum;
}

bool BaProblem::operator==(const BaProblem& other) const {
  return cameras_ == other.cameras_ && landmarks_ == other.landmarks_ &&
         observations_ == other.observations_;
}

// --- parsing ---------------------------------------------------------------

BalParseError::BalParseError(std::size_t line, const std::string& message)
    : Error("BAL line " + std::to_string(line) + ": " + message), line_(line) {}

namespace {

// Whitespace tokenizer over an in-memory buffer that tracks line numbers.
class Tokenizer {
 public:
  explicit Tokenizer(std::string_view text) : text_(text) {}

  std::size_t line() const { return line_; }

  std::string_view next(const char* what) {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(
                                      text_[pos_]))) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
    if (pos_ >= text_.size()) {
      throw BalParseError(line_, std::string("unexpected end of file, "
                                             "expected ") + what);
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           !std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
    return text_.substr(start, pos_ - start);
  }

  template <typename T>
  T read(const char* what) {
    const std::string_view tok = next(what);
    T value{};
    const auto [ptr, ec] =
        std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw BalParseError(line_, std::string("invalid ") + what + " '" +
                                     std::string(tok) + "'");
    }
    return value;
  }

  bool at_end() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
    return pos_ >= text_.size();
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

BaProblem parse_buffer(std::string_view text) {
  Tokenizer tok(text);
  long long n_cam = 0, n_lm = 0, n_obs = 0;
  try {
    n_cam = tok.read<long long>("camera count");
    n_lm = tok.read<long long>("landmark count");
    n_obs = tok.read<long long>("observation count");
  } catch (const BalParseError& e) {
    throw BalParseError(e.line(), std::string("malformed header: ") + e.what());
  }
  if (n_cam <= 0 || n_lm <= 0 || n_obs <= 0) {
    throw BalParseError(1, "malformed header: counts must be positive");
  }

  std::vector<Observation> obs(static_cast<std::size_t>(n_obs));
  for (auto& o : obs) {
    const long long c = tok.read<long long>("camera index");
    const long long l = tok.read<long long>("landmark index");
    if (c < 0 || c >= n_cam) {
      throw BalParseError(tok.line(),
                          "camera index " + std::to_string(c) + " out of range");
    }
    if (l < 0 || l >= n_lm) {
      throw BalParseError(tok.line(), "landmark index " + std::to_string(l) +
                                          " out of range");
    }
    o.camera_index = static_cast<std::size_t>(c);
    o.landmark_index = static_cast<std::size_t>(l);
    o.pixel.x() = tok.read<double>("pixel x");
    o.pixel.y() = tok.read<double>("pixel y");
  }

  std::vector<CameraParams> cams(static_cast<std::size_t>(n_cam));
  for (auto& cam : cams) {
    Vec9<double> v;
    for (int k = 0; k < kPoseSize; ++k) v[k] = tok.read<double>("camera value");
    cam = CameraParams::from_vector(v);
  }

  std::vector<Eigen::Vector3d> lms(static_cast<std::size_t>(n_lm));
  for (auto& p : lms) {
    for (int k = 0; k < 3; ++k) p[k] = tok.read<double>("landmark value");
  }

  if (!tok.at_end()) {
    throw BalParseError(tok.line(), "trailing data after landmark block");
  }
  return BaProblem(std::move(cams), std::move(lms), std::move(obs));
}

bool is_gzip(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  unsigned char magic[2] = {0, 0};
  f.read(reinterpret_cast<char*>(magic), 2);
  return f.gcount() == 2 && magic[0] == 0x1f && magic[1] == 0x8b;
}

std::string read_gzip(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw Error("cannot open " + path.string());
  std::string out;
  char buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof(buf))) > 0) out.append(buf, n);
  int errnum = 0;
  const char* msg = gzerror(f, &errnum);
  const std::string err = errnum < 0 ? std::string(msg) : std::string();
  gzclose(f);
  if (n < 0 || !err.empty()) {
    throw Error("gzip read error in " + path.string() + ": " + err);
  }
  return out;
}

}  // namespace

BaProblem parse_bal(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_buffer(ss.str());
}

BaProblem parse_bal_string(const std::string& text) {
  return parse_buffer(text);
}

BaProblem load_bal(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error("no such file: " + path.string());
  }
  if (is_gzip(path)) return parse_buffer(read_gzip(path));
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  char magic[3] = {0, 0, 0};
  f.read(magic, 3);
  if (f.gcount() == 3 && magic[0] == 'B' && magic[1] == 'Z' && magic[2] == 'h')
    throw Error(path.string() +
                " is bzip2-compressed; decompress it or recompress with gzip");
  f.clear();
  f.seekg(0);
  return parse_bal(f);
}

void write_bal(std::ostream& out, const BaProblem& problem) {
  out << problem.num_cameras() << ' ' << problem.num_landmarks() << ' '
      << problem.num_observations() << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& o : problem.observations()) {
    out << o.camera_index << ' ' << o.landmark_index << ' ' << o.pixel.x()
        << ' ' << o.pixel.y() << '\n';
  }
  for (const auto& c : problem.cameras()) {
    const Vec9<double> v = c.to_vector();
    for (int k = 0; k < kPoseSize; ++k) out << v[k] << '\n';
  }
  for (const auto& p : problem.landmarks()) {
    out << p.x() << '\n' << p.y() << '\n' << p.z() << '\n';
  }
}

// --- preprocessing ---------------------------------------------------------

namespace {

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace

BaProblem normalize_gauge(const BaProblem& problem, GaugeNormalization* info) {
  if (problem.num_landmarks() == 0) throw Error("normalize_gauge: no landmarks");

  const auto& lms = problem.landmarks();
  Eigen::Vector3d median;
  for (int k = 0; k < 3; ++k) {
    std::vector<double> axis(lms.size());
    for (std::size_t j = 0; j < lms.size(); ++j) axis[j] = lms[j][k];
    median[k] = median_of(std::move(axis));
  }

  // per-point deviation aggregated over the axes as an L1 norm
  std::vector<double> dev;
  dev.reserve(lms.size());
  for (const auto& p : lms) dev.push_back((p - median).lpNorm<1>());
  const double mad = median_of(std::move(dev));

  GaugeNormalization g;
  g.median = median;
  if (mad > 0 && std::isfinite(mad)) {
    g.scale = 100.0 / mad;
  } else {
    g.degenerate = true;
    g.scale = 1.0;
  }
  if (info) *info = g;

  // x' = s (x - m). With P = R x + t this gives P' = s P when
  // t' = s (t + R m), so the projection is unchanged.
  std::vector<Eigen::Vector3d> new_lms(lms.size());
  for (std::size_t j = 0; j < lms.size(); ++j) {
    new_lms[j] = g.scale * (lms[j] - median);
  }
  std::vector<CameraParams> cams = problem.cameras();
  for (auto& c : cams) {
    c.translation = g.scale * (c.translation + rotate<double>(c.rotation, median));
  }
  return BaProblem(std::move(cams), std::move(new_lms), problem.observations());
}

BaProblem perturb(const BaProblem& problem, double sigma, std::uint64_t seed) {
  if (sigma < 0) throw Error("perturb: sigma must be non-negative");
  if (sigma == 0) return problem;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);

  std::vector<Eigen::Vector3d> lms = problem.landmarks();
  for (auto& p : lms) {
    for (int k = 0; k < 3; ++k) p[k] += noise(rng);
  }
  std::vector<CameraParams> cams = problem.cameras();
  for (auto& c : cams) {
    Eigen::Vector3d center = c.center();
    for (int k = 0; k < 3; ++k) center[k] += noise(rng);
    c.translation = -rotate<double>(c.rotation, center);
  }
  return BaProblem(std::move(cams), std::move(lms), problem.observations());
}

BaProblem filter_observations(const BaProblem& problem, double z_min,
                              FilterStats* stats) {
  const auto& obs = problem.observations();
  std::vector<char> keep(obs.size(), 1);

  // Depth along the viewing direction: BAL cameras look down -z.
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto& c = problem.cameras()[obs[i].camera_index];
    const Eigen::Vector3d p_cam =
        rotate<double>(c.rotation, problem.landmarks()[obs[i].landmark_index]) +
        c.translation;
    if (!(-p_cam.z() > z_min)) keep[i] = 0;
  }

  std::vector<std::size_t> count(problem.num_landmarks(), 0);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (keep[i]) ++count[obs[i].landmark_index];
  }
  // Dropping a landmark never lowers another landmark's count, so one pass
  // reaches the fixed point.
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (keep[i] && count[obs[i].landmark_index] < 2) keep[i] = 0;
  }

  std::vector<std::size_t> lm_map(problem.num_landmarks(),
                                  std::numeric_limits<std::size_t>::max());
  std::vector<Eigen::Vector3d> lms;
  for (std::size_t j = 0; j < problem.num_landmarks(); ++j) {
    if (count[j] >= 2) {
      lm_map[j] = lms.size();
      lms.push_back(problem.landmarks()[j]);
    }
  }

  std::vector<char> cam_used(problem.num_cameras(), 0);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (keep[i]) cam_used[obs[i].camera_index] = 1;
  }
  std::vector<std::size_t> cam_map(problem.num_cameras(),
                                   std::numeric_limits<std::size_t>::max());
  std::vector<CameraParams> cams;
  for (std::size_t i = 0; i < problem.num_cameras(); ++i) {
    if (cam_used[i]) {
      cam_map[i] = cams.size();
      cams.push_back(problem.cameras()[i]);
    }
  }

  std::vector<Observation> new_obs;
  new_obs.reserve(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (!keep[i]) continue;
    Observation o = obs[i];
    o.camera_index = cam_map[o.camera_index];
    o.landmark_index = lm_map[o.landmark_index];
    new_obs.push_back(o);
  }

  if (new_obs.empty()) {
    throw Error("filter_observations: no observations remain after filtering");
  }
  if (stats) {
    stats->removed_observations = obs.size() - new_obs.size();
    stats->removed_landmarks = problem.num_landmarks() - lms.size();
  }
  return BaProblem(std::move(cams), std::move(lms), std::move(new_obs));
}

BaProblem preprocess(const BaProblem& problem, const PreprocessOptions& opts) {
  BaProblem p = opts.normalize ? normalize_gauge(problem) : problem;
  p = perturb(p, opts.sigma, opts.seed);
  return filter_observations(p, opts.z_min);
}

}  // namespace sqrtba
