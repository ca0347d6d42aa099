#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sqrtba/camera_model.hpp"

namespace sqrtba {

struct Observation {
  std::size_t camera_index = 0;
  std::size_t landmark_index = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();

  bool operator==(const Observation&) const = default;
};

// In-memory bundle adjustment problem. State is always held in double
// precision, independent of the precision a solver computes in.
class BaProblem {
 public:
  BaProblem() = default;
  BaProblem(std::vector<CameraParams> cameras,
            std::vector<Eigen::Vector3d> landmarks,
            std::vector<Observation> observations);

  std::size_t num_cameras() const { return cameras_.size(); }
  std::size_t num_landmarks() const { return landmarks_.size(); }
  std::size_t num_observations() const { return observations_.size(); }

  const std::vector<CameraParams>& cameras() const { return cameras_; }
  const std::vector<Eigen::Vector3d>& landmarks() const { return landmarks_; }
  const std::vector<Observation>& observations() const {
    return observations_;
  }

  std::vector<CameraParams>& mutable_cameras() { return cameras_; }
  std::vector<Eigen::Vector3d>& mutable_landmarks() { return landmarks_; }

  // Observation indices of landmark j, sorted by ascending camera index
  // (stable with respect to file order).
  const std::vector<std::size_t>& landmark_observations(std::size_t j) const {
    return by_landmark_[j];
  }

  // 0.5 * sum of Huber losses over all observations, in double precision.
  // Returns +inf if any projection is degenerate or non-finite.
  double cost(double huber_delta) const;

  // Throws Error if an index is out of range.
  void validate() const;

  bool operator==(const BaProblem& other) const;

 private:
  void build_index();

  std::vector<CameraParams> cameras_;
  std::vector<Eigen::Vector3d> landmarks_;
  std::vector<Observation> observations_;
  std::vector<std::vector<std::size_t>> by_landmark_;
};

class BalParseError : public Error {
 public:
  BalParseError(std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

BaProblem parse_bal(std::istream& in);
BaProblem parse_bal_string(const std::string& text);

// Reads plain text or gzip-compressed BAL files (detected by magic bytes).
BaProblem load_bal(const std::filesystem::path& path);

void write_bal(std::ostream& out, const BaProblem& problem);

// --- deterministic preprocessing -----------------------------------------

struct GaugeNormalization {
  Eigen::Vector3d median = Eigen::Vector3d::Zero();
  double scale = 1.0;      // applied multiplicative factor
  bool degenerate = false; // MAD == 0, no rescale applied
};

// Centres landmarks at the per-axis median and rescales so that the median
// of the L1 deviations |x_j - median|_1 is 100. Cameras follow the
// same similarity so that projections are unchanged.
BaProblem normalize_gauge(const BaProblem& problem,
                          GaugeNormalization* info = nullptr);

// Adds iid Gaussian noise of std sigma to landmark and camera positions
// (camera centres). Deterministic for a fixed seed.
BaProblem perturb(const BaProblem& problem, double sigma, std::uint64_t seed);

struct FilterStats {
  std::size_t removed_observations = 0;
  std::size_t removed_landmarks = 0;
};

// Removes observations with camera-frame z <= z_min, then iteratively removes
// landmarks with fewer than two observations; reindexes densely, preserving
// relative order. Throws Error if nothing remains.
BaProblem filter_observations(const BaProblem& problem, double z_min,
                              FilterStats* stats = nullptr);

struct PreprocessOptions {
  double sigma = 1e-2;
  std::uint64_t seed = 42;
  double z_min = 1e-8;
  bool normalize = true;
};

// normalize_gauge -> perturb -> filter_observations
BaProblem preprocess(const BaProblem& problem, const PreprocessOptions& opts);

}  // namespace sqrtba
