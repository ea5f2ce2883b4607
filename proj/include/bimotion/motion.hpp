#pragma once

#include "bimotion/mat.hpp"

namespace bimotion {

// A motion clip: num_frames x feature_dim real features.
struct MotionSequence {
  Mat frames;  // [num_frames, feature_dim]

  MotionSequence() = default;
  explicit MotionSequence(Mat f) : frames(std::move(f)) {}
  MotionSequence(int num_frames, int feature_dim) : frames(num_frames, feature_dim) {}

  int num_frames() const { return frames.rows; }
  int feature_dim() const { return frames.cols; }

  void validate() const {
    require(frames.rows >= 1, errc::validation, "motion: at least one frame required");
    require(frames.all_finite(), errc::validation, "motion: non-finite entries");
  }
};

}  // namespace bimotion
